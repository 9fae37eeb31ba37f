#pragma once
//
// Dense linear algebra used throughout covaca: Cholesky, incremental thin QR,
// symmetric eigendecomposition, thin SVD and SPSD square roots.
//
// Matrices are Eigen column-major dense matrices. Cholesky factors follow the
// upper convention R^T R = A.
//

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "covaca/error.hpp"

namespace covaca {

using Index = Eigen::Index;
using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class TriangleShape { lower, upper };

/// A triangular matrix together with the side that carries its entries.
struct TriangularFactor {
  DenseMatrix matrix;
  TriangleShape shape = TriangleShape::upper;

  Index size() const { return matrix.rows(); }

  /// Solves (R^T) y = b for an upper factor (forward substitution).
  Vector solve_transposed(const Vector& b) const;
  /// Solves R x = b for an upper factor (back substitution).
  Vector solve(const Vector& b) const;
  /// Returns B R^{-1}, i.e. solves X R = B from the right.
  DenseMatrix solve_right(const DenseMatrix& b) const;
};

/// Upper Cholesky factor R with R^T R = a.
///
/// Throws Errc::NotPositiveDefinite when a pivot drops to
/// 1e-14 * max(diag(a)) or below.
TriangularFactor cholesky(const DenseMatrix& a);

/// Thin QR factorisation grown one column at a time by classical
/// Gram-Schmidt with one reorthogonalisation pass.
///
/// Columns that are numerically dependent on the current basis can either be
/// rejected (append) or stored as coefficient-only columns (append_projected);
/// in the latter case r_factor() becomes an upper staircase of shape
/// rank() x appended_cols() and Q * R still reproduces every column.
class IncrementalQR {
 public:
  IncrementalQR() = default;
  explicit IncrementalQR(Index rows) : rows_(rows) {}

  Index rows() const { return rows_; }
  Index rank() const { return rank_; }
  Index appended_cols() const { return cols_; }

  /// Orthonormal basis, rows() x rank().
  auto q() const { return q_.leftCols(rank_); }
  /// Coefficients, rank() x appended_cols().
  auto r_factor() const { return r_.topLeftCorner(rank_, cols_); }

  /// Appends a column. Throws Errc::LinearlyDependentColumn (state unchanged)
  /// when the projected residual norm is below 1e-13 * ||col||.
  void append(const Eigen::Ref<const Vector>& col);

  /// Like append(), but a dependent column is kept as a pure coefficient
  /// column instead of raising. Returns true if the basis grew.
  bool append_projected(const Eigen::Ref<const Vector>& col);

  /// Relative residual threshold below which a column counts as dependent.
  static constexpr double dependence_tol = 1e-13;

 private:
  bool append_impl(const Eigen::Ref<const Vector>& col, bool allow_dependent);
  void reserve(Index cap);

  Index rows_ = 0;
  Index rank_ = 0;
  Index cols_ = 0;
  DenseMatrix q_;  // rows_ x capacity
  DenseMatrix r_;  // capacity x capacity, zero outside the used block
};

/// Value-semantics wrapper: returns a copy of state with new_col appended.
IncrementalQR qr_append(IncrementalQR state, const Vector& new_col);

struct SymEig {
  Vector values;        // descending
  DenseMatrix vectors;  // columns match values
};

/// Symmetric eigendecomposition with eigenvalues sorted descending.
/// Throws Errc::NoConvergence if the QL iteration fails.
SymEig sym_eig(const DenseMatrix& a);

/// Eigenvalues only, descending. Cheaper than sym_eig when vectors are unused.
Vector sym_eigenvalues(const DenseMatrix& a);

struct ThinSvd {
  DenseMatrix u;
  Vector sigma;  // descending, nonnegative
  DenseMatrix v;
};

ThinSvd thin_svd(const DenseMatrix& a);

/// Principal square root of an SPSD matrix. Eigenvalues down to
/// -1e-10 * ||a||_2 are clamped to zero; anything more negative throws
/// Errc::NotSPSD.
DenseMatrix spsd_sqrt(const DenseMatrix& a);

double trace(const DenseMatrix& a);

/// Sum of singular values; for symmetric input this is the sum of |lambda|.
double nuclear_norm(const DenseMatrix& a);

/// Spectral norm (largest singular value).
double spectral_norm(const DenseMatrix& a);

/// Returns 0.5 * (a + a^T).
DenseMatrix symmetrize(const DenseMatrix& a);

}  // namespace covaca
