#include "covaca/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace covaca {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::LinearlyDependentColumn: return "LinearlyDependentColumn";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NotSPSD: return "NotSPSD";
    case Errc::DomainError: return "DomainError";
    case Errc::PivotVanished: return "PivotVanished";
    case Errc::SingularInterpolationMatrix: return "SingularInterpolationMatrix";
    case Errc::TruncationEmpty: return "TruncationEmpty";
    case Errc::DomainMismatch: return "DomainMismatch";
    case Errc::CholeskyFailure: return "CholeskyFailure";
    case Errc::RhoTooLarge: return "RhoTooLarge";
    case Errc::OrderViolated: return "OrderViolated";
    case Errc::RefusesLargeN: return "RefusesLargeN";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// TriangularFactor

Vector TriangularFactor::solve_transposed(const Vector& b) const {
  if (shape == TriangleShape::upper)
    return matrix.triangularView<Eigen::Upper>().transpose().solve(b);
  return matrix.triangularView<Eigen::Lower>().transpose().solve(b);
}

Vector TriangularFactor::solve(const Vector& b) const {
  if (shape == TriangleShape::upper) return matrix.triangularView<Eigen::Upper>().solve(b);
  return matrix.triangularView<Eigen::Lower>().solve(b);
}

DenseMatrix TriangularFactor::solve_right(const DenseMatrix& b) const {
  DenseMatrix x = b;
  if (shape == TriangleShape::upper)
    matrix.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(x);
  else
    matrix.triangularView<Eigen::Lower>().solveInPlace<Eigen::OnTheRight>(x);
  return x;
}

// ---------------------------------------------------------------------------
// Cholesky

TriangularFactor cholesky(const DenseMatrix& a) {
  if (a.rows() != a.cols())
    throw Error(Errc::InvalidArgument, "cholesky: matrix is not square");
  const Index n = a.rows();
  if (n == 0) return {DenseMatrix(0, 0), TriangleShape::upper};
  if (!a.allFinite()) throw Error(Errc::InvalidArgument, "cholesky: non-finite entry");

  const double max_diag = a.diagonal().maxCoeff();
  const double threshold = 1e-14 * std::max(max_diag, 0.0);

  // Column-oriented upper Cholesky: R(:, j) from a(:, j) and previous columns.
  DenseMatrix r = DenseMatrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < j; ++i) {
      const double s = a(i, j) - r.col(i).head(i).dot(r.col(j).head(i));
      r(i, j) = s / r(i, i);
    }
    const double pivot = a(j, j) - r.col(j).head(j).squaredNorm();
    if (!(pivot > threshold))
      throw Error(Errc::NotPositiveDefinite,
                  "pivot " + std::to_string(j) + " = " + std::to_string(pivot));
    r(j, j) = std::sqrt(pivot);
  }
  return {std::move(r), TriangleShape::upper};
}

// ---------------------------------------------------------------------------
// IncrementalQR

void IncrementalQR::reserve(Index cap) {
  if (q_.rows() != rows_ || q_.cols() < cap) {
    DenseMatrix grown(rows_, std::max<Index>(cap, 2 * q_.cols()));
    grown.leftCols(rank_) = q_.leftCols(rank_);
    q_.swap(grown);
  }
  if (r_.cols() < cap) {
    const Index c = std::max<Index>(cap, 2 * r_.cols());
    DenseMatrix grown = DenseMatrix::Zero(c, c);
    grown.topLeftCorner(rank_, cols_) = r_.topLeftCorner(rank_, cols_);
    r_.swap(grown);
  }
}

bool IncrementalQR::append_impl(const Eigen::Ref<const Vector>& col, bool allow_dependent) {
  if (col.size() != rows_)
    throw Error(Errc::InvalidArgument, "qr_append: column length does not match row count");

  const double col_norm = col.norm();
  Vector v = col;
  Vector h = Vector::Zero(rank_);
  if (rank_ > 0) {
    const auto q = q_.leftCols(rank_);
    // CGS2: two classical Gram-Schmidt passes.
    for (int pass = 0; pass < 2; ++pass) {
      const Vector hp = q.transpose() * v;
      v.noalias() -= q * hp;
      h += hp;
    }
  }
  const double rho = v.norm();
  const bool dependent = !(rho > dependence_tol * col_norm) || col_norm == 0.0;
  if (dependent && !allow_dependent)
    throw Error(Errc::LinearlyDependentColumn,
                "residual " + std::to_string(rho) + " vs column norm " + std::to_string(col_norm));

  // rank <= cols, so a square R capacity of cols + 1 suffices; unused rows
  // stay zero for earlier columns.
  reserve(cols_ + 1);
  r_.col(cols_).head(rank_) = h;
  if (!dependent) {
    q_.col(rank_) = v / rho;
    r_(rank_, cols_) = rho;
    ++rank_;
  }
  ++cols_;
  return !dependent;
}

void IncrementalQR::append(const Eigen::Ref<const Vector>& col) { append_impl(col, false); }

bool IncrementalQR::append_projected(const Eigen::Ref<const Vector>& col) {
  return append_impl(col, true);
}

IncrementalQR qr_append(IncrementalQR state, const Vector& new_col) {
  state.append(new_col);
  return state;
}

// ---------------------------------------------------------------------------
// Spectral routines

namespace {

void require_square(const DenseMatrix& a, const char* who) {
  if (a.rows() != a.cols())
    throw Error(Errc::InvalidArgument, std::string(who) + ": matrix is not square");
  if (!a.allFinite()) throw Error(Errc::InvalidArgument, std::string(who) + ": non-finite entry");
}

}  // namespace

SymEig sym_eig(const DenseMatrix& a) {
  require_square(a, "sym_eig");
  if (a.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(a, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error(Errc::NoConvergence, "sym_eig");
  // Eigen returns ascending order.
  return {solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
}

Vector sym_eigenvalues(const DenseMatrix& a) {
  require_square(a, "sym_eigenvalues");
  if (a.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(Errc::NoConvergence, "sym_eigenvalues");
  return solver.eigenvalues().reverse();
}

ThinSvd thin_svd(const DenseMatrix& a) {
  if (!a.allFinite()) throw Error(Errc::InvalidArgument, "thin_svd: non-finite entry");
  Eigen::BDCSVD<DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(Errc::NoConvergence, "thin_svd");
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

DenseMatrix spsd_sqrt(const DenseMatrix& a) {
  const SymEig eig = sym_eig(symmetrize(a));
  if (eig.values.size() == 0) return DenseMatrix(0, 0);
  const double norm2 = eig.values.cwiseAbs().maxCoeff();
  const double lambda_min = eig.values(eig.values.size() - 1);
  if (lambda_min < -1e-10 * norm2)
    throw Error(Errc::NotSPSD, "min eigenvalue " + std::to_string(lambda_min));
  const Vector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
}

double trace(const DenseMatrix& a) { return a.trace(); }

double nuclear_norm(const DenseMatrix& a) {
  if (a.rows() == a.cols() && a.isApprox(a.transpose(), 1e-14))
    return sym_eigenvalues(symmetrize(a)).cwiseAbs().sum();
  return thin_svd(a).sigma.sum();
}

double spectral_norm(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == a.cols() && a.isApprox(a.transpose(), 1e-14))
    return sym_eigenvalues(symmetrize(a)).cwiseAbs().maxCoeff();
  return thin_svd(a).sigma(0);
}

DenseMatrix symmetrize(const DenseMatrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace covaca
