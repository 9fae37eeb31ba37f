#pragma once
//
// Adaptive cross approximation for SPSD matrices and for affine
// parameter-dependent families A(theta) = sum_j phi_j(theta) A_j.
//

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covaca/kernels.hpp"

namespace covaca {

/// A(theta) = sum_j phi_j(theta) A_j with precomputed traces t_j.
struct AffineFamily {
  Index n = 0;
  std::vector<EntryOracle> terms;
  /// theta -> (phi_1(theta), ..., phi_s(theta)).
  std::function<Vector(std::span<const double>)> coeffs;
  std::vector<double> traces;
  ParamBox param_box;
  /// Exact covariance C(theta); empty when unavailable.
  std::function<EntryOracle(std::span<const double>)> true_oracle;

  Index s() const { return static_cast<Index>(terms.size()); }
  bool has_true_oracle() const { return static_cast<bool>(true_oracle); }
  /// Oracle for A(theta).
  EntryOracle at(std::span<const double> theta) const;
  void validate() const;
};

/// Family with a single term A_1 and phi_1 = 1.
AffineFamily single_matrix_family(const EntryOracle& a);

struct IndexSet {
  std::vector<Index> indices;

  Index size() const { return static_cast<Index>(indices.size()); }
  bool contains(Index i) const;
  IndexSet prefix(Index k) const;
};

/// A(:,I), A(I,I) and the upper Cholesky factor of A(I,I).
struct CrossFactorization {
  IndexSet index_set;
  DenseMatrix cols;
  DenseMatrix pivot_block;
  TriangularFactor pivot_chol;

  /// A(:,I) R^{-1}; its Gram matrix is A_I.
  DenseMatrix scaled_cols() const { return pivot_chol.solve_right(cols); }
  /// Dense A_I = A(:,I) A(I,I)^{-1} A(:,I)^T.
  DenseMatrix materialize() const;
};

/// Throws Errc::CholeskyFailure if A(I,I) is not numerically positive definite.
CrossFactorization build_cross(const EntryOracle& a, const IndexSet& index_set);

enum class AcaTermination {
  ToleranceReached,
  KmaxReached,
  NonpositivePivot,     // no positive residual diagonal left
  NoPositiveResidual,   // every res(theta) <= 0 before tol was met
};

std::string_view to_string(AcaTermination t) noexcept;

struct AcaStep {
  Index k = 0;                // |I| when this record was taken
  Index pivot_index = -1;     // index appended after this record, -1 if none
  double pivot_value = 0.0;
  double trace_residual = 0.0;
  std::optional<ParamPoint> theta_star;
  Index skipped_thetas = 0;   // parameters whose pivot block failed Cholesky
};

struct AcaTrace {
  std::vector<AcaStep> steps;
  AcaTermination termination = AcaTermination::ToleranceReached;

  /// CSV with header iter,res_max,theta_star_1[,theta_star_2...],pivot_index.
  std::string to_csv(std::size_t param_dim) const;
};

struct AcaResult {
  IndexSet index_set;
  AcaTrace trace;
  std::vector<Vector> factors;  // u_1..u_k with A_I = sum u u^T
  double initial_trace = 0.0;
  double final_trace = 0.0;
};

/// Pivoted partial Cholesky on the residual diagonal. Each trace step
/// records |I| and the residual trace after the pivot.
AcaResult aca_spsd(const EntryOracle& a, double tol, Index k_max);

struct ParamAcaOptions {
  int threads = 1;
  /// Keep res(theta) for every theta at every iteration.
  bool record_residuals = false;
};

struct ParamAcaResult {
  IndexSet index_set;
  AcaTrace trace;
  double final_res_max = 0.0;
  long long entry_evaluations = 0;
  double flop_estimate = 0.0;
  std::vector<Vector> residuals;  // per iteration, filled when requested
};

/// Default k_max: min(n, 512).
Index default_k_max(Index n);

/// Greedy parameter-dependent ACA driven by the QR-based trace residual.
/// k_max < 0 selects default_k_max.
ParamAcaResult param_aca(const AffineFamily& fam, const std::vector<ParamPoint>& theta_set,
                         double tol, Index k_max, const ParamAcaOptions& options = {});

/// Same greedy loop, but res(theta) is accumulated directly on the true
/// oracle. Reference implementation for validation and benchmarks.
ParamAcaResult param_aca_direct(const AffineFamily& fam, const std::vector<ParamPoint>& theta_set,
                                double tol, Index k_max, const ParamAcaOptions& options = {});

/// Oracle for A - A_I using the cached Cholesky factor of A(I,I).
EntryOracle residual_oracle(const EntryOracle& a, const CrossFactorization& cross);
EntryOracle residual_oracle(const AffineFamily& fam, const IndexSet& index_set,
                            std::span<const double> theta);

/// trace(A) - trace(A_I) by residual-diagonal accumulation.
double residual_trace(const EntryOracle& a, const IndexSet& index_set);

struct RobustnessBound {
  double bound = 0.0;
  double rho = 0.0;
  double w_norm = 0.0;
  double delta = 0.0;
};

/// Perturbation bound for trace(A~ - A~_I) where A~ = a - e and I was chosen
/// by ACA on a. Throws Errc::RhoTooLarge if ||e||_2 ||A(I,I)^{-1}||_2 >= 1.
RobustnessBound robustness_bound(const DenseMatrix& a, const DenseMatrix& e,
                                 const IndexSet& index_set, double tol);

/// trace_residual <= 4^k (n - k) sigma_{k+1}(a), compared in log space with
/// 1e-10 absolute slack.
bool foster_bound_check(const DenseMatrix& a, const IndexSet& index_set, double trace_residual);

}  // namespace covaca
