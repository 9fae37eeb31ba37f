#pragma once
//
// Wasserstein-2 distances between mean-zero Gaussian measures and the trace
// bounds that certify them.
//

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "covaca/kernels.hpp"

namespace covaca {

struct GaussianPair {
  DenseMatrix c;
  DenseMatrix c_hat;

  Index n() const { return c.rows(); }
};

/// W2(N(0, C), N(0, C_hat)) by the Gelbrich formula, evaluated as the
/// orthogonal Procrustes residual of the two square roots.
double w2_exact(const GaussianPair& pair);

/// sqrt(trace(C - C_hat)). Throws Errc::OrderViolated unless C_hat <= C in
/// the Loewner order up to -1e-10 * trace(C).
double w2_trace_bound(const GaussianPair& pair);

/// True when C and C_hat commute and C^{1/2} C_hat^{1/2} = C_hat, in which case
/// the trace bound is attained.
bool w2_bound_is_tight(const GaussianPair& pair);

struct McBoundReport {
  Index m_samples = 0;
  double mean_trace = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double epsilon = 0.0;
  double confidence_lb = 0.0;

  double bound() const;  // sqrt(mean_trace + epsilon)
  std::string csv_header() const { return "M,mean_trace,variance,epsilon,confidence_lb"; }
  std::string csv_row() const;
};

using MatrixFamily = std::function<DenseMatrix(std::span<const double>)>;

/// Monte Carlo estimate of the hierarchical bound: xi_m = trace(C(theta_m) -
/// C_hat(theta_m)); W2^2 <= mean + epsilon holds with probability at least
/// confidence_lb.
McBoundReport w2_param_bound(const MatrixFamily& fam_true, const MatrixFamily& fam_hat,
                             const std::vector<ParamPoint>& thetas, double epsilon);

/// Same from precomputed trace differences.
McBoundReport mc_bound_from_traces(std::span<const double> xi, double epsilon);

}  // namespace covaca
