#include "covaca/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "covaca/csv.hpp"

namespace covaca {
namespace {

void check_pair(const GaussianPair& p) {
  if (p.c.rows() != p.c.cols() || p.c_hat.rows() != p.c_hat.cols() || p.c.rows() != p.c_hat.rows())
    throw Error(Errc::InvalidArgument, "covariances must be square and of equal size");
}

double loewner_checked_trace(const DenseMatrix& c, const DenseMatrix& c_hat) {
  const DenseMatrix diff = symmetrize(c - c_hat);
  const double tr_c = trace(c);
  if (diff.rows() > 0) {
    const Vector lam = sym_eigenvalues(diff);
    const double lam_min = lam(lam.size() - 1);
    if (lam_min < -1e-10 * std::abs(tr_c))
      throw Error(Errc::OrderViolated, "C - C_hat has eigenvalue " + std::to_string(lam_min));
  }
  return trace(diff);
}

// spsd_sqrt with eigenvalues at rounding level relative to the largest set to zero.
DenseMatrix rounded_sqrt(const DenseMatrix& c) {
  const SymEig eig = sym_eig(symmetrize(c));
  const double top = eig.values.cwiseAbs().maxCoeff();
  const double lambda_min = eig.values(eig.values.size() - 1);
  if (lambda_min < -1e-10 * top) throw Error(Errc::NotSPSD, "min eigenvalue " + std::to_string(lambda_min));
  const double cut = static_cast<double>(c.rows()) * std::numeric_limits<double>::epsilon() * top;
  Vector roots(eig.values.size());
  for (Index i = 0; i < roots.size(); ++i) roots(i) = eig.values(i) > cut ? std::sqrt(eig.values(i)) : 0.0;
  return eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
}

}  // namespace

double w2_exact(const GaussianPair& pair) {
  check_pair(pair);
  if (pair.c.rows() == 0) return 0.0;
  // W2 = min over orthogonal Q of ||C^{1/2} - C_hat^{1/2} Q||_F. Evaluating the
  // minimiser's residual directly avoids the cancellation in
  // trace(C) + trace(C_hat) - 2 trace((C^{1/2} C_hat C^{1/2})^{1/2}).
  const DenseMatrix a = rounded_sqrt(pair.c);
  const DenseMatrix b = rounded_sqrt(pair.c_hat);
  const ThinSvd svd = thin_svd(a * b);
  return (a - b * svd.v * svd.u.transpose()).norm();
}

double w2_trace_bound(const GaussianPair& pair) {
  check_pair(pair);
  return std::sqrt(std::max(0.0, loewner_checked_trace(pair.c, pair.c_hat)));
}

bool w2_bound_is_tight(const GaussianPair& pair) {
  check_pair(pair);
  const double nc = pair.c.norm(), nh = pair.c_hat.norm();
  const DenseMatrix comm = pair.c * pair.c_hat - pair.c_hat * pair.c;
  if (comm.norm() > 1e-8 * nc * nh) return false;
  const DenseMatrix prod = spsd_sqrt(pair.c) * spsd_sqrt(pair.c_hat);
  return (prod - pair.c_hat).norm() <= 1e-8 * nh;
}

double McBoundReport::bound() const { return std::sqrt(std::max(0.0, mean_trace + epsilon)); }

std::string McBoundReport::csv_row() const {
  return std::to_string(m_samples) + "," + format_double(mean_trace) + "," + format_double(variance) + "," +
         format_double(epsilon) + "," + format_double(confidence_lb);
}

McBoundReport mc_bound_from_traces(std::span<const double> xi, double epsilon) {
  if (xi.size() < 2) throw Error(Errc::InvalidArgument, "need at least two Monte Carlo samples");
  if (!(epsilon > 0.0)) throw Error(Errc::InvalidArgument, "epsilon must be positive");
  McBoundReport r;
  r.m_samples = static_cast<Index>(xi.size());
  r.epsilon = epsilon;
  double sum = 0.0;
  for (double x : xi) sum += x;
  r.mean_trace = sum / static_cast<double>(xi.size());
  double ss = 0.0;
  for (double x : xi) ss += (x - r.mean_trace) * (x - r.mean_trace);
  r.variance = ss / static_cast<double>(xi.size() - 1);
  r.confidence_lb = std::clamp(1.0 - r.variance / (static_cast<double>(xi.size()) * epsilon * epsilon), 0.0, 1.0);
  return r;
}

McBoundReport w2_param_bound(const MatrixFamily& fam_true, const MatrixFamily& fam_hat,
                             const std::vector<ParamPoint>& thetas, double epsilon) {
  std::vector<double> xi;
  xi.reserve(thetas.size());
  for (const ParamPoint& th : thetas) xi.push_back(loewner_checked_trace(fam_true(th), fam_hat(th)));
  return mc_bound_from_traces(xi, epsilon);
}

}  // namespace covaca
