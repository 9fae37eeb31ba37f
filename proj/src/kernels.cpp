#include "covaca/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace covaca {

KernelSpec KernelSpec::gaussian(double sigma2) {
  return {KernelFamily::gaussian, sigma2, 1, std::nullopt};
}

KernelSpec KernelSpec::matern_fixed(double nu, double sigma2) {
  return {KernelFamily::matern, sigma2, 1, nu};
}

KernelSpec KernelSpec::matern_free(double sigma2) {
  return {KernelFamily::matern, sigma2, 2, std::nullopt};
}

void KernelSpec::validate() const {
  if (!(sigma2 > 0.0)) throw Error(Errc::InvalidArgument, "sigma2 must be positive");
  if (fixed_nu && !(*fixed_nu > 0.0))
    throw Error(Errc::InvalidArgument, "fixed smoothness must be positive");
  switch (family) {
    case KernelFamily::gaussian:
      if (theta_dim != 1) throw Error(Errc::InvalidArgument, "gaussian kernel has one parameter");
      break;
    case KernelFamily::matern:
      if (theta_dim == 1 && !fixed_nu)
        throw Error(Errc::InvalidArgument, "matern with one parameter needs a fixed smoothness");
      if (theta_dim == 2 && fixed_nu)
        throw Error(Errc::InvalidArgument, "matern with free smoothness cannot fix it");
      if (theta_dim != 1 && theta_dim != 2)
        throw Error(Errc::InvalidArgument, "matern kernel has one or two parameters");
      break;
  }
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (family == KernelFamily::gaussian) {
    os << "gaussian " << sigma2;
  } else if (fixed_nu) {
    os << "matern " << sigma2 << " " << *fixed_nu;
  } else {
    os << "matern " << sigma2;
  }
  return os.str();
}

bool ParamBox::contains(std::span<const double> theta) const {
  if (theta.size() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i)
    if (theta[i] < lower[i] || theta[i] > upper[i]) return false;
  return true;
}

void ParamBox::validate() const {
  if (lower.empty() || lower.size() != upper.size())
    throw Error(Errc::InvalidArgument, "parameter box bounds have mismatched dimensions");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(lower[i] > 0.0)) throw Error(Errc::InvalidArgument, "parameter lower bound must be positive");
    if (!(lower[i] <= upper[i])) throw Error(Errc::InvalidArgument, "parameter box has lower > upper");
  }
}

double gaussian_kernel(double d, double theta, double sigma2) {
  if (!(theta > 0.0)) throw Error(Errc::DomainError, "gaussian correlation length must be positive");
  if (!(d >= 0.0)) throw Error(Errc::DomainError, "distance must be nonnegative");
  return sigma2 * std::exp(-d * d / (2.0 * theta * theta));
}

double matern_kernel(double d, double theta1, double theta2, double sigma2) {
  if (!(theta1 > 0.0) || !(theta2 > 0.0))
    throw Error(Errc::DomainError, "matern parameters must be positive");
  if (!(d >= 0.0)) throw Error(Errc::DomainError, "distance must be nonnegative");
  const double x = std::sqrt(2.0 * theta2) * d / theta1;
  if (x == 0.0) return sigma2;
  const double log_c = std::log(sigma2) + (1.0 - theta2) * std::log(2.0) - std::lgamma(theta2) +
                       theta2 * std::log(x) + log_bessel_k(theta2, x);
  return std::min(std::exp(log_c), sigma2);
}

double kernel_value(const KernelSpec& spec, double d, std::span<const double> theta) {
  if (theta.size() != static_cast<std::size_t>(spec.theta_dim))
    throw Error(Errc::InvalidArgument, "parameter vector has the wrong dimension");
  if (spec.family == KernelFamily::gaussian) return gaussian_kernel(d, theta[0], spec.sigma2);
  const double nu = spec.fixed_nu ? *spec.fixed_nu : theta[1];
  return matern_kernel(d, theta[0], nu, spec.sigma2);
}

IsotropicKernel kernel_function(const KernelSpec& spec) {
  spec.validate();
  return [spec](double d, std::span<const double> theta) { return kernel_value(spec, d, theta); };
}

// ---------------------------------------------------------------------------

double SpatialGrid::distance(Index i, Index j) const {
  const auto& a = points[static_cast<std::size_t>(i)];
  const auto& b = points[static_cast<std::size_t>(j)];
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double SpatialGrid::max_distance() const {
  return n0 <= 1 ? 0.0 : std::sqrt(2.0) * static_cast<double>(n0 - 1) * spacing();
}

SpatialGrid make_grid(Index n0, GridSpacing spacing) {
  if (n0 < 1) throw Error(Errc::InvalidArgument, "grid needs n0 >= 1");
  SpatialGrid g;
  g.n0 = n0;
  const Index n = n0 * n0;
  g.points.reserve(static_cast<std::size_t>(n));
  const double h = 1.0 / static_cast<double>(spacing == GridSpacing::cell_centre ? n0 : n0 + 1);
  g.step = h;
  for (Index i = 0; i < n; ++i) {
    g.points.push_back({(static_cast<double>(i % n0) + 0.5) * h,
                        (static_cast<double>(i / n0) + 0.5) * h});
  }
  g.weight = 1.0 / static_cast<double>(n);
  return g;
}

// ---------------------------------------------------------------------------

Vector EntryOracle::column(Index j) const {
  Vector c(n);
  if (fill_column) {
    fill_column(j, c.data());
    return c;
  }
  for (Index i = 0; i < n; ++i) c(i) = (*this)(i, j);
  return c;
}

Vector EntryOracle::diagonal() const {
  if (diag_hint) return *diag_hint;
  Vector d(n);
  for (Index i = 0; i < n; ++i) d(i) = eval(i, i);
  return d;
}

DenseMatrix EntryOracle::submatrix(std::span<const Index> rows, std::span<const Index> cols) const {
  DenseMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < rows.size(); ++r)
      m(static_cast<Index>(r), static_cast<Index>(c)) = (*this)(rows[r], cols[c]);
  return m;
}

DenseMatrix EntryOracle::materialize() const {
  DenseMatrix m(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i <= j; ++i) m(i, j) = m(j, i) = eval(i, j);
  return m;
}

EntryOracle covariance_oracle(const KernelSpec& spec, const SpatialGrid& grid,
                              std::span<const double> theta) {
  spec.validate();
  const ParamPoint th(theta.begin(), theta.end());
  // Surface parameter errors now rather than on first access.
  kernel_value(spec, 0.0, th);
  return grid_distance_oracle(grid, [&](double d) { return kernel_value(spec, d, th); });
}

EntryOracle grid_distance_oracle(const SpatialGrid& grid, const std::function<double(double)>& f) {
  const Index n0 = grid.n0;
  const double h = grid.spacing();
  auto table = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n0 * n0));
  for (Index dy = 0; dy < n0; ++dy)
    for (Index dx = 0; dx < n0; ++dx)
      (*table)[static_cast<std::size_t>(dy * n0 + dx)] =
          grid.weight * f(h * std::hypot(static_cast<double>(dx), static_cast<double>(dy)));
  EntryOracle o;
  o.n = grid.size();
  o.eval = [table, n0](Index i, Index j) {
    const Index dx = std::abs(i % n0 - j % n0);
    const Index dy = std::abs(i / n0 - j / n0);
    return (*table)[static_cast<std::size_t>(dy * n0 + dx)];
  };
  o.fill_column = [table, n0](Index j, double* out) {
    const Index cx = j % n0, cy = j / n0;
    for (Index ry = 0; ry < n0; ++ry) {
      const double* row = table->data() + std::abs(ry - cy) * n0;
      double* dst = out + ry * n0;
      for (Index rx = 0; rx < cx; ++rx) dst[rx] = row[cx - rx];
      for (Index rx = cx; rx < n0; ++rx) dst[rx] = row[rx - cx];
    }
  };
  o.diag_hint = Vector::Constant(o.n, (*table)[0]);
  return o;
}

EntryOracle dense_oracle(DenseMatrix a) {
  if (a.rows() != a.cols()) throw Error(Errc::InvalidArgument, "dense_oracle: matrix is not square");
  auto m = std::make_shared<const DenseMatrix>(std::move(a));
  EntryOracle o;
  o.n = m->rows();
  o.eval = [m](Index i, Index j) { return (*m)(i, j); };
  o.fill_column = [m](Index j, double* out) { Eigen::Map<Vector>(out, m->rows()) = m->col(j); };
  o.diag_hint = m->diagonal();
  return o;
}

}  // namespace covaca
