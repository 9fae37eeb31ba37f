#include "covaca/separable.hpp"

#include <algorithm>
#include <cmath>

namespace covaca {

ParamBasis make_aca_basis(IsotropicKernel kernel, Vector pivot_d, Vector pivots, DenseMatrix coupling) {
  const Index s = pivot_d.size();
  if (pivots.size() != s || coupling.rows() != s || coupling.cols() != s)
    throw Error(Errc::InvalidArgument, "aca basis: inconsistent sizes");
  ParamBasis b;
  b.kind = ParamBasis::Kind::aca;
  b.kernel = std::move(kernel);
  b.points = std::move(pivot_d);
  b.pivots = std::move(pivots);
  b.matrix = coupling.triangularView<Eigen::StrictlyLower>();
  return b;
}

ParamBasis make_eim_basis(IsotropicKernel kernel, Vector nodes, DenseMatrix u_s) {
  const Index s = nodes.size();
  if (u_s.rows() != s || u_s.cols() != s)
    throw Error(Errc::InvalidArgument, "eim basis: inconsistent sizes");
  ParamBasis b;
  b.kind = ParamBasis::Kind::eim;
  b.kernel = std::move(kernel);
  b.points = std::move(nodes);
  b.matrix = std::move(u_s);
  b.lu = std::make_shared<const Eigen::PartialPivLU<DenseMatrix>>(b.matrix);
  return b;
}

Vector ParamBasis::evaluate(std::span<const double> theta) const {
  const Index s = size();
  Vector phi(s);
  if (kind == Kind::aca) {
    for (Index l = 0; l < s; ++l) {
      double r = kernel(points(l), theta);
      for (Index m = 0; m < l; ++m) r -= matrix(l, m) * phi(m);
      phi(l) = r / pivots(l);
    }
    return phi;
  }
  Vector c(s);
  for (Index i = 0; i < s; ++i) c(i) = kernel(points(i), theta);
  return lu->solve(c);
}

ParamBasis ParamBasis::truncated(Index s) const {
  if (s < 1 || s > size()) throw Error(Errc::InvalidArgument, "truncation out of range");
  if (kind == Kind::aca)
    return make_aca_basis(kernel, points.head(s), pivots.head(s), matrix.topLeftCorner(s, s));
  return make_eim_basis(kernel, points.head(s), matrix.topLeftCorner(s, s));
}

double SeparableExpansion::eval(double d, std::span<const double> theta) const {
  const Vector phi_t = phi.evaluate(theta);
  double sum = 0.0;
  for (Index j = 0; j < s(); ++j) sum += phi_t(j) * terms[static_cast<std::size_t>(j)](d);
  return sum;
}

SeparableExpansion SeparableExpansion::truncated(Index s_new) const {
  SeparableExpansion e;
  e.phi = phi.truncated(s_new);
  e.terms.assign(terms.begin(), terms.begin() + s_new);
  e.d_domain = d_domain;
  e.param_box = param_box;
  e.reported_error = s_new == s() ? reported_error : std::nan("");
  return e;
}

// ---------------------------------------------------------------------------

namespace {

// Linear argmax of |m| scanning row by row (d-major), lowest index on ties.
std::pair<Index, Index> abs_argmax_row_major(const DenseMatrix& m, double* value) {
  Index bi = 0, bj = 0;
  double best = -1.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = std::abs(m(i, j));
      if (v > best) {
        best = v;
        bi = i;
        bj = j;
      }
    }
  *value = best;
  return {bi, bj};
}

}  // namespace

FunctionAcaResult function_aca_1dparam(const IsotropicKernel& kernel, std::array<double, 2> d_domain,
                                       std::array<double, 2> theta_interval, Index s_max, double tol,
                                       const FunctionAcaOptions& options) {
  if (s_max < 1) throw Error(Errc::InvalidArgument, "s_max must be at least 1");
  if (!(tol >= 0.0)) throw Error(Errc::InvalidArgument, "tol must be nonnegative");
  const Vector d = chebyshev_lobatto_nodes(options.n_d, d_domain[0], d_domain[1]);
  const Vector t = chebyshev_lobatto_nodes(options.n_theta, theta_interval[0], theta_interval[1]);

  DenseMatrix res(d.size(), t.size());
  for (Index j = 0; j < t.size(); ++j) {
    const double th = t(j);
    for (Index i = 0; i < d.size(); ++i) res(i, j) = kernel(d(i), std::span<const double>(&th, 1));
  }
  if (!res.allFinite()) throw Error(Errc::DomainError, "kernel is not finite on the grid");

  FunctionAcaResult out;
  double cur = 0.0;
  abs_argmax_row_major(res, &cur);
  const double initial = cur;
  if (!(initial > 0.0)) throw Error(Errc::PivotVanished, "kernel vanishes on the grid");
  out.max_residual.push_back(cur);

  std::vector<Vector> cols;
  std::vector<Index> pivot_rows;
  std::vector<double> pivot_vals;
  while (cur > tol && static_cast<Index>(cols.size()) < s_max && cur > 1e-15 * initial) {
    double v = 0.0;
    const auto [pi, pj] = abs_argmax_row_major(res, &v);
    const double p = res(pi, pj);
    Vector a = res.col(pj);
    const Eigen::RowVectorXd b = res.row(pi) / p;
    res.noalias() -= a * b;
    cols.push_back(std::move(a));
    pivot_rows.push_back(pi);
    pivot_vals.push_back(p);
    out.pivot_theta.push_back(t(pj));
    abs_argmax_row_major(res, &cur);
    out.max_residual.push_back(cur);
  }

  const Index s = static_cast<Index>(cols.size());
  Vector pivot_d(s), pivots(s);
  DenseMatrix coupling = DenseMatrix::Zero(s, s);
  for (Index l = 0; l < s; ++l) {
    pivot_d(l) = d(pivot_rows[static_cast<std::size_t>(l)]);
    pivots(l) = pivot_vals[static_cast<std::size_t>(l)];
    for (Index m = 0; m < l; ++m)
      coupling(l, m) = cols[static_cast<std::size_t>(m)](pivot_rows[static_cast<std::size_t>(l)]);
  }

  SeparableExpansion& e = out.expansion;
  for (auto& c : cols) e.terms.emplace_back(d_domain[0], d_domain[1], std::move(c));
  e.phi = make_aca_basis(kernel, std::move(pivot_d), std::move(pivots), std::move(coupling));
  e.d_domain = d_domain;
  e.param_box = ParamBox{{theta_interval[0]}, {theta_interval[1]}};
  e.reported_error = cur;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Index> eim_node_selection(std::span<const Func1D> basis) {
  if (basis.empty()) throw Error(Errc::InvalidArgument, "eim_node_selection: empty basis");
  const Index nd = basis[0].size();
  for (const auto& f : basis)
    if (f.size() != nd || f.lo() != basis[0].lo() || f.hi() != basis[0].hi())
      throw Error(Errc::InvalidArgument, "eim_node_selection: basis functions must share a grid");
  const Index s = static_cast<Index>(basis.size());
  DenseMatrix u(nd, s);
  for (Index j = 0; j < s; ++j) u.col(j) = basis[static_cast<std::size_t>(j)].values();

  auto argmax_abs = [](const Vector& v, double* value) {
    Index best = 0;
    double b = -1.0;
    for (Index i = 0; i < v.size(); ++i)
      if (std::abs(v(i)) > b) {
        b = std::abs(v(i));
        best = i;
      }
    *value = b;
    return best;
  };

  std::vector<Index> nodes;
  for (Index j = 0; j < s; ++j) {
    Vector r = u.col(j);
    const double scale = r.cwiseAbs().maxCoeff();
    if (j > 0) {
      DenseMatrix block(j, j);
      Vector rhs(j);
      for (Index a = 0; a < j; ++a) {
        block.row(a) = u.row(nodes[static_cast<std::size_t>(a)]).head(j);
        rhs(a) = u(nodes[static_cast<std::size_t>(a)], j);
      }
      const Vector coef = Eigen::PartialPivLU<DenseMatrix>(block).solve(rhs);
      r -= u.leftCols(j) * coef;
    }
    double peak = 0.0;
    const Index node = argmax_abs(r, &peak);
    if (!(peak > 1e-13 * scale) || scale == 0.0)
      throw Error(Errc::SingularInterpolationMatrix,
                  "basis function " + std::to_string(j + 1) + " is dependent at the selected nodes");
    nodes.push_back(node);
  }
  return nodes;
}

std::vector<ParamPoint> equispaced_grid(const ParamBox& box, Index count) {
  if (count < 1) throw Error(Errc::InvalidArgument, "grid count must be positive");
  const std::size_t dim = box.dim();
  std::vector<std::vector<double>> axes(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    for (Index i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
      axes[a].push_back(i == count - 1 && count > 1 ? box.upper[a]
                                                    : box.lower[a] + t * (box.upper[a] - box.lower[a]));
    }
  }
  std::vector<ParamPoint> out;
  std::vector<Index> idx(dim, 0);
  while (true) {
    ParamPoint p(dim);
    for (std::size_t a = 0; a < dim; ++a) p[a] = axes[a][static_cast<std::size_t>(idx[a])];
    out.push_back(std::move(p));
    std::size_t a = 0;
    while (a < dim && ++idx[a] == count) idx[a++] = 0;
    if (a == dim) break;
  }
  return out;
}

EimResult eim(const IsotropicKernel& kernel, std::array<double, 2> d_domain, const ParamBox& box,
              Index r_samples, double tau, const EimOptions& options) {
  if (r_samples < 1) throw Error(Errc::InvalidArgument, "r_samples must be positive");
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  box.validate();
  const std::size_t dim = box.dim();
  Index per_axis = r_samples;
  while (per_axis > 1 && std::pow(static_cast<double>(per_axis), static_cast<double>(dim)) >
                             static_cast<double>(options.max_snapshots))
    --per_axis;

  EimResult out;
  out.snapshots = equispaced_grid(box, per_axis);
  const Index r = static_cast<Index>(out.snapshots.size());
  const Vector d = chebyshev_lobatto_nodes(options.n_d, d_domain[0], d_domain[1]);
  const Vector w = clenshaw_curtis_weights(options.n_d, d_domain[0], d_domain[1]);
  const Vector sqrt_w = w.cwiseSqrt();

  DenseMatrix f(d.size(), r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < d.size(); ++i) f(i, j) = kernel(d(i), out.snapshots[static_cast<std::size_t>(j)]);
  if (!f.allFinite()) throw Error(Errc::DomainError, "kernel is not finite on the snapshot grid");

  const ThinSvd svd = thin_svd(sqrt_w.asDiagonal() * f);
  out.singular_values = svd.sigma;
  const double tau_abs = options.relative_tau ? tau * svd.sigma(0) : tau;
  if (!(svd.sigma(0) > tau_abs)) throw Error(Errc::TruncationEmpty, "all singular values below tau");
  Index s = 0;
  while (s < svd.sigma.size() && svd.sigma(s) > tau_abs) ++s;

  for (Index j = 0; j < s; ++j)
    out.basis.emplace_back(d_domain[0], d_domain[1], svd.u.col(j).cwiseQuotient(sqrt_w));
  out.node_indices = eim_node_selection(out.basis);

  Vector nodes(s);
  DenseMatrix u_s(s, s);
  for (Index i = 0; i < s; ++i) {
    const Index ni = out.node_indices[static_cast<std::size_t>(i)];
    nodes(i) = d(ni);
    for (Index j = 0; j < s; ++j) u_s(i, j) = out.basis[static_cast<std::size_t>(j)].values()(ni);
  }

  SeparableExpansion& e = out.expansion;
  e.terms = out.basis;
  e.phi = make_eim_basis(kernel, std::move(nodes), std::move(u_s));
  e.d_domain = d_domain;
  e.param_box = box;

  // Interpolation error over the snapshots on the Chebyshev grid.
  DenseMatrix u(d.size(), s);
  for (Index j = 0; j < s; ++j) u.col(j) = out.basis[static_cast<std::size_t>(j)].values();
  double err = 0.0;
  for (Index j = 0; j < r; ++j) {
    const Vector phi = e.phi.evaluate(out.snapshots[static_cast<std::size_t>(j)]);
    err = std::max(err, (f.col(j) - u * phi).cwiseAbs().maxCoeff());
  }
  e.reported_error = err;
  return out;
}

// ---------------------------------------------------------------------------

double expansion_error(const SeparableExpansion& exp, const IsotropicKernel& kernel, Index d_probe,
                       Index theta_probe) {
  if (d_probe < 2 || theta_probe < 2) throw Error(Errc::InvalidArgument, "probe counts must be >= 2");
  const Index s = exp.s();
  const double lo = exp.d_domain[0], hi = exp.d_domain[1];
  Vector dv(d_probe);
  DenseMatrix a(d_probe, s);
  for (Index i = 0; i < d_probe; ++i) {
    dv(i) = i == d_probe - 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(d_probe - 1);
    for (Index j = 0; j < s; ++j) a(i, j) = exp.terms[static_cast<std::size_t>(j)](dv(i));
  }
  double err = 0.0;
  for (const ParamPoint& th : equispaced_grid(exp.param_box, theta_probe)) {
    const Vector approx = a * exp.phi.evaluate(th);
    for (Index i = 0; i < d_probe; ++i) err = std::max(err, std::abs(kernel(dv(i), th) - approx(i)));
  }
  return err;
}

AffineFamily affine_family_from_expansion(const SeparableExpansion& exp, const SpatialGrid& grid) {
  const double dmax = grid.max_distance();
  if (exp.d_domain[0] > 0.0 || dmax > exp.d_domain[1] * (1.0 + 1e-12))
    throw Error(Errc::DomainMismatch, "grid distances [0, " + std::to_string(dmax) +
                                          "] exceed the expansion domain");
  AffineFamily fam;
  fam.n = grid.size();
  for (const Func1D& a : exp.terms) {
    EntryOracle o = grid_distance_oracle(grid, [&a](double r) { return a(r); });
    fam.traces.push_back(o.diag_hint->sum());
    fam.terms.push_back(std::move(o));
  }
  ParamBasis phi = exp.phi;
  fam.coeffs = [phi](std::span<const double> theta) { return phi.evaluate(theta); };
  fam.param_box = exp.param_box;
  return fam;
}

}  // namespace covaca
