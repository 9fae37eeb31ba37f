#include "covaca/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>

#include "covaca/csv.hpp"
#include "covaca/parallel.hpp"

namespace covaca {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr std::array<double, 2> kDistanceDomain{0.0, std::numbers::sqrt2};

std::ofstream open_output(const ExperimentConfig& cfg, const char* name) {
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = std::filesystem::path(cfg.output_dir) / name;
  std::ofstream os(path);
  if (!os) throw Error(Errc::InvalidArgument, "cannot write " + path.string());
  return os;
}

bool writes_files(const ExperimentConfig& cfg) { return !cfg.output_dir.empty(); }

std::vector<std::string> theta_header(std::size_t dim) {
  std::vector<std::string> h;
  for (std::size_t a = 0; a < dim; ++a) h.push_back("theta_" + std::to_string(a + 1));
  return h;
}

std::vector<std::string> theta_fields(const ParamPoint& th) {
  std::vector<std::string> f;
  for (double t : th) f.push_back(format_double(t));
  return f;
}

Index per_axis_count(std::size_t dim, Index total) {
  if (dim <= 1) return total;
  return static_cast<Index>(std::ceil(std::pow(static_cast<double>(total), 1.0 / static_cast<double>(dim))));
}

// Least-squares line through (1, y_1), ..., (u, y_u).
std::pair<double, double> fit_line(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i + 1);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

// Evenly strided coordinates, at most `limit` of them.
std::vector<Index> coordinate_subset(Index n, Index limit) {
  std::vector<Index> idx;
  const Index stride = std::max<Index>(1, (n + limit - 1) / limit);
  for (Index i = 0; i < n; i += stride) idx.push_back(i);
  return idx;
}

DenseMatrix rows_of(const DenseMatrix& m, const std::vector<Index>& rows) {
  DenseMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = m.row(rows[r]);
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  kernel.validate();
  theta_box.validate();
  if (theta_box.dim() != static_cast<std::size_t>(kernel.theta_dim))
    throw Error(Errc::InvalidArgument, "parameter box dimension does not match the kernel");
  if (!(tol > 0.0)) throw Error(Errc::InvalidArgument, "tol must be positive");
  if (n0 < 2) throw Error(Errc::InvalidArgument, "n0 must be at least 2");
  if (m < 1) throw Error(Errc::InvalidArgument, "m must be at least 1");
  if (s_max < 1) throw Error(Errc::InvalidArgument, "s_max must be at least 1");
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  if (threads < 1) throw Error(Errc::InvalidArgument, "threads must be at least 1");
  if (r_samples < 1 || u_max < 1 || cov_samples < 1 || eig_count < 1 || eig_thetas < 1 || certify_thetas < 1)
    throw Error(Errc::InvalidArgument, "counts must be at least 1");
  if (!(tsvd_tol >= 0.0)) throw Error(Errc::InvalidArgument, "tsvd_tol must be nonnegative");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || !std::isfinite(x)) throw Error(Errc::ParseError, key + ": not a number: " + v);
  return x;
}

long long to_integer(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw Error(Errc::ParseError, key + ": not an integer: " + v);
  return x;
}

std::vector<double> to_reals(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) out.push_back(to_real(key, trim(item)));
  if (out.empty()) throw Error(Errc::ParseError, key + ": empty list");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw Error(Errc::ParseError, key + ": not a boolean: " + v);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "kernel",    "nu",          "sigma2",  "theta_lo",  "theta_hi",   "n0",        "m",
      "tol",       "s_max",       "tau",     "r_samples", "k_max",      "seed",      "output_dir",
      "threads",   "full",        "spacing", "u_max",     "cov_samples", "eig_count", "eig_thetas",
      "tsvd_tol",  "certify_thetas"};
  return keys;
}

std::map<std::string, std::string> parse_config(std::istream& is) {
  std::map<std::string, std::string> out;
  const auto& keys = config_keys();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": unknown key " + key);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

ExperimentConfig config_from_settings(const std::map<std::string, std::string>& settings) {
  const auto& keys = config_keys();
  for (const auto& [k, v] : settings)
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw Error(Errc::ParseError, "unknown key " + k);
  auto get = [&](const char* k) -> const std::string* {
    const auto it = settings.find(k);
    return it == settings.end() ? nullptr : &it->second;
  };

  ExperimentConfig cfg;
  const double sigma2 = get("sigma2") ? to_real("sigma2", *get("sigma2")) : 1.0;
  const std::string family = get("kernel") ? *get("kernel") : "gaussian";
  if (family == "gaussian") {
    if (get("nu")) throw Error(Errc::ParseError, "nu: only meaningful for the matern kernel");
    cfg.kernel = KernelSpec::gaussian(sigma2);
    cfg.theta_box = ParamBox{{0.1}, {std::numbers::sqrt2}};
  } else if (family == "matern") {
    if (get("nu")) {
      cfg.kernel = KernelSpec::matern_fixed(to_real("nu", *get("nu")), sigma2);
      cfg.theta_box = ParamBox{{0.1}, {std::numbers::sqrt2}};
    } else {
      cfg.kernel = KernelSpec::matern_free(sigma2);
      cfg.theta_box = ParamBox{{0.1, 2.5}, {std::numbers::sqrt2, 7.5}};
    }
  } else {
    throw Error(Errc::ParseError, "kernel: expected gaussian or matern, got " + family);
  }
  if (get("theta_lo")) cfg.theta_box.lower = to_reals("theta_lo", *get("theta_lo"));
  if (get("theta_hi")) cfg.theta_box.upper = to_reals("theta_hi", *get("theta_hi"));

  if (auto v = get("n0")) cfg.n0 = to_integer("n0", *v);
  if (auto v = get("m")) cfg.m = to_integer("m", *v);
  if (auto v = get("tol")) cfg.tol = to_real("tol", *v);
  if (auto v = get("s_max")) cfg.s_max = to_integer("s_max", *v);
  if (auto v = get("tau")) cfg.tau = to_real("tau", *v);
  if (auto v = get("r_samples")) cfg.r_samples = to_integer("r_samples", *v);
  if (auto v = get("k_max")) cfg.k_max = to_integer("k_max", *v);
  if (auto v = get("seed")) {
    const long long x = to_integer("seed", *v);
    if (x < 0) throw Error(Errc::ParseError, "seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(x);
  }
  if (auto v = get("output_dir")) cfg.output_dir = *v;
  if (auto v = get("threads")) cfg.threads = static_cast<int>(to_integer("threads", *v));
  if (auto v = get("full")) cfg.full = to_bool("full", *v);
  if (auto v = get("spacing")) {
    if (*v == "cell_centre") cfg.spacing = GridSpacing::cell_centre;
    else if (*v == "n0_plus_1") cfg.spacing = GridSpacing::scaled_by_n0_plus_1;
    else throw Error(Errc::ParseError, "spacing: expected cell_centre or n0_plus_1, got " + *v);
  }
  if (auto v = get("u_max")) cfg.u_max = to_integer("u_max", *v);
  if (auto v = get("cov_samples")) cfg.cov_samples = to_integer("cov_samples", *v);
  if (auto v = get("eig_count")) cfg.eig_count = to_integer("eig_count", *v);
  if (auto v = get("eig_thetas")) cfg.eig_thetas = to_integer("eig_thetas", *v);
  if (auto v = get("tsvd_tol")) cfg.tsvd_tol = to_real("tsvd_tol", *v);
  if (auto v = get("certify_thetas")) cfg.certify_thetas = to_integer("certify_thetas", *v);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return cfg;
}

SeparableExpansion linearize(const ExperimentConfig& cfg) {
  const IsotropicKernel kernel = kernel_function(cfg.kernel);
  if (cfg.kernel.theta_dim == 1)
    return function_aca_1dparam(kernel, kDistanceDomain, {cfg.theta_box.lower[0], cfg.theta_box.upper[0]},
                                cfg.s_max, 0.0)
        .expansion;
  return eim(kernel, kDistanceDomain, cfg.theta_box, cfg.r_samples, cfg.tau).expansion;
}

AffineFamily build_family(const ExperimentConfig& cfg, const SeparableExpansion& exp) {
  const SpatialGrid grid = make_grid(cfg.n0, cfg.spacing);
  AffineFamily fam = affine_family_from_expansion(exp, grid);
  const KernelSpec spec = cfg.kernel;
  fam.true_oracle = [spec, grid](std::span<const double> theta) { return covariance_oracle(spec, grid, theta); };
  return fam;
}

std::vector<ParamPoint> theta_set(const ExperimentConfig& cfg) {
  return equispaced_grid(cfg.theta_box, per_axis_count(cfg.theta_box.dim(), cfg.m));
}

// ---------------------------------------------------------------------------

LinearizeOutput run_linearize(const ExperimentConfig& cfg) {
  cfg.validate();
  LinearizeOutput out;
  out.expansion = linearize(cfg);
  const IsotropicKernel kernel = kernel_function(cfg.kernel);
  for (Index s = 1; s <= out.expansion.s(); ++s)
    out.error_by_s.emplace_back(s, expansion_error(out.expansion.truncated(s), kernel, 500, 8));
  if (writes_files(cfg)) {
    std::filesystem::create_directories(cfg.output_dir);
    write_expansion_file((std::filesystem::path(cfg.output_dir) / files::expansion).string(), out.expansion,
                         cfg.kernel);
    auto os = open_output(cfg, files::linearize_error);
    write_csv_row(os, std::vector<std::string>{"s", "max_error"});
    for (const auto& [s, e] : out.error_by_s) write_csv_row(os, {std::to_string(s), format_double(e)});
  }
  return out;
}

ParamAcaOutput run_param_aca(const ExperimentConfig& cfg, const SeparableExpansion& exp) {
  cfg.validate();
  const AffineFamily fam = build_family(cfg, exp);
  ParamAcaOptions opt;
  opt.threads = cfg.threads;
  ParamAcaOutput out;
  const auto t0 = Clock::now();
  out.result = param_aca(fam, theta_set(cfg), cfg.tol, cfg.k_max, opt);
  out.seconds = seconds_since(t0);
  if (writes_files(cfg)) {
    auto os = open_output(cfg, files::param_aca_trace);
    os << out.result.trace.to_csv(cfg.theta_box.dim());
    write_index_set((std::filesystem::path(cfg.output_dir) / files::index_set).string(), out.result.index_set);
  }
  return out;
}

SampleBenchOutput run_sample_bench(const ExperimentConfig& cfg, const SeparableExpansion& exp,
                                   const IndexSet& index_set) {
  cfg.validate();
  const AffineFamily fam = build_family(cfg, exp);
  const SpatialGrid grid = make_grid(cfg.n0, cfg.spacing);
  const Index n = grid.size();
  const std::vector<ParamPoint> params = uniform_parameters(cfg.theta_box, cfg.u_max, {cfg.seed, 0});
  SampleBenchOutput out;

  // Offline phase of the parameter-dependent path.
  ParamAcaOptions opt;
  opt.threads = cfg.threads;
  auto t0 = Clock::now();
  ApproxGaussian g = offline(fam, theta_set(cfg), cfg.tol, cfg.k_max, opt, OnlineSource::true_kernel);
  out.offline_seconds = seconds_since(t0);
  out.rank_param = g.k();
  if (index_set.size() > 0 && index_set.indices != g.index_set().indices)
    throw Error(Errc::InvalidArgument, "index set file does not match the offline phase for this configuration");
  g.max_cache_entries = 1;

  double plain = 0.0, param = out.offline_seconds;
  for (Index u = 0; u < cfg.u_max; ++u) {
    const ParamPoint& th = params[static_cast<std::size_t>(u)];
    const RngSeed rng{cfg.seed, static_cast<std::uint64_t>(u + 1)};

    t0 = Clock::now();
    {
      const AcaResult r = aca_spsd(covariance_oracle(cfg.kernel, grid, th), cfg.tol, cfg.k_max);
      NormalStream normals(rng);
      Vector x = Vector::Zero(n);
      for (const Vector& f : r.factors) x += normals.next() * f;
      if (!x.allFinite()) throw Error(Errc::NoConvergence, "plain sample is not finite");
    }
    plain += seconds_since(t0);
    out.time_plain.push_back(plain);

    t0 = Clock::now();
    {
      const DenseMatrix x = sample(g, th, rng, 1);
      if (!x.allFinite()) throw Error(Errc::NoConvergence, "parameter-dependent sample is not finite");
    }
    param += seconds_since(t0);
    out.time_param.push_back(param);
  }
  std::tie(out.slope_plain, std::ignore) = fit_line(out.time_plain);
  std::tie(out.slope_param, out.intercept_param) = fit_line(out.time_param);
  out.crossover_u = out.slope_plain > out.slope_param
                        ? out.intercept_param / (out.slope_plain - out.slope_param)
                        : std::numeric_limits<double>::infinity();

  // Distribution check at the centre of the box on a strided coordinate subset.
  ParamPoint mid(cfg.theta_box.dim());
  for (std::size_t a = 0; a < mid.size(); ++a) mid[a] = 0.5 * (cfg.theta_box.lower[a] + cfg.theta_box.upper[a]);
  const std::vector<Index> sub = coordinate_subset(n, 256);
  const Index batch = 1000;
  const Index batches = (cfg.cov_samples + batch - 1) / batch;
  {
    const AcaResult r = aca_spsd(covariance_oracle(cfg.kernel, grid, mid), cfg.tol, cfg.k_max);
    DenseMatrix u_sub(static_cast<Index>(sub.size()), static_cast<Index>(r.factors.size()));
    for (std::size_t l = 0; l < r.factors.size(); ++l)
      for (std::size_t i = 0; i < sub.size(); ++i) u_sub(static_cast<Index>(i), static_cast<Index>(l)) = r.factors[l](sub[i]);
    DenseMatrix acc = DenseMatrix::Zero(u_sub.rows(), u_sub.rows());
    for (Index b = 0; b < batches; ++b) {
      NormalStream normals({cfg.seed ^ 0x5A5A5A5AULL, static_cast<std::uint64_t>(b)});
      DenseMatrix xi(u_sub.cols(), batch);
      for (Index c = 0; c < batch; ++c)
        for (Index l = 0; l < xi.rows(); ++l) xi(l, c) = normals.next();
      const DenseMatrix x = u_sub * xi;
      acc.noalias() += x * x.transpose();
    }
    acc /= static_cast<double>(batches * batch);
    const DenseMatrix target = u_sub * u_sub.transpose();
    out.cov_error_plain = (acc - target).norm() / target.norm();
  }
  {
    DenseMatrix acc = DenseMatrix::Zero(static_cast<Index>(sub.size()), static_cast<Index>(sub.size()));
    for (Index b = 0; b < batches; ++b) {
      const DenseMatrix x = rows_of(sample(g, mid, {cfg.seed ^ 0xA5A5A5A5ULL, static_cast<std::uint64_t>(b)}, batch), sub);
      acc.noalias() += x * x.transpose();
    }
    acc /= static_cast<double>(batches * batch);
    const DenseMatrix full = g.covariance(mid);
    DenseMatrix target(acc.rows(), acc.cols());
    for (std::size_t i = 0; i < sub.size(); ++i)
      for (std::size_t j = 0; j < sub.size(); ++j)
        target(static_cast<Index>(i), static_cast<Index>(j)) = full(sub[i], sub[j]);
    out.cov_error_param = (acc - target).norm() / target.norm();
  }

  if (writes_files(cfg)) {
    auto os = open_output(cfg, files::sample_bench);
    write_csv_row(os, std::vector<std::string>{"u", "time_plain_aca", "time_param_aca"});
    for (std::size_t u = 0; u < out.time_plain.size(); ++u)
      write_csv_row(os, {std::to_string(u + 1), format_double(out.time_plain[u]), format_double(out.time_param[u])});
  }
  return out;
}

EigDecayOutput run_eig_decay(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.n0 > 128) throw Error(Errc::RefusesLargeN, "eig-decay materializes C(theta); n0 must be <= 128");
  const SpatialGrid grid = make_grid(cfg.n0, cfg.spacing);
  EigDecayOutput out;
  std::vector<ParamPoint> params = equispaced_grid(cfg.theta_box, per_axis_count(cfg.theta_box.dim(), cfg.eig_thetas));
  std::ofstream os;
  if (writes_files(cfg)) {
    os = open_output(cfg, files::eig_decay);
    auto h = theta_header(cfg.theta_box.dim());
    h.push_back("index");
    h.push_back("eigenvalue");
    write_csv_row(os, h);
  }
  for (const ParamPoint& th : params) {
    const DenseMatrix c = covariance_oracle(cfg.kernel, grid, th).materialize();
    const Vector lam = sym_eigenvalues(c);
    const Index keep = std::min<Index>(cfg.eig_count, lam.size());
    out.thetas.push_back(th[0]);
    out.eigenvalues.push_back(lam.head(keep));
    out.traces.push_back(lam.sum());
    if (os.is_open())
      for (Index i = 0; i < keep; ++i) {
        auto row = theta_fields(th);
        row.push_back(std::to_string(i + 1));
        row.push_back(format_double(lam(i)));
        write_csv_row(os, row);
      }
  }
  return out;
}

namespace {

// Columns x_l of A(:,I) R^{-1} for the leading-prefix Cholesky of A(I,I), so
// that sum_{l<k} x_l x_l^T is the cross approximation on the first k indices.
// An index whose Schur pivot is at rounding level contributes a zero column.
DenseMatrix prefix_cross_columns(const DenseMatrix& a, const std::vector<Index>& indices) {
  const Index n = a.rows();
  const Index k = static_cast<Index>(indices.size());
  DenseMatrix x = DenseMatrix::Zero(n, k);
  double max_diag = 0.0;
  for (Index l = 0; l < k; ++l) {
    const Index i = indices[static_cast<std::size_t>(l)];
    max_diag = std::max(max_diag, a(i, i));
    Vector col = a.col(i);
    if (l > 0) col.noalias() -= x.leftCols(l) * x.row(i).head(l).transpose();
    const double p = col(i);
    if (p > 1e-14 * max_diag) x.col(l) = col / std::sqrt(p);
  }
  return x;
}

double nuclear_norm_sym(const DenseMatrix& e) { return sym_eigenvalues(e).cwiseAbs().sum(); }

}  // namespace

std::vector<TsvdRow> run_tsvd_compare(const ExperimentConfig& cfg, const SeparableExpansion& exp) {
  cfg.validate();
  if (cfg.n0 > 24) throw Error(Errc::RefusesLargeN, "tsvd-compare needs dense spectra; n0 must be <= 24");
  const AffineFamily fam = build_family(cfg, exp);
  const std::vector<ParamPoint> params = theta_set(cfg);
  const std::size_t m = params.size();
  ParamAcaOptions opt;
  opt.threads = cfg.threads;
  const ParamAcaResult res = param_aca(fam, params, cfg.tsvd_tol, cfg.k_max, opt);
  const std::vector<Index>& indices = res.index_set.indices;
  const Index k_final = res.index_set.size();
  const Index n = fam.n;

  // Per theta: truncated SVD tails, the cross columns of the linearized matrix,
  // trace(C - C_sI) for every k, and the negative part of C - A.
  std::vector<DenseMatrix> x(m);
  std::vector<Vector> tsvd(m), trace_err(m);
  std::vector<double> neg_delta(m), trace_c(m);
  parallel_for(static_cast<long long>(m), cfg.threads, [&](long long b, long long e) {
    for (long long t = b; t < e; ++t) {
      const std::size_t u = static_cast<std::size_t>(t);
      const DenseMatrix c = fam.true_oracle(params[u]).materialize();
      const DenseMatrix a = fam.at(params[u]).materialize();
      const Vector lam = sym_eigenvalues(c);
      trace_c[u] = c.trace();
      tsvd[u].resize(k_final + 1);
      for (Index k = 0; k <= k_final; ++k) tsvd[u](k) = std::max(0.0, lam.tail(n - k).sum());
      x[u] = prefix_cross_columns(a, indices);
      trace_err[u].resize(k_final + 1);
      trace_err[u](0) = trace_c[u];
      for (Index k = 1; k <= k_final; ++k) trace_err[u](k) = trace_err[u](k - 1) - x[u].col(k - 1).squaredNorm();
      const Vector ld = sym_eigenvalues(symmetrize(c - a));
      neg_delta[u] = -ld.cwiseMin(0.0).sum();
    }
  });

  // max over theta of ||C - C_sI||_*. With E = (A - A_I) + (C - A) and A - A_I
  // SPSD up to rounding, trace(E) <= ||E||_* <= trace(E) + 2 ||(C - A)_-||_* + slack,
  // so only parameters whose upper bound beats the running maximum need an
  // eigenvalue solve.
  struct Cached {
    DenseMatrix e;
    Index k = 0;
  };
  std::map<std::size_t, Cached> cache;
  auto residual_matrix = [&](std::size_t u, Index k) -> const DenseMatrix& {
    auto it = cache.find(u);
    if (it == cache.end() || it->second.k > k) {
      if (cache.size() >= 16) cache.erase(cache.begin());
      it = cache.insert_or_assign(u, Cached{fam.true_oracle(params[u]).materialize(), 0}).first;
    }
    Cached& ce = it->second;
    for (; ce.k < k; ++ce.k) ce.e.noalias() -= x[u].col(ce.k) * x[u].col(ce.k).transpose();
    return ce.e;
  };

  std::vector<TsvdRow> rows(static_cast<std::size_t>(k_final + 1));
  std::vector<std::size_t> order(m);
  for (Index k = 0; k <= k_final; ++k) {
    TsvdRow& row = rows[static_cast<std::size_t>(k)];
    row.k = k;
    row.aca_trace_error = res.trace.steps[static_cast<std::size_t>(k)].trace_residual;
    std::vector<double> upper(m);
    double best = 0.0;
    for (std::size_t u = 0; u < m; ++u) {
      row.tsvd_trace_error = std::max(row.tsvd_trace_error, tsvd[u](k));
      best = std::max(best, trace_err[u](k));
      upper[u] = trace_err[u](k) + 2.0 * neg_delta[u] + 1e-10 * std::abs(trace_c[u]);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return upper[p] > upper[q]; });
    for (std::size_t u : order) {
      if (upper[u] <= best) break;
      best = std::max(best, nuclear_norm_sym(symmetrize(residual_matrix(u, k))));
    }
    row.nuclear_error = best;
  }

  if (writes_files(cfg)) {
    auto os = open_output(cfg, files::tsvd_compare);
    write_csv_row(os, std::vector<std::string>{"k", "aca_trace_error", "nuclear_error", "tsvd_trace_error"});
    for (const TsvdRow& r : rows)
      write_csv_row(os, {std::to_string(r.k), format_double(r.aca_trace_error), format_double(r.nuclear_error),
                         format_double(r.tsvd_trace_error)});
  }
  return rows;
}

std::vector<CertifyRow> run_certify(const ExperimentConfig& cfg, const SeparableExpansion& exp,
                                    const IndexSet& index_set) {
  cfg.validate();
  const AffineFamily fam = build_family(cfg, exp);
  const ApproxGaussian g(fam, index_set, OnlineSource::true_kernel);
  std::vector<CertifyRow> rows;
  for (const ParamPoint& th :
       equispaced_grid(cfg.theta_box, per_axis_count(cfg.theta_box.dim(), cfg.certify_thetas)))
    rows.push_back({th, certify_online(g, th)});
  if (writes_files(cfg)) {
    auto os = open_output(cfg, files::certify);
    auto h = theta_header(cfg.theta_box.dim());
    h.push_back("bound");
    write_csv_row(os, h);
    for (const CertifyRow& r : rows) {
      auto row = theta_fields(r.theta);
      row.push_back(format_double(r.bound));
      write_csv_row(os, row);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------

void write_index_set(const std::string& path, const IndexSet& set) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::InvalidArgument, "cannot write " + path);
  for (Index i : set.indices) os << i << '\n';
}

IndexSet read_index_set(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::InvalidArgument, "cannot read " + path);
  IndexSet set;
  Index i = 0;
  while (is >> i) set.indices.push_back(i);
  if (!is.eof()) throw Error(Errc::ParseError, "bad index in " + path);
  return set;
}

void write_expansion_file(const std::string& path, const SeparableExpansion& exp, const KernelSpec& spec) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::InvalidArgument, "cannot write " + path);
  write_expansion(os, exp, spec);
}

SeparableExpansion read_expansion_file(const std::string& path, KernelSpec* spec) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::InvalidArgument, "cannot read " + path);
  return read_expansion(is, spec);
}

}  // namespace covaca
