#include "covaca/sampling.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

#include "covaca/csv.hpp"

namespace covaca {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double to_unit_open(std::uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// Ordered Cholesky of the pivot block that drops indices whose Schur pivot is
// at rounding level. Strictly negative pivots beyond rounding mean an
// indefinite block.
TriangularFactor dropping_cholesky(const DenseMatrix& block, std::vector<Index>& kept) {
  const Index k = block.rows();
  const double max_diag = std::max(block.diagonal().maxCoeff(), 0.0);
  DenseMatrix r = DenseMatrix::Zero(k, k);
  Index m = 0;
  kept.clear();
  for (Index j = 0; j < k; ++j) {
    Vector c(m);
    for (Index i = 0; i < m; ++i)
      c(i) = (block(kept[static_cast<std::size_t>(i)], j) - r.col(i).head(i).dot(c.head(i))) / r(i, i);
    const double pivot = block(j, j) - c.squaredNorm();
    if (pivot < -1e-10 * max_diag)
      throw Error(Errc::CholeskyFailure, "pivot block indefinite: pivot " + std::to_string(pivot));
    if (!(pivot > 1e-14 * max_diag)) continue;
    r.col(m).head(m) = c;
    r(m, m) = std::sqrt(pivot);
    kept.push_back(j);
    ++m;
  }
  return {r.topLeftCorner(m, m), TriangleShape::upper};
}

}  // namespace

NormalStream::NormalStream(RngSeed seed)
    : key_(splitmix64(seed.seed) ^ splitmix64(seed.stream ^ 0xD1B54A32D192ED03ULL)) {}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = to_unit_open(splitmix64(key_ + 2 * counter_));
  const double u2 = to_unit_open(splitmix64(key_ + 2 * counter_ + 1));
  ++counter_;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::vector<ParamPoint> uniform_parameters(const ParamBox& box, Index count, RngSeed rng) {
  const std::uint64_t key = splitmix64(rng.seed) ^ splitmix64(rng.stream ^ 0x8CB92BA72F3D8DD7ULL);
  std::vector<ParamPoint> out;
  std::uint64_t c = 0;
  for (Index i = 0; i < count; ++i) {
    ParamPoint p(box.dim());
    for (std::size_t a = 0; a < box.dim(); ++a)
      p[a] = box.lower[a] + (box.upper[a] - box.lower[a]) * to_unit_open(splitmix64(key + c++));
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------

ApproxGaussian::ApproxGaussian(AffineFamily fam, IndexSet index_set, OnlineSource source)
    : fam_(std::move(fam)), index_set_(std::move(index_set)), source_(source) {
  for (Index i : index_set_.indices)
    if (i < 0 || i >= fam_.n) throw Error(Errc::InvalidArgument, "index out of range");
  if (source_ == OnlineSource::true_kernel && !fam_.has_true_oracle())
    throw Error(Errc::InvalidArgument, "true-kernel sampling needs a true oracle");
}

std::shared_ptr<const ApproxGaussian::Setup> ApproxGaussian::setup(std::span<const double> theta) const {
  std::vector<std::uint64_t> key;
  for (double t : theta) key.push_back(std::bit_cast<std::uint64_t>(t));
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    auto it = cache_->entries.find(key);
    if (it != cache_->entries.end()) return it->second;
  }
  const EntryOracle a = source_ == OnlineSource::true_kernel ? fam_.true_oracle(theta) : fam_.at(theta);
  auto st = std::make_shared<Setup>();
  try {
    CrossFactorization cross = build_cross(a, index_set_);
    st->cols = std::move(cross.cols);
    st->chol = std::move(cross.pivot_chol);
  } catch (const Error& e) {
    if (e.code() != Errc::CholeskyFailure) throw;
    const Index k = index_set_.size();
    DenseMatrix cols(a.n, k), block(k, k);
    for (Index l = 0; l < k; ++l) cols.col(l) = a.column(index_set_.indices[static_cast<std::size_t>(l)]);
    for (Index l = 0; l < k; ++l) block.row(l) = cols.row(index_set_.indices[static_cast<std::size_t>(l)]);
    st->chol = dropping_cholesky(symmetrize(block), st->kept);
    st->cols.resize(a.n, static_cast<Index>(st->kept.size()));
    for (std::size_t l = 0; l < st->kept.size(); ++l) st->cols.col(static_cast<Index>(l)) = cols.col(st->kept[l]);
  }
  std::lock_guard<std::mutex> lock(cache_->mutex);
  if (cache_->entries.size() >= max_cache_entries) cache_->entries.clear();
  cache_->entries.emplace(std::move(key), st);
  return st;
}

DenseMatrix ApproxGaussian::covariance(std::span<const double> theta) const {
  const auto st = setup(theta);
  const DenseMatrix x = st->chol.solve_right(st->cols);
  return x * x.transpose();
}

void ApproxGaussian::clear_cache() const {
  std::lock_guard<std::mutex> lock(cache_->mutex);
  cache_->entries.clear();
}

ApproxGaussian offline(const AffineFamily& fam, const std::vector<ParamPoint>& theta_set, double tol,
                       Index k_max, const ParamAcaOptions& options, std::optional<OnlineSource> source) {
  const auto t0 = std::chrono::steady_clock::now();
  ParamAcaResult res = param_aca(fam, theta_set, tol, k_max, options);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const OnlineSource src =
      source.value_or(fam.has_true_oracle() ? OnlineSource::true_kernel : OnlineSource::expansion);
  ApproxGaussian g(fam, res.index_set, src);
  g.counters = {res.entry_evaluations, res.flop_estimate, secs};
  g.offline_result = std::move(res);
  return g;
}

DenseMatrix sample(const ApproxGaussian& g, std::span<const double> theta, RngSeed rng, Index count) {
  if (count < 1) throw Error(Errc::InvalidArgument, "sample count must be positive");
  const Index k = g.k();
  if (k == 0) return DenseMatrix::Zero(g.n(), count);
  const auto st = g.setup(theta);
  DenseMatrix xi(k, count);
  NormalStream normals(rng);
  for (Index u = 0; u < count; ++u)
    for (Index l = 0; l < k; ++l) xi(l, u) = g.zero_xi ? 0.0 : normals.next();
  if (!st->kept.empty()) {
    DenseMatrix sub(static_cast<Index>(st->kept.size()), count);
    for (std::size_t l = 0; l < st->kept.size(); ++l) sub.row(static_cast<Index>(l)) = xi.row(st->kept[l]);
    xi = std::move(sub);
  }
  st->chol.matrix.triangularView<Eigen::Upper>().solveInPlace(xi);
  return st->cols * xi;
}

DenseMatrix empirical_covariance(const DenseMatrix& samples) {
  if (samples.cols() < 2) throw Error(Errc::InvalidArgument, "need at least two samples");
  DenseMatrix c = DenseMatrix::Zero(samples.rows(), samples.rows());
  c.selfadjointView<Eigen::Lower>().rankUpdate(samples, 1.0 / static_cast<double>(samples.cols()));
  return c.selfadjointView<Eigen::Lower>();
}

DenseMatrix empirical_covariance(const std::vector<Vector>& samples) {
  if (samples.empty()) throw Error(Errc::InvalidArgument, "need at least two samples");
  DenseMatrix m(samples[0].size(), static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) m.col(static_cast<Index>(i)) = samples[i];
  return empirical_covariance(m);
}

double certify_online(const ApproxGaussian& g, std::span<const double> theta) {
  const AffineFamily& fam = g.family();
  if (!fam.has_true_oracle()) throw Error(Errc::InvalidArgument, "certification needs a true oracle");
  const EntryOracle c = fam.true_oracle(theta);
  Vector d = c.diagonal();
  const double scale = d.sum();
  if (g.k() > 0) {
    DenseMatrix x;
    if (g.source() == OnlineSource::true_kernel) {
      const auto st = g.setup(theta);
      x = st->chol.solve_right(st->cols);
    } else {
      x = build_cross(c, g.index_set()).scaled_cols();
    }
    d -= x.rowwise().squaredNorm();
  }
  const double dmin = d.minCoeff();
  if (dmin < -1e-8 * std::abs(scale))
    throw Error(Errc::OrderViolated, "residual diagonal entry " + std::to_string(dmin));
  return std::sqrt(std::max(0.0, d.sum()));
}

void write_samples_csv(std::ostream& os, const DenseMatrix& samples) {
  for (Index u = 0; u < samples.cols(); ++u) {
    std::vector<double> row(samples.col(u).data(), samples.col(u).data() + samples.rows());
    write_csv_row(os, row);
  }
}

}  // namespace covaca
