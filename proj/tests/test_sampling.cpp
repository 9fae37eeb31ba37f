#include <algorithm>
#include <chrono>
#include <sstream>

#include "covaca/experiments.hpp"
#include "covaca/sampling.hpp"
#include "covaca/wasserstein.hpp"
#include "test_support.hpp"

using namespace covaca;
using namespace covaca::testing;

namespace {

struct Setup {
  ExperimentConfig cfg;
  AffineFamily fam;
};

Setup gaussian_family(Index n0, Index m = 100) {
  Setup s;
  s.cfg.n0 = n0;
  s.cfg.m = m;
  s.fam = build_family(s.cfg, linearize(s.cfg));
  return s;
}

IndexSet all_indices(Index n) {
  IndexSet set;
  for (Index i = 0; i < n; ++i) set.indices.push_back(i);
  return set;
}

double rel_frobenius(const DenseMatrix& a, const DenseMatrix& ref) { return (a - ref).norm() / ref.norm(); }

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("normal stream is deterministic and standard") {
  NormalStream a({5, 3}), b({5, 3}), c({5, 4});
  double sum = 0.0, sq = 0.0;
  bool differs = false;
  const int count = 100000;
  for (int i = 0; i < count; ++i) {
    const double x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
    sum += x;
    sq += x * x;
  }
  CHECK(differs);
  CHECK(std::abs(sum / count) < 0.02);
  CHECK(std::abs(sq / count - 1.0) < 0.02);
}

TEST_CASE("uniform parameters stay in the box") {
  const ParamBox box{{0.1, 2.5}, {1.4, 7.5}};
  for (const ParamPoint& p : uniform_parameters(box, 500, {9, 0})) CHECK(box.contains(p));
}

TEST_CASE("offline on the gaussian family") {
  const Setup s = gaussian_family(8);
  const ApproxGaussian g = offline(s.fam, theta_set(s.cfg), 0.1, -1);
  CHECK(std::abs(g.k() - 47) <= 2);
  CHECK(g.source() == OnlineSource::true_kernel);
  CHECK(g.counters.entry_evaluations > 0);
  CHECK(g.counters.entry_evaluations <= 3 * g.k() * g.n() * s.fam.s());
  CHECK(g.counters.flop_estimate > 0.0);
}

TEST_CASE("offline on a single-matrix family matches aca_spsd") {
  std::mt19937_64 rng(41);
  const DenseMatrix a = random_spsd(30, 12, rng);
  const AcaResult ref = aca_spsd(dense_oracle(a), 1e-8, -1);
  const ApproxGaussian g = offline(single_matrix_family(dense_oracle(a)), {{1.0}}, 1e-8, -1);
  CHECK(g.k() == ref.index_set.size());
  CHECK(g.index_set().indices == ref.index_set.indices);
}

TEST_CASE("true-kernel source needs a true oracle") {
  AffineFamily fam = single_matrix_family(dense_oracle(DenseMatrix::Identity(3, 3)));
  fam.true_oracle = nullptr;
  CHECK(offline(fam, {{1.0}}, 0.0, -1).source() == OnlineSource::expansion);
  CHECK_THROWS_AS(ApproxGaussian(fam, all_indices(3), OnlineSource::true_kernel), Error);
  IndexSet bad;
  bad.indices = {3};
  CHECK_THROWS_AS(ApproxGaussian(fam, bad, OnlineSource::expansion), Error);
}

TEST_CASE("zero normals give zero samples") {
  const Setup s = gaussian_family(4, 10);
  ApproxGaussian g(s.fam, all_indices(16), OnlineSource::true_kernel);
  g.zero_xi = true;
  const ParamPoint th{0.5};
  CHECK(sample(g, th, {1, 0}, 3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("samples are reproducible") {
  const Setup s = gaussian_family(4, 10);
  const ApproxGaussian g = offline(s.fam, theta_set(s.cfg), 1e-3, -1);
  const ParamPoint th{0.37};
  const DenseMatrix a = sample(g, th, {11, 2}, 5);
  g.clear_cache();
  const DenseMatrix b = sample(g, th, {11, 2}, 5);
  CHECK((a.array() == b.array()).all());
  CHECK((a.array() != sample(g, th, {11, 3}, 5).array()).any());
  // sample u uses normals u*k .. u*k + k - 1, so a prefix of a longer draw matches
  const DenseMatrix longer = sample(g, th, {11, 2}, 8);
  CHECK((longer.leftCols(5).array() == a.array()).all());
  CHECK(g.setup(th) == g.setup(th));
}

TEST_CASE("full index set draws from the exact covariance") {
  const Setup s = gaussian_family(4, 10);
  const ApproxGaussian g(s.fam, all_indices(16), OnlineSource::true_kernel);
  const ParamPoint th{0.3};
  const DenseMatrix emp = empirical_covariance(sample(g, th, {3, 0}, 50000));
  const DenseMatrix c = s.fam.true_oracle(th).materialize();
  CHECK(rel_frobenius(emp, c) <= 0.05);
  CHECK((g.covariance(th) - c).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("empirical covariance examples") {
  std::vector<Vector> two{Vector::Unit(3, 0), -Vector::Unit(3, 0)};
  const DenseMatrix e = empirical_covariance(two);
  DenseMatrix expected = DenseMatrix::Zero(3, 3);
  expected(0, 0) = 1.0;
  CHECK((e - expected).norm() == 0.0);

  const Setup s = gaussian_family(8);
  const ApproxGaussian g = offline(s.fam, theta_set(s.cfg), 0.1, -1);
  const ParamPoint th{0.5};
  const DenseMatrix emp = empirical_covariance(sample(g, th, {4, 0}, 20000));
  const DenseMatrix ci = g.covariance(th);
  CHECK(rel_frobenius(emp, ci) <= 0.05);
  CHECK(min_eig(emp) >= -1e-12);
}

TEST_CASE("certify_online examples") {
  const Setup s4 = gaussian_family(4, 10);
  const ApproxGaussian full(s4.fam, all_indices(16), OnlineSource::true_kernel);
  CHECK(certify_online(full, ParamPoint{0.4}) <= 1e-8);

  const Setup s = gaussian_family(8);
  const ApproxGaussian g = offline(s.fam, theta_set(s.cfg), 0.1, -1);
  const std::vector<ParamPoint> probes = equispaced_grid(s.cfg.theta_box, 50);
  for (const ParamPoint& th : probes) CHECK(certify_online(g, th) <= std::sqrt(0.1 * (1.0 + 1e-3)));

  const ApproxGaussian g4 = offline(s4.fam, theta_set(s4.cfg), 0.0, 8);
  for (double t : {0.1, 0.3, 0.7, 1.2}) {
    const ParamPoint th{t};
    const DenseMatrix c = s4.fam.true_oracle(th).materialize();
    CHECK(certify_online(g4, th) > w2_exact({c, g4.covariance(th)}));
  }
}

TEST_CASE("certified bound shrinks as the index set grows") {
  const Setup s = gaussian_family(6, 20);
  const ApproxGaussian g = offline(s.fam, theta_set(s.cfg), 1e-4, -1);
  for (double t : {0.1, 0.4, 1.0}) {
    const ParamPoint th{t};
    double prev = std::numeric_limits<double>::infinity();
    for (Index k = 0; k <= g.k(); k += 3) {
      const ApproxGaussian pk(s.fam, g.index_set().prefix(k), OnlineSource::true_kernel);
      const double b = certify_online(pk, th);
      CHECK(b <= prev * (1.0 + 1e-12) + 1e-10);
      prev = b;
    }
  }
}

TEST_CASE("singular pivot blocks drop rounding-level pivots") {
  const Setup s = gaussian_family(16, 100);
  const ApproxGaussian g = offline(s.fam, theta_set(s.cfg), 0.1, -1);
  const ParamPoint th{std::sqrt(2.0)};
  const auto st = g.setup(th);
  MESSAGE("k " << g.k() << " kept " << (st->kept.empty() ? g.k() : static_cast<Index>(st->kept.size())));
  const double bound = certify_online(g, th);
  CHECK(std::isfinite(bound));
  CHECK(bound <= std::sqrt(0.1 * (1.0 + 1e-3)));
  const DenseMatrix x = sample(g, th, {1, 1}, 4);
  CHECK(x.allFinite());
}

TEST_CASE("indefinite pivot block is a Cholesky failure") {
  DenseMatrix a(2, 2);
  a << 1, 2, 2, 1;
  const ApproxGaussian g(single_matrix_family(dense_oracle(a)), all_indices(2), OnlineSource::expansion);
  try {
    sample(g, ParamPoint{1.0}, {1, 0}, 1);
    FAIL("expected CholeskyFailure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CholeskyFailure);
  }
}

TEST_CASE("per-sample cost grows linearly in n") {
  const Index k = 20;
  std::vector<double> per_sample;
  for (Index n0 : {8, 16, 32, 64}) {
    ExperimentConfig cfg;
    cfg.n0 = n0;
    cfg.m = 2;
    const AffineFamily fam = build_family(cfg, linearize(cfg));
    const ParamPoint th{0.3};
    const IndexSet set = aca_spsd(fam.true_oracle(th), 0.0, k).index_set;
    const ApproxGaussian g(fam, set, OnlineSource::true_kernel);
    sample(g, th, {1, 0}, 1);  // setup
    const Index count = std::max<Index>(1000, 4000000 / (n0 * n0));
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 7; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const DenseMatrix x = sample(g, th, {2, static_cast<std::uint64_t>(rep)}, count);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      CHECK(x.allFinite());
      best = std::min(best, dt / static_cast<double>(count));
    }
    per_sample.push_back(best);
  }
  // Marginal cost per unit n between consecutive sizes; a fixed per-sample
  // overhead (k normals, k x k solve) cancels in the differences.
  const std::vector<double> sizes{64, 256, 1024, 4096};
  std::vector<double> slopes;
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    slopes.push_back((per_sample[i] - per_sample[i - 1]) / (sizes[i] - sizes[i - 1]));
    MESSAGE("n " << sizes[i] << ": " << per_sample[i] << " s/sample, slope " << slopes.back());
  }
  const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
  CHECK(*lo > 0.0);
  CHECK(*hi <= 2.0 * *lo);
}

TEST_CASE("sample CSV has one row per sample and round-trips") {
  std::mt19937_64 rng(42);
  const DenseMatrix x = random_matrix(3, 4, rng);
  std::ostringstream os;
  write_samples_csv(os, x);
  std::istringstream is(os.str());
  std::string line;
  Index rows = 0;
  while (std::getline(is, line)) {
    std::stringstream ls(line);
    std::string cell;
    Index col = 0;
    while (std::getline(ls, cell, ',')) {
      CHECK(std::stod(cell) == x(col, rows));
      ++col;
    }
    CHECK(col == 3);
    ++rows;
  }
  CHECK(rows == 4);
}

}  // TEST_SUITE
