#include <algorithm>
#include <limits>
#include <sstream>

#include "covaca/separable.hpp"
#include "test_support.hpp"

using namespace covaca;
using namespace covaca::testing;

namespace {

const double kSqrt2 = std::sqrt(2.0);

IsotropicKernel gaussian() { return kernel_function(KernelSpec::gaussian()); }

FunctionAcaResult gaussian_aca(Index s_max, double tol = 0.0) {
  return function_aca_1dparam(gaussian(), {0.0, kSqrt2}, {0.1, kSqrt2}, s_max, tol);
}

}  // namespace

TEST_SUITE("separable") {

TEST_CASE("chebyshev nodes are ascending with exact endpoints and weights integrate polynomials") {
  const Vector x = chebyshev_lobatto_nodes(33, -0.5, 2.0);
  CHECK(x(0) == -0.5);
  CHECK(x(32) == 2.0);
  for (Index i = 1; i < x.size(); ++i) CHECK(x(i) > x(i - 1));
  const Vector w = clenshaw_curtis_weights(33, -0.5, 2.0);
  CHECK(w.sum() == doctest::Approx(2.5).epsilon(1e-14));
  // integral of x^5 over [-0.5, 2]
  const double exact = (std::pow(2.0, 6) - std::pow(-0.5, 6)) / 6.0;
  CHECK(w.dot(x.array().pow(5).matrix()) == doctest::Approx(exact).epsilon(1e-13));
}

TEST_CASE("Func1D reproduces its values at the nodes and interpolates smooth functions") {
  const Func1D f = Func1D::sample(0.0, 3.0, 65, [](double d) { return std::cos(2.0 * d) + d * d; });
  for (Index i = 0; i < f.size(); ++i) CHECK(f(f.nodes()(i)) == f.values()(i));
  for (double d : {0.0, 0.123, 1.5, 2.999, 3.0}) CHECK(std::abs(f(d) - (std::cos(2.0 * d) + d * d)) < 1e-13);
  CHECK_THROWS_AS(Func1D(0.0, 1.0, Vector::Ones(1)), Error);
}

TEST_CASE("function ACA: separable input gives a single term") {
  auto k = [](double d, std::span<const double> th) { return std::exp(-d) * (1.0 + th[0] * th[0]); };
  const FunctionAcaResult r = function_aca_1dparam(k, {0.0, 1.0}, {0.5, 2.0}, 10, 0.0);
  CHECK(r.expansion.s() == 1);
  CHECK(r.expansion.reported_error <= 1e-12 * 5.0);
}

TEST_CASE("function ACA: gaussian with 18 terms reaches about 1e-8") {
  const FunctionAcaResult r = gaussian_aca(18);
  CHECK(r.expansion.s() == 18);
  CHECK(r.expansion.reported_error >= 1e-9);
  CHECK(r.expansion.reported_error <= 1e-7);
  REQUIRE(r.pivot_theta.size() >= 2);
  std::vector<double> first{r.pivot_theta[0], r.pivot_theta[1]};
  std::sort(first.begin(), first.end());
  CHECK(first[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(first[1] == doctest::Approx(kSqrt2).epsilon(1e-14));
}

TEST_CASE("function ACA: grid residual is nonincreasing and the tolerance stops early") {
  const FunctionAcaResult r = gaussian_aca(30);
  for (std::size_t i = 1; i < r.max_residual.size(); ++i) CHECK(r.max_residual[i] <= r.max_residual[i - 1]);
  const FunctionAcaResult loose = gaussian_aca(30, 1e-4);
  CHECK(loose.expansion.reported_error <= 1e-4);
  CHECK(loose.expansion.s() < r.expansion.s());
}

TEST_CASE("expansion eval is the term-by-term sum") {
  const SeparableExpansion e = gaussian_aca(10).expansion;
  for (double th : {0.1, 0.37, 1.2}) {
    const ParamPoint p{th};
    const Vector phi = e.phi.evaluate(p);
    for (double d : {0.0, 0.3, 1.41}) {
      double sum = 0.0;
      for (Index j = 0; j < e.s(); ++j) sum += phi(j) * e.terms[static_cast<std::size_t>(j)](d);
      CHECK(std::abs(e.eval(d, p) - sum) <= 1e-14 * std::max(1.0, std::abs(sum)));
    }
    // same theta, bitwise identical coefficients
    const Vector again = e.phi.evaluate(p);
    CHECK((phi.array() == again.array()).all());
  }
}

TEST_CASE("eim_node_selection examples") {
  const Func1D lin = Func1D::sample(0.0, 1.0, 33, [](double d) { return d; });
  const std::vector<Func1D> one{lin};
  const auto nodes = eim_node_selection(one);
  REQUIRE(nodes.size() == 1);
  CHECK(lin.nodes()(nodes[0]) == 1.0);

  // {1, d} on [-1, 1] against brute-force enumeration on the same grid
  const Func1D c1 = Func1D::sample(-1.0, 1.0, 33, [](double) { return 1.0; });
  const Func1D cd = Func1D::sample(-1.0, 1.0, 33, [](double d) { return d; });
  const std::vector<Func1D> basis{c1, cd};
  const auto two = eim_node_selection(basis);
  REQUIRE(two.size() == 2);
  CHECK(two[0] == 0);  // leftmost argmax of |1|
  Index best = 0;
  double best_val = -1.0;
  for (Index i = 0; i < cd.size(); ++i) {
    const double r = std::abs(cd.values()(i) - cd.values()(0) / c1.values()(0) * c1.values()(i));
    if (r > best_val) best_val = r, best = i;
  }
  CHECK(two[1] == best);
  CHECK(std::abs(cd.nodes()(two[1])) == 1.0);

  const std::vector<Func1D> dup{lin, lin};
  try {
    eim_node_selection(dup);
    FAIL("expected SingularInterpolationMatrix");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SingularInterpolationMatrix);
  }
}

TEST_CASE("eim nodes are distinct for independent bases") {
  std::vector<Func1D> basis;
  for (int p = 0; p < 8; ++p)
    basis.push_back(Func1D::sample(0.0, 2.0, 65, [p](double d) { return std::cos(p * d) + 0.1 * p * d; }));
  auto nodes = eim_node_selection(basis);
  std::sort(nodes.begin(), nodes.end());
  CHECK(std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end());
}

TEST_CASE("eim: a parameter-independent kernel gives one constant coefficient") {
  auto k = [](double d, std::span<const double>) { return 1.0 / (1.0 + d * d); };
  ParamBox box{{0.5, 1.0}, {2.0, 3.0}};
  const EimResult r = eim(k, {0.0, 1.5}, box, 4, 1e-8);
  CHECK(r.expansion.s() == 1);
  const double phi0 = r.expansion.phi.evaluate(ParamPoint{0.5, 1.0})(0);
  CHECK(r.expansion.phi.evaluate(ParamPoint{1.7, 2.2})(0) == doctest::Approx(phi0).epsilon(1e-14));
  CHECK(expansion_error(r.expansion, k, 100, 3) <= 1e-12);
}

TEST_CASE("eim: two-parameter matern reaches 1e-5 with about 20 terms") {
  const IsotropicKernel k = kernel_function(KernelSpec::matern_free());
  ParamBox box{{0.1, 2.5}, {kSqrt2, 7.5}};
  const EimResult r = eim(k, {0.0, kSqrt2}, box, 30, 1e-10);
  MESSAGE("matern eim terms: " << r.expansion.s());
  CHECK(r.expansion.s() >= 15);
  CHECK(r.expansion.s() <= 30);
  const double err = expansion_error(r.expansion, k, 200, 10);
  CHECK(err <= 1e-5);

  double prev = std::numeric_limits<double>::infinity();
  for (Index s = 4; s <= r.expansion.s(); s += 4) {
    const double e = expansion_error(r.expansion.truncated(s), k, 200, 10);
    CHECK(e < prev);
    prev = e;
  }

  // interpolation at the nodes for every snapshot parameter
  for (const ParamPoint& th : r.snapshots) {
    for (Index idx : r.node_indices) {
      const double d = r.basis.front().nodes()(idx);
      CHECK(std::abs(r.expansion.eval(d, th) - k(d, th)) <= 1e-10);
    }
  }
}

TEST_CASE("eim: at the nodes the expansion equals the rank-s SVD reconstruction") {
  // With a tiny tau the truncation error is below the comparison tolerance.
  const IsotropicKernel k = gaussian();
  ParamBox box{{0.3}, {kSqrt2}};
  const EimResult r = eim(k, {0.0, kSqrt2}, box, 40, 1e-13);
  const Index s = r.expansion.s();
  const Vector x = r.basis.front().nodes();
  const Vector w = clenshaw_curtis_weights(x.size(), 0.0, kSqrt2);
  DenseMatrix snap(x.size(), static_cast<Index>(r.snapshots.size()));
  for (Index j = 0; j < snap.cols(); ++j)
    for (Index i = 0; i < x.size(); ++i) snap(i, j) = k(x(i), r.snapshots[static_cast<std::size_t>(j)]);
  const Vector sw = w.cwiseSqrt();
  const ThinSvd svd = thin_svd(sw.asDiagonal() * snap);
  const DenseMatrix recon = sw.cwiseInverse().asDiagonal() * svd.u.leftCols(s) * svd.sigma.head(s).asDiagonal() *
                            svd.v.leftCols(s).transpose();
  for (Index j = 0; j < snap.cols(); ++j)
    for (Index idx : r.node_indices)
      CHECK(std::abs(r.expansion.eval(x(idx), r.snapshots[static_cast<std::size_t>(j)]) - recon(idx, j)) <= 1e-10);
}

TEST_CASE("eim rejects bad arguments") {
  ParamBox box{{0.1}, {1.0}};
  CHECK_THROWS_AS(eim(gaussian(), {0.0, 1.0}, box, 0, 1e-8), Error);
  CHECK_THROWS_AS(eim(gaussian(), {0.0, 1.0}, box, 5, 0.0), Error);
}

TEST_CASE("expansion_error examples") {
  auto k = [](double d, std::span<const double> th) { return std::exp(-d) * th[0]; };
  const FunctionAcaResult exact = function_aca_1dparam(k, {0.0, 1.0}, {0.5, 2.0}, 5, 0.0);
  CHECK(expansion_error(exact.expansion, k, 50, 5) <= 1e-12);

  const SeparableExpansion g18 = gaussian_aca(18).expansion;
  CHECK(expansion_error(g18, gaussian(), 500, 8) <= 1e-6);

  double prev = std::numeric_limits<double>::infinity();
  for (Index s : {6, 8, 10, 12, 14}) {
    const double e = expansion_error(gaussian_aca(s).expansion, gaussian(), 500, 8);
    CHECK(e <= prev);
    prev = e;
  }
  CHECK_THROWS_AS(expansion_error(g18, gaussian(), 1, 8), Error);
}

TEST_CASE("affine family of a constant term") {
  auto k = [](double, std::span<const double> th) { return th[0]; };
  SeparableExpansion e;
  e.terms.push_back(Func1D::sample(0.0, 2.0, 9, [](double) { return 1.0; }));
  e.phi = make_aca_basis(k, Vector::Zero(1), Vector::Ones(1), DenseMatrix::Zero(1, 1));
  e.d_domain = {0.0, 2.0};
  e.param_box = ParamBox{{0.5}, {3.0}};
  const SpatialGrid g = make_grid(3);
  const AffineFamily fam = affine_family_from_expansion(e, g);
  REQUIRE(fam.s() == 1);
  CHECK(fam.traces[0] == doctest::Approx(1.0).epsilon(1e-14));
  const double c = 2.5;
  const DenseMatrix a = fam.at(ParamPoint{c}).materialize();
  CHECK((a - DenseMatrix::Constant(9, 9, c / 9.0)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("affine family of a gaussian expansion matches the covariance") {
  const SeparableExpansion e = gaussian_aca(18).expansion;
  const SpatialGrid g = make_grid(4);
  const AffineFamily fam = affine_family_from_expansion(e, g);
  const ParamPoint th{0.5};
  const DenseMatrix a = fam.at(th).materialize();
  const DenseMatrix c = covariance_oracle(KernelSpec::gaussian(), g, th).materialize();
  CHECK((a - c).cwiseAbs().maxCoeff() <= e.reported_error * 10.0 / static_cast<double>(g.size()) + 1e-15);

  const AffineFamily small = affine_family_from_expansion(e, make_grid(3));
  for (Index j = 0; j < small.s(); ++j) {
    double diag = 0.0;
    for (Index i = 0; i < small.n; ++i) diag += small.terms[static_cast<std::size_t>(j)](i, i);
    CHECK(std::abs(small.traces[static_cast<std::size_t>(j)] - diag) <= 1e-14 * std::max(1.0, std::abs(diag)));
  }
}

TEST_CASE("trace consistency for random parameters") {
  const SeparableExpansion e = gaussian_aca(12).expansion;
  const AffineFamily fam = affine_family_from_expansion(e, make_grid(5));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, kSqrt2);
  for (int rep = 0; rep < 5; ++rep) {
    const ParamPoint th{u(rng)};
    const Vector phi = fam.coeffs(th);
    double t = 0.0;
    for (Index j = 0; j < fam.s(); ++j) t += phi(j) * fam.traces[static_cast<std::size_t>(j)];
    const double direct = fam.at(th).materialize().trace();
    CHECK(std::abs(t - direct) <= 1e-10 * std::abs(direct));
  }
}

TEST_CASE("affine family rejects a grid beyond the expansion domain") {
  const SeparableExpansion e = function_aca_1dparam(gaussian(), {0.0, 0.5}, {0.1, 1.0}, 6, 0.0).expansion;
  try {
    affine_family_from_expansion(e, make_grid(4));
    FAIL("expected DomainMismatch");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::DomainMismatch);
  }
}

TEST_CASE("expansion serialization round-trips exactly") {
  KernelSpec spec = KernelSpec::matern_free();
  const IsotropicKernel k = kernel_function(spec);
  ParamBox box{{0.1, 2.5}, {kSqrt2, 7.5}};
  const EimResult r = eim(k, {0.0, kSqrt2}, box, 6, 1e-4);
  for (const SeparableExpansion& e : {r.expansion, gaussian_aca(9).expansion}) {
    const KernelSpec& es = e.param_box.dim() == 2 ? spec : KernelSpec::gaussian();
    std::stringstream ss;
    write_expansion(ss, e, es);
    KernelSpec back_spec;
    const SeparableExpansion back = read_expansion(ss, &back_spec);
    CHECK(back_spec.describe() == es.describe());
    REQUIRE(back.s() == e.s());
    CHECK(back.reported_error == e.reported_error);
    for (Index j = 0; j < e.s(); ++j)
      CHECK((back.terms[static_cast<std::size_t>(j)].values().array() ==
             e.terms[static_cast<std::size_t>(j)].values().array())
                .all());
    const ParamPoint th = e.param_box.dim() == 2 ? ParamPoint{0.7, 4.1} : ParamPoint{0.7};
    for (double d : {0.0, 0.4, 1.3}) CHECK(back.eval(d, th) == e.eval(d, th));
  }
  std::stringstream bad("garbage");
  CHECK_THROWS_AS(read_expansion(bad), Error);
}

}  // TEST_SUITE
