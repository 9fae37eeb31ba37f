#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "covaca/separable.hpp"

namespace covaca {
namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_row(std::ostream& os, const Eigen::Ref<const Vector>& v) {
  for (Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << fmt(v(i));
  os << '\n';
}

std::istringstream next_line(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) throw Error(Errc::ParseError, std::string("missing ") + what);
  return std::istringstream(line);
}

void expect_word(std::istringstream& ls, const std::string& word) {
  std::string w;
  if (!(ls >> w) || w != word) throw Error(Errc::ParseError, "expected '" + word + "'");
}

Vector read_row(std::istream& is, Index count, const char* what) {
  auto ls = next_line(is, what);
  Vector v(count);
  for (Index i = 0; i < count; ++i)
    if (!(ls >> v(i))) throw Error(Errc::ParseError, std::string("short row in ") + what);
  return v;
}

KernelSpec parse_kernel(std::istringstream& ls) {
  std::string family;
  if (!(ls >> family)) throw Error(Errc::ParseError, "missing kernel family");
  KernelSpec spec;
  double sigma2 = 0.0;
  if (!(ls >> sigma2)) throw Error(Errc::ParseError, "missing kernel variance");
  if (family == "gaussian") {
    spec = KernelSpec::gaussian(sigma2);
  } else if (family == "matern") {
    double nu = 0.0;
    spec = (ls >> nu) ? KernelSpec::matern_fixed(nu, sigma2) : KernelSpec::matern_free(sigma2);
  } else {
    throw Error(Errc::ParseError, "unknown kernel family '" + family + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace

void write_expansion(std::ostream& os, const SeparableExpansion& exp, const KernelSpec& spec) {
  const Index s = exp.s();
  const Index nd = s > 0 ? exp.terms[0].size() : 0;
  os << s << ' ' << nd << ' ' << fmt(exp.d_domain[0]) << ' ' << fmt(exp.d_domain[1]) << '\n';
  os << "kind " << (exp.phi.kind == ParamBasis::Kind::aca ? "aca" : "eim") << ' '
     << exp.param_box.dim() << '\n';
  os << "kernel " << spec.describe() << '\n';
  os << "box";
  for (std::size_t a = 0; a < exp.param_box.dim(); ++a)
    os << ' ' << fmt(exp.param_box.lower[a]) << ' ' << fmt(exp.param_box.upper[a]);
  os << '\n';
  os << "reported_error " << fmt(exp.reported_error) << '\n';
  for (const Func1D& a : exp.terms) write_row(os, a.values());
  write_row(os, exp.phi.points);
  if (exp.phi.kind == ParamBasis::Kind::aca) write_row(os, exp.phi.pivots);
  for (Index i = 0; i < s; ++i) write_row(os, exp.phi.matrix.row(i).transpose());
}

SeparableExpansion read_expansion(std::istream& is, KernelSpec* spec_out) {
  Index s = 0, nd = 0;
  SeparableExpansion e;
  {
    auto ls = next_line(is, "header");
    if (!(ls >> s >> nd >> e.d_domain[0] >> e.d_domain[1]) || s < 1 || nd < 2)
      throw Error(Errc::ParseError, "bad header line");
  }
  std::string kind;
  std::size_t dim = 0;
  {
    auto ls = next_line(is, "kind line");
    expect_word(ls, "kind");
    if (!(ls >> kind >> dim) || (kind != "aca" && kind != "eim") || dim < 1)
      throw Error(Errc::ParseError, "bad kind line");
  }
  KernelSpec spec;
  {
    auto ls = next_line(is, "kernel line");
    expect_word(ls, "kernel");
    spec = parse_kernel(ls);
  }
  {
    auto ls = next_line(is, "box line");
    expect_word(ls, "box");
    e.param_box.lower.resize(dim);
    e.param_box.upper.resize(dim);
    for (std::size_t a = 0; a < dim; ++a)
      if (!(ls >> e.param_box.lower[a] >> e.param_box.upper[a]))
        throw Error(Errc::ParseError, "bad box line");
  }
  {
    auto ls = next_line(is, "reported_error line");
    expect_word(ls, "reported_error");
    std::string v;
    if (!(ls >> v)) throw Error(Errc::ParseError, "bad reported_error line");
    e.reported_error = std::stod(v);
  }
  for (Index j = 0; j < s; ++j) e.terms.emplace_back(e.d_domain[0], e.d_domain[1], read_row(is, nd, "term"));
  Vector points = read_row(is, s, "points");
  Vector pivots;
  if (kind == "aca") pivots = read_row(is, s, "pivots");
  DenseMatrix m(s, s);
  for (Index i = 0; i < s; ++i) m.row(i) = read_row(is, s, "matrix").transpose();

  IsotropicKernel kernel = kernel_function(spec);
  e.phi = kind == "aca" ? make_aca_basis(kernel, std::move(points), std::move(pivots), std::move(m))
                        : make_eim_basis(kernel, std::move(points), std::move(m));
  if (spec_out) *spec_out = spec;
  return e;
}

}  // namespace covaca
