#include <cmath>
#include <numbers>

#include "covaca/separable.hpp"

namespace covaca {

Vector chebyshev_lobatto_nodes(Index count, double lo, double hi) {
  if (count < 2) throw Error(Errc::InvalidArgument, "need at least two Chebyshev nodes");
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const Index m = count - 1;
  Vector x(count);
  for (Index k = 0; k <= m; ++k) {
    // sin form keeps the nodes symmetric about mid in floating point
    const double t = std::sin(std::numbers::pi * static_cast<double>(2 * k - m) /
                              static_cast<double>(2 * m));
    x(k) = mid + half * t;
  }
  x(0) = lo;
  x(m) = hi;
  return x;
}

Vector clenshaw_curtis_weights(Index count, double lo, double hi) {
  if (count < 2) throw Error(Errc::InvalidArgument, "need at least two Chebyshev nodes");
  const Index n = count - 1;
  Vector w(count);
  for (Index k = 0; k <= n; ++k) {
    double sum = 0.0;
    for (Index j = 1; j <= n / 2; ++j) {
      const double b = (2 * j == n) ? 1.0 : 2.0;
      sum += b / static_cast<double>(4 * j * j - 1) *
             std::cos(2.0 * std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(n));
    }
    const double c = (k == 0 || k == n) ? 1.0 : 2.0;
    w(k) = c / static_cast<double>(n) * (1.0 - sum);
  }
  return w * (0.5 * (hi - lo));
}

Func1D::Func1D(double lo, double hi, Vector values) : lo_(lo), hi_(hi), values_(std::move(values)) {
  if (values_.size() < 2) throw Error(Errc::InvalidArgument, "Func1D needs at least two values");
  if (!(lo < hi)) throw Error(Errc::InvalidArgument, "Func1D needs lo < hi");
  nodes_ = chebyshev_lobatto_nodes(values_.size(), lo_, hi_);
}

Func1D Func1D::sample(double lo, double hi, Index count, const std::function<double(double)>& f) {
  const Vector x = chebyshev_lobatto_nodes(count, lo, hi);
  Vector v(count);
  for (Index i = 0; i < count; ++i) v(i) = f(x(i));
  return Func1D(lo, hi, std::move(v));
}

double Func1D::operator()(double x) const {
  const Index m = values_.size() - 1;
  double num = 0.0, den = 0.0;
  for (Index k = 0; k <= m; ++k) {
    const double diff = x - nodes_(k);
    if (diff == 0.0) return values_(k);
    double w = (k % 2 == 0) ? 1.0 : -1.0;
    if (k == 0 || k == m) w *= 0.5;
    const double t = w / diff;
    num += t * values_(k);
    den += t;
  }
  return num / den;
}

}  // namespace covaca
