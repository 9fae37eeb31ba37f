// Modified Bessel function of the second kind K_nu(x) for real nu >= 0, x > 0.
//
// K_mu and K_{mu+1} with |mu| <= 1/2 come from Temme's series (x <= 2) or
// Steed's continued fraction CF2 (x > 2); K_nu then follows by upward
// recurrence, which is stable for K. The recurrence is carried in scaled form
// so log K_nu stays finite where K_nu itself overflows.

#include "covaca/kernels.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace covaca {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

// Taylor coefficients of 1/Gamma(1 + x) about x = 0.
constexpr std::array<double, 29> kRecipGammaTaylor = {
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
    -2.2987456844353702066e-19,
};

struct TemmeGammas {
  double gam1;   // (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
  double gam2;   // (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
  double gampl;  // 1/Gamma(1+mu)
  double gammi;  // 1/Gamma(1-mu)
};

TemmeGammas temme_gammas(double mu) {
  // 1/Gamma(1+x) = sum a_k x^k, so the odd part gives gam1 and the even part
  // gam2 without cancellation at small mu.
  double even = 0.0, odd = 0.0;
  double p = 1.0;
  for (std::size_t k = 0; k < kRecipGammaTaylor.size(); ++k) {
    if (k % 2 == 0) even += kRecipGammaTaylor[k] * p;
    else odd += kRecipGammaTaylor[k] * p / mu;
    p *= mu;
  }
  if (mu == 0.0) odd = kRecipGammaTaylor[1];
  // odd currently holds sum_{k odd} a_k mu^{k-1}
  TemmeGammas g{};
  g.gam1 = -odd;
  g.gam2 = even;
  g.gampl = even + mu * odd;
  g.gammi = even - mu * odd;
  return g;
}

struct Seed {
  double k0;         // K_mu(x) * exp(-log_scale)
  double k1;         // K_{mu+1}(x) * exp(-log_scale)
  double log_scale;
};

// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2.
Seed bessel_k_seed(double mu, double x) {
  constexpr double pi = std::numbers::pi;
  if (x <= 2.0) {
    const double x2 = 0.5 * x;
    const double pimu = pi * mu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    const TemmeGammas g = temme_gammas(mu);
    double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.gampl;
    double q = 0.5 / (e * g.gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
      const double di = i;
      ff = (di * ff + p + q) / (di * di - mu * mu);
      c *= d / di;
      p /= (di - mu);
      q /= (di + mu);
      const double del = c * ff;
      sum += del;
      const double del1 = c * (p - di * ff);
      sum1 += del1;
      if (std::abs(del) < std::abs(sum) * kEps) break;
      if (i == kMaxIter) throw Error(Errc::NoConvergence, "bessel_k: Temme series");
    }
    return {sum, sum1 * (2.0 / x), 0.0};
  }

  // Steed's CF2 (Temme's normalisation).
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1, c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double di = i;
    a -= 2.0 * di;
    c = -a * c / (di + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
    if (i == kMaxIter) throw Error(Errc::NoConvergence, "bessel_k: CF2");
  }
  // exp(-x) is carried in log_scale so large x cannot underflow.
  const double kmu = std::sqrt(pi / (2.0 * x)) / s;
  const double kmu1 = kmu * (mu + x + 0.5 - a1 * h) / x;
  return {kmu, kmu1, -x};
}

}  // namespace

double log_bessel_k(double nu, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw Error(Errc::DomainError, "bessel_k requires x > 0");
  if (!std::isfinite(nu)) throw Error(Errc::DomainError, "bessel_k requires finite order");
  nu = std::abs(nu);  // K_{-nu} = K_nu
  const int steps = static_cast<int>(nu + 0.5);
  const double mu = nu - steps;

  Seed seed = bessel_k_seed(mu, x);
  double k0 = seed.k0, k1 = seed.k1;
  double log_scale = seed.log_scale;

  constexpr double kBig = 1e250;
  for (int i = 1; i <= steps; ++i) {
    const double next = (mu + i) * (2.0 / x) * k1 + k0;
    k0 = k1;
    k1 = next;
    if (std::abs(k1) > kBig) {
      k0 /= kBig;
      k1 /= kBig;
      log_scale += std::log(kBig);
    }
  }
  return std::log(k0) + log_scale;
}

double bessel_k(double nu, double x) {
  if (!(x > 0.0)) throw Error(Errc::DomainError, "bessel_k requires x > 0");
  return std::exp(log_bessel_k(nu, x));
}

}  // namespace covaca
