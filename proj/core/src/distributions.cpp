#include "exhaz/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "exhaz/error.hpp"

namespace exhaz {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Past this value of (t/theta)^kappa, exp(-z) is below double resolution of
// 1 - exp(-z) and the tail is evaluated asymptotically.
constexpr double kTailZ = 700.0;

double scaled_time(double t, const EwParams& p) { return std::pow(t / p.theta, p.kappa); }

}  // namespace

void EwParams::validate() const {
  if (!positive_finite(kappa) || !positive_finite(theta) || !positive_finite(alpha)) {
    throw Error(ErrorCode::NonPositive,
                fmt::format("EW parameters must be positive and finite (kappa={}, theta={}, "
                            "alpha={})", kappa, theta, alpha));
  }
}

void GammaFrailtyParams::validate() const {
  if (!positive_finite(mu) || !positive_finite(b)) {
    throw Error(ErrorCode::NonPositive,
                fmt::format("Gamma frailty needs mu > 0 and b > 0 (mu={}, b={})", mu, b));
  }
}

void LogNormalFrailtyParams::validate() const {
  if (!std::isfinite(m) || !positive_finite(s)) {
    throw Error(ErrorCode::NonPositive,
                fmt::format("lognormal frailty needs finite m and s > 0 (m={}, s={})", m, s));
  }
}

double log1mexp(double a) {
  return a > -std::numbers::ln2 ? std::log(-std::expm1(a)) : std::log1p(-std::exp(a));
}

double ew_pdf(double t, const EwParams& p) {
  if (!(t > 0.0)) return 0.0;
  const double z = scaled_time(t, p);
  const double log_w = log1mexp(-z);
  const double log_f = std::log(p.alpha * p.kappa / p.theta) +
                       (p.kappa - 1.0) * std::log(t / p.theta) + (p.alpha - 1.0) * log_w - z;
  return std::exp(log_f);
}

double ew_cdf(double t, const EwParams& p) {
  if (!(t > 0.0)) return 0.0;
  const double z = scaled_time(t, p);
  return std::exp(p.alpha * log1mexp(-z));
}

double ew_log_survival(double t, const EwParams& p) {
  if (!(t > 0.0)) return 0.0;
  const double z = scaled_time(t, p);
  if (z > kTailZ) return std::log(p.alpha) - z;
  return log1mexp(p.alpha * log1mexp(-z));
}

double ew_log_hazard(double t, const EwParams& p) {
  if (!(t > 0.0)) {
    // Limit at 0+: h ~ (alpha kappa / theta) (t/theta)^(alpha kappa - 1).
    const double ak = p.alpha * p.kappa;
    if (ak > 1.0) return -std::numeric_limits<double>::infinity();
    if (ak < 1.0) return std::numeric_limits<double>::infinity();
    return std::log(1.0 / p.theta);
  }
  const double z = scaled_time(t, p);
  const double log_t = std::log(t / p.theta);
  const double base = std::log(p.kappa / p.theta) + (p.kappa - 1.0) * log_t;
  if (z > kTailZ) return base;
  const double log_w = log1mexp(-z);
  return base + std::log(p.alpha) + (p.alpha - 1.0) * log_w - z - log1mexp(p.alpha * log_w);
}

double ew_hazard(double t, const EwParams& p) {
  const double h = std::exp(ew_log_hazard(t, p));
  if (std::isnan(h) || (t > 0.0 && std::isinf(h))) {
    throw Error(ErrorCode::NumericalOverflow, fmt::format("EW hazard overflow at t={}", t));
  }
  return h;
}

double ew_cum_hazard(double t, const EwParams& p) {
  const double h = -ew_log_survival(t, p);
  if (!std::isfinite(h)) {
    throw Error(ErrorCode::NumericalOverflow,
                fmt::format("EW cumulative hazard overflow at t={}", t));
  }
  return h;
}

double ew_quantile(double u, const EwParams& p) {
  // t = theta * (-log(1 - u^(1/alpha)))^(1/kappa)
  const double v = -std::expm1(std::log(u) / p.alpha);
  return p.theta * std::pow(-std::log(v), 1.0 / p.kappa);
}

double ew_time_at_cum_hazard(double h, const EwParams& p) {
  if (!(h > 0.0)) return 0.0;
  // F = 1 - exp(-h);  1 - F^(1/alpha) = -expm1(log(F) / alpha)
  const double log_f = log1mexp(-h);
  const double v = -std::expm1(log_f / p.alpha);
  return p.theta * std::pow(-std::log(v), 1.0 / p.kappa);
}

double gamma_frailty_pdf(double r, const GammaFrailtyParams& g) {
  if (!(r > 0.0)) return 0.0;
  const double k = g.shape();
  return std::exp((k - 1.0) * std::log(r) - r / g.b - std::lgamma(k) - k * std::log(g.b));
}

double gamma_log_laplace(double s, const GammaFrailtyParams& g) {
  return -g.shape() * std::log1p(g.b * s);
}

double gamma_laplace(double s, const GammaFrailtyParams& g) {
  return std::exp(gamma_log_laplace(s, g));
}

double lognormal_frailty_pdf(double r, const LogNormalFrailtyParams& l) {
  if (!(r > 0.0)) return 0.0;
  const double z = (std::log(r) - l.m) / l.s;
  return std::exp(-0.5 * z * z) / (r * l.s * std::sqrt(2.0 * std::numbers::pi));
}

double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  // Box-Muller, one draw per call so the stream position is predictable.
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sample_standard_gamma(double shape, Rng& rng) {
  if (shape < 1.0) {
    const double g = sample_standard_gamma(shape + 1.0, rng);
    return g * std::pow(uniform01(rng), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = 0.0, v = 0.0;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform01(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_gamma_frailty(const GammaFrailtyParams& g, Rng& rng) {
  return g.b * sample_standard_gamma(g.shape(), rng);
}

double sample_lognormal_frailty(const LogNormalFrailtyParams& l, Rng& rng) {
  return std::exp(l.m + l.s * standard_normal(rng));
}

double sample_exponential(double rate, Rng& rng) { return -std::log(uniform01(rng)) / rate; }

}  // namespace exhaz
