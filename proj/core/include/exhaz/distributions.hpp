#pragma once

#include <cstdint>
#include <random>

namespace exhaz {

// Exponentiated Weibull baseline: F(t) = [1 - exp{-(t/theta)^kappa}]^alpha.
struct EwParams {
  double kappa = 1.0;  // shape
  double theta = 1.0;  // scale (years)
  double alpha = 1.0;  // power

  void validate() const;
};

// Gamma frailty in mean/scale form: shape mu/b, scale b, mean mu, variance mu*b.
struct GammaFrailtyParams {
  double mu = 1.0;
  double b = 1.0;

  double shape() const { return mu / b; }
  void validate() const;
};

struct LogNormalFrailtyParams {
  double m = 0.0;  // mean of log
  double s = 1.0;  // sd of log

  void validate() const;
};

// log(1 - exp(a)) for a <= 0, accurate across the whole range.
double log1mexp(double a);

double ew_pdf(double t, const EwParams& p);
double ew_cdf(double t, const EwParams& p);
// log(1 - F(t)); stays finite far into the upper tail.
double ew_log_survival(double t, const EwParams& p);
double ew_log_hazard(double t, const EwParams& p);
double ew_hazard(double t, const EwParams& p);
double ew_cum_hazard(double t, const EwParams& p);
double ew_quantile(double u, const EwParams& p);
// Time at which the baseline cumulative hazard equals h (h >= 0).
double ew_time_at_cum_hazard(double h, const EwParams& p);

double gamma_frailty_pdf(double r, const GammaFrailtyParams& g);
// Laplace transform E[exp(-s R)] = (1 + b s)^(-mu/b).
double gamma_laplace(double s, const GammaFrailtyParams& g);
double gamma_log_laplace(double s, const GammaFrailtyParams& g);

double lognormal_frailty_pdf(double r, const LogNormalFrailtyParams& l);

using Rng = std::mt19937_64;

// Uniform on the open interval (0, 1) with 53 random bits.
double uniform01(Rng& rng);
double standard_normal(Rng& rng);
// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 via the U^(1/shape) boost.
double sample_standard_gamma(double shape, Rng& rng);
double sample_gamma_frailty(const GammaFrailtyParams& g, Rng& rng);
double sample_lognormal_frailty(const LogNormalFrailtyParams& l, Rng& rng);
double sample_exponential(double rate, Rng& rng);

}  // namespace exhaz
