#include "exhaz/gh_model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "exhaz/error.hpp"

namespace exhaz {

void GhParams::validate() const {
  baseline.validate();
  if (beta1.size() != beta2.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("beta1 has {} entries but beta2 has {}", beta1.size(), beta2.size()));
  }
  for (std::size_t j = 0; j < beta1.size(); ++j) {
    if (!std::isfinite(beta1[j]) || !std::isfinite(beta2[j]))
      throw Error(ErrorCode::Config, "GH coefficients must be finite");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("covariate vector has {} entries, coefficients have {}", a.size(),
                            b.size()));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double excess_log_hazard(double t, std::span<const double> x, const GhParams& p) {
  const double eta1 = dot(x, p.beta1);
  const double eta2 = dot(x, p.beta2);
  return ew_log_hazard(t * std::exp(eta1), p.baseline) + eta2;
}

double excess_hazard(double t, std::span<const double> x, const GhParams& p) {
  const double eta1 = dot(x, p.beta1);
  const double eta2 = dot(x, p.beta2);
  return ew_hazard(t * std::exp(eta1), p.baseline) * std::exp(eta2);
}

double excess_cum_hazard(double t, std::span<const double> x, const GhParams& p) {
  if (t == 0.0) return 0.0;
  const double eta1 = dot(x, p.beta1);
  const double eta2 = dot(x, p.beta2);
  return ew_cum_hazard(t * std::exp(eta1), p.baseline) * std::exp(eta2 - eta1);
}

double net_survival(double t, std::span<const double> x, const GhParams& p) {
  return std::exp(-excess_cum_hazard(t, x, p));
}

double inverse_excess_survival(double u, std::span<const double> x, const GhParams& p) {
  const double eta1 = dot(x, p.beta1);
  const double eta2 = dot(x, p.beta2);
  const double target = -std::log(u) * std::exp(eta1 - eta2);
  return ew_time_at_cum_hazard(target, p.baseline) * std::exp(-eta1);
}

}  // namespace exhaz
