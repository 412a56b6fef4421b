#pragma once

#include <span>
#include <vector>

#include "exhaz/distributions.hpp"

namespace exhaz {

// General hazard structure over an EW baseline:
//   h_E(t; x) = h0(t e^{x.beta1}) e^{x.beta2}
//   H_E(t; x) = H0(t e^{x.beta1}) e^{x.beta2 - x.beta1}
// beta1 = 0 gives PH, beta2 = 0 gives AH, beta1 = beta2 gives AFT.
struct GhParams {
  EwParams baseline;
  std::vector<double> beta1;  // time scale
  std::vector<double> beta2;  // hazard scale

  std::size_t dim() const { return beta1.size(); }
  void validate() const;
};

double dot(std::span<const double> a, std::span<const double> b);

double excess_log_hazard(double t, std::span<const double> x, const GhParams& p);
double excess_hazard(double t, std::span<const double> x, const GhParams& p);
double excess_cum_hazard(double t, std::span<const double> x, const GhParams& p);
double net_survival(double t, std::span<const double> x, const GhParams& p);

// Time t with net_survival(t, x, p) == u, for u in (0, 1).
double inverse_excess_survival(double u, std::span<const double> x, const GhParams& p);

}  // namespace exhaz
