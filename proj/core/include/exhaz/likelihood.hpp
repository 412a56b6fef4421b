#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "exhaz/cohort.hpp"
#include "exhaz/distributions.hpp"
#include "exhaz/gh_model.hpp"
#include "exhaz/lifetable.hpp"

namespace exhaz {

// M1: classical additive; M2: single multiplicative correction gamma on the
// background hazard; M3: Gamma-frailty correction (mu, b).
enum class Model { M1, M2, M3 };

std::string_view to_string(Model m);
Model parse_model(std::string_view name);

struct SingleCorrection {
  double gamma = 1.0;
};

struct ModelParams {
  GhParams gh;
  std::variant<std::monostate, SingleCorrection, GammaFrailtyParams> correction;

  Model model() const;
  void validate() const;
};

// mu / (1 + b * dhp): the M3 multiplier on the background hazard.
double omega1(double dhp, const GammaFrailtyParams& g);

// Observed hazard at follow-up time t: c * hp + h_E(t; x) where c is 1, gamma,
// or omega1(dhp) depending on the model.
double overall_hazard(double t, std::span<const double> x, const ModelParams& params,
                      double hp, double dhp);

// exp(-H_E(t; x)) / (1 + b dhp)^(mu / b)
double marginal_survival_m3(double t, std::span<const double> x, const ModelParams& params,
                            double dhp);
// Same, with dhp taken from the life table along the patient's Lexis path.
double marginal_survival_m3(double t, const PatientRecord& rec, const ModelParams& params,
                            const LifeTable& table, bool advance_year = true);

// Full log-likelihood. M1 omits the parameter-free background survival term
// (so it is not directly comparable with M2/M3 without adding -sum dhp back).
// Throws NonFiniteLikelihood naming the first offending patient.
double loglik(const ModelParams& params, const PreparedCohort& cohort);

// Unconstrained coordinates used by the optimiser, in the fixed order
//   log kappa, log theta, log alpha, beta1[0..p), beta2[0..p),
//   then log gamma (M2) or log mu, log b (M3).
class ParamLayout {
 public:
  ParamLayout(Model model, std::size_t dim) : model_(model), dim_(dim) {}

  Model model() const { return model_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const;
  std::size_t beta1_offset() const { return 3; }
  std::size_t beta2_offset() const { return 3 + dim_; }
  std::size_t correction_offset() const { return 3 + 2 * dim_; }
  // Whether coordinate k is a log-transformed positive parameter.
  bool is_log(std::size_t k) const;

  // Throws NonPositive for non-positive natural-scale inputs.
  Eigen::VectorXd to_unconstrained(const ModelParams& params) const;
  ModelParams to_natural(const Eigen::VectorXd& phi) const;

  // Values on the natural scale in the same order as the unconstrained vector.
  Eigen::VectorXd natural_values(const Eigen::VectorXd& phi) const;
  std::vector<std::string> names(const std::vector<std::string>& x_names) const;

 private:
  Model model_;
  std::size_t dim_;
};

// Log-likelihood as a function of the unconstrained vector, with its analytic
// gradient. Immutable; safe to share across threads.
class LogLikObjective {
 public:
  LogLikObjective(const PreparedCohort& cohort, Model model)
      : cohort_(&cohort), layout_(model, cohort.dim()) {}

  const ParamLayout& layout() const { return layout_; }
  const PreparedCohort& cohort() const { return *cohort_; }

  double value(const Eigen::VectorXd& phi) const { return evaluate(phi, nullptr); }
  // grad may be null.
  double evaluate(const Eigen::VectorXd& phi, Eigen::VectorXd* grad) const;

 private:
  const PreparedCohort* cohort_;
  ParamLayout layout_;
};

}  // namespace exhaz
