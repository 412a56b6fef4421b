#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "exhaz/cohort.hpp"
#include "exhaz/distributions.hpp"
#include "exhaz/estimation.hpp"
#include "exhaz/gh_model.hpp"
#include "exhaz/lifetable.hpp"

namespace exhaz::sim {

// Every patient gets the same multiplier (mostly for smoke tests).
struct FixedFrailty {
  double value = 1.0;
};

using FrailtyLaw =
    std::variant<std::monostate, GammaFrailtyParams, LogNormalFrailtyParams, FixedFrailty>;

std::string describe(const FrailtyLaw& law);
double frailty_mean(const FrailtyLaw& law);
double frailty_variance(const FrailtyLaw& law);

struct CensoringSpec {
  double admin_time = 5.0;  // T_C, years
  // Exponential drop-out; either a known rate or a target overall censoring
  // proportion that is calibrated before the study runs.
  std::optional<double> dropout_rate;
  std::optional<double> target_censoring;
};

// Age: mixture of uniforms on half-open bins; sex and W: Bernoulli.
struct CovariateScheme {
  std::vector<double> age_breaks{30.0, 65.0, 75.0, 85.0};
  std::vector<double> age_weights{0.25, 0.35, 0.40};
  double sex_probability = 0.5;
  double w_probability = 0.5;
  double age_center = 70.0;
  double age_scale = 1.0;
};

struct ScenarioConfig {
  std::string name = "custom";
  std::size_t n = 5000;
  std::size_t replicates = 100;
  GhParams truth;
  FrailtyLaw frailty;
  CensoringSpec censoring;
  CovariateScheme covariates;
  double diagnosis_year = 2012.0;
  bool advance_year = true;
  std::uint64_t seed = 1;
  FitConfig fit;  // template; the model field is overwritten per fit

  void validate() const;
};

// Default truth: theta = 1.75, kappa = 0.6, alpha = 2.5,
// beta1 = (0.1, 0.1, 0.1), beta2 = (0.05, 0.2, 0.25) on (age, sex, W).
GhParams default_truth();

std::vector<ScenarioConfig> builtin_scenarios();
std::optional<ScenarioConfig> find_scenario(const std::string& name);

// Synthetic period life table (Gompertz-Makeham by sex, sex 1 = male, with a
// mild calendar improvement): ages 0-100, years 2000-2030, strata column `sex`.
LifeTable reference_life_table();

struct Covariates {
  Eigen::MatrixXd x;  // n x 3: transformed age, sex, W
  std::vector<double> age;
  std::vector<int> sex;
  std::vector<int> w;
};

Covariates generate_covariates(std::size_t n, Rng& rng, const CovariateScheme& scheme = {});

// Cohort with x = (age transform, sex, W) and z = (sex).
Cohort generate_cohort(const ScenarioConfig& sc, std::size_t replicate_index,
                       const LifeTable& table, std::optional<double> dropout_rate = {});

double censoring_proportion(const Cohort& cohort);

struct DropoutCalibration {
  double rate = 0.0;
  double achieved = 0.0;        // pilot censoring at `rate`
  double admin_only = 0.0;      // pilot censoring with no drop-out
  std::size_t pilot_size = 0;
};

// Bisection (on log r over [1e-6, 10]) until the pilot censoring proportion is
// within 0.5 percentage points of the target. Common random numbers keep the
// pilot proportion monotone in r.
DropoutCalibration calibrate_dropout_rate(const ScenarioConfig& sc, double target,
                                          const LifeTable& table, std::size_t pilot_size = 100000);

struct ParameterMetrics {
  std::string name;
  double truth = 0.0;
  double mmle = 0.0;
  double mmedian = 0.0;
  double esd = 0.0;
  double mean_se = 0.0;   // NaN when no SEs exist (M4 correction)
  double rmse = 0.0;
  double coverage = 0.0;  // NaN when no SEs exist
  std::size_t count = 0;
  std::size_t se_count = 0;
};

struct ModelMetrics {
  std::string model;  // M1..M4
  std::vector<ParameterMetrics> parameters;
  std::size_t included = 0;
  std::size_t failures = 0;   // not converged or errored
  std::size_t selected = 0;   // AIC selections (M1..M3)
  double selection_proportion = 0.0;
};

struct ReplicateOutcome {
  bool ok = false;
  std::string error;
  double censoring = 0.0;
  std::vector<FitResult> fits;  // M1, M2, M3
  std::optional<M4Selection> m4;
};

struct StudyMetrics {
  std::string scenario;
  std::size_t replicates = 0;
  std::optional<DropoutCalibration> calibration;
  double mean_censoring = 0.0;
  std::vector<ModelMetrics> models;  // M1, M2, M3, M4
  std::vector<ReplicateOutcome> outcomes;

  const ModelMetrics& model(std::string_view name) const;
  const ParameterMetrics& parameter(std::string_view model, std::string_view param) const;
};

// Fits M1, M2, M3 (M2/M3 started from the M1 estimates) and applies M4 selection.
ReplicateOutcome run_replicate(const ScenarioConfig& sc, std::size_t index,
                               const LifeTable& table, std::optional<double> dropout_rate);

// Truth for every parameter name of `model` under the scenario; M2/M3
// correction truths are the frailty mean and variance/mean.
std::vector<double> truth_vector(const ScenarioConfig& sc, Model model);

StudyMetrics summarize(const ScenarioConfig& sc, std::vector<ReplicateOutcome> outcomes);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

// Replicate i uses seed base + i; results are reduced in replicate order so the
// output does not depend on `jobs`.
StudyMetrics run_study(const ScenarioConfig& sc, const LifeTable& table, unsigned jobs = 1,
                       const ProgressFn& progress = {});

}  // namespace exhaz::sim
