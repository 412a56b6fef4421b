#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "exhaz/cohort.hpp"
#include "exhaz/likelihood.hpp"

namespace exhaz {

struct FitConfig {
  Model model = Model::M1;
  // Starting GH parameters; defaults to kappa = theta = 1, alpha = 2, beta = 0.
  std::optional<GhParams> initial_gh;
  double initial_gamma = 1.2;
  double initial_mu = 1.2;
  double initial_b = 0.1;

  bool warm_start = true;  // one coordinate-descent cycle before BFGS
  double gradient_tol = 1e-6;
  double step_tol = 1e-9;
  int max_evaluations = 2000;  // per stage

  int multistarts = 0;           // extra randomised starts
  double multistart_sd = 0.3;    // on the unconstrained scale
  std::uint64_t seed = 1;

  double level = 0.95;
  double hessian_step = 1e-4;

  void validate() const;
};

struct FitResult {
  Model model = Model::M1;
  std::vector<std::string> names;
  Eigen::VectorXd estimates;    // natural scale
  Eigen::VectorXd transformed;  // unconstrained scale
  Eigen::VectorXd std_errors;   // natural scale, delta method; NaN when unavailable
  Eigen::MatrixXd covariance;   // unconstrained scale
  bool se_available = false;    // false: SingularHessian
  double loglik = 0.0;          // model likelihood as defined for the model
  double loglik_comparable = 0.0;  // M1 adds back -sum dhp
  double aic = 0.0;
  bool converged = false;
  double gradient_max = 0.0;  // finite-difference max|dl/dphi| at the optimum
  int iterations = 0;
  int evaluations = 0;
  int starts = 1;
  int best_start = 0;
  std::vector<std::string> warnings;

  std::size_t parameter_count() const { return static_cast<std::size_t>(estimates.size()); }
  ModelParams params(std::size_t dim) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
};

// One pass of coordinate ascent in coordinate order; each coordinate is
// maximised with Brent's method on [value - radius, value + radius] and only
// accepted when it improves the objective.
struct CdaResult {
  Eigen::VectorXd phi;
  double before = 0.0;
  double after = 0.0;
  std::vector<double> trace;  // objective after each coordinate
  int evaluations = 0;
  std::vector<std::string> warnings;
};

CdaResult cda_warm_start(const std::function<double(const Eigen::VectorXd&)>& objective,
                         const Eigen::VectorXd& init, double radius = 2.0);

ModelParams default_start(Model model, std::size_t dim, const FitConfig& cfg);

FitResult fit(const PreparedCohort& cohort, const FitConfig& cfg,
              const std::vector<std::string>& x_names = {});

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

double normal_quantile(double p);

// Natural-scale Wald intervals; throws SEsUnavailable when SEs are missing.
std::vector<Interval> confidence_intervals(const FitResult& fit, double level);

struct M4Selection {
  Model chosen = Model::M1;
  std::size_t index = 0;  // position in the input span
  double c_hat = 1.0;     // 1, gamma-hat or mu-hat
  std::vector<std::string> warnings;
};

// Lowest comparable AIC among converged fits; ties go to fewer parameters.
M4Selection select_m4(std::span<const FitResult> fits);

}  // namespace exhaz
