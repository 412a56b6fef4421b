#include "exhaz/estimation.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "exhaz/error.hpp"
#include "exhaz/optimize.hpp"

namespace exhaz {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void FitConfig::validate() const {
  if (!(gradient_tol > 0.0) || !(step_tol > 0.0) || max_evaluations <= 0)
    throw Error(ErrorCode::Config, "optimiser tolerances must be positive");
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::Config, fmt::format("CI level must be in (0,1), got {}", level));
  if (!(hessian_step > 0.0)) throw Error(ErrorCode::Config, "hessian step must be positive");
  if (multistarts < 0) throw Error(ErrorCode::Config, "multistarts must be >= 0");
}

ModelParams FitResult::params(std::size_t dim) const {
  const ParamLayout layout(model, dim);
  if (transformed.size() == estimates.size()) return layout.to_natural(transformed);
  // Read back from a file: only the natural-scale estimates exist. Go through
  // the layout for the shape, then put the exact values back.
  Eigen::VectorXd phi = estimates;
  for (Eigen::Index j = 0; j < phi.size(); ++j)
    if (layout.is_log(static_cast<std::size_t>(j))) phi[j] = std::log(phi[j]);
  ModelParams p = layout.to_natural(phi);
  p.gh.baseline = {estimates[0], estimates[1], estimates[2]};
  const auto c = static_cast<Eigen::Index>(layout.correction_offset());
  if (auto* g = std::get_if<SingleCorrection>(&p.correction)) g->gamma = estimates[c];
  if (auto* g = std::get_if<GammaFrailtyParams>(&p.correction)) *g = {estimates[c], estimates[c + 1]};
  return p;
}

std::optional<std::size_t> FitResult::index_of(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return k;
  return std::nullopt;
}

CdaResult cda_warm_start(const std::function<double(const Eigen::VectorXd&)>& objective,
                         const Eigen::VectorXd& init, double radius) {
  CdaResult r;
  r.phi = init;
  double current = objective(init);
  ++r.evaluations;
  if (!std::isfinite(current))
    throw NonFiniteLikelihood(0, "objective is not finite at the warm-start point");
  r.before = current;
  for (Eigen::Index k = 0; k < init.size(); ++k) {
    Eigen::VectorXd trial = r.phi;
    const double centre = r.phi[k];
    auto neg = [&](double v) {
      trial[k] = v;
      return -objective(trial);
    };
    const auto best = opt::minimize_brent(neg, centre - radius, centre + radius, 1e-8, 200);
    r.evaluations += best.evaluations;
    if (!std::isfinite(best.f)) {
      r.warnings.push_back(fmt::format("coordinate {}: no finite value found, kept", k));
    } else if (-best.f > current) {
      r.phi[k] = best.x;
      current = -best.f;
    }
    r.trace.push_back(current);
  }
  r.after = current;
  return r;
}

ModelParams default_start(Model model, std::size_t dim, const FitConfig& cfg) {
  ModelParams p;
  if (cfg.initial_gh) {
    p.gh = *cfg.initial_gh;
  } else {
    p.gh.baseline = {1.0, 1.0, 2.0};
    p.gh.beta1.assign(dim, 0.0);
    p.gh.beta2.assign(dim, 0.0);
  }
  switch (model) {
    case Model::M1: break;
    case Model::M2: p.correction = SingleCorrection{cfg.initial_gamma}; break;
    case Model::M3: p.correction = GammaFrailtyParams{cfg.initial_mu, cfg.initial_b}; break;
  }
  return p;
}

namespace {

struct StartOutcome {
  opt::BfgsResult bfgs;
  std::vector<std::string> warnings;
  int evaluations = 0;
};

StartOutcome run_start(const LogLikObjective& ll, const Eigen::VectorXd& start,
                       const FitConfig& cfg) {
  StartOutcome out;
  Eigen::VectorXd phi = start;
  if (cfg.warm_start) {
    auto value = [&](const Eigen::VectorXd& v) {
      try {
        return ll.value(v);
      } catch (const Error&) {
        return -std::numeric_limits<double>::infinity();
      }
    };
    auto cda = cda_warm_start(value, phi);
    phi = cda.phi;
    out.evaluations += cda.evaluations;
    out.warnings = std::move(cda.warnings);
  }
  opt::BfgsOptions bo;
  bo.gradient_tol = cfg.gradient_tol;
  bo.step_tol = cfg.step_tol;
  bo.max_evaluations = cfg.max_evaluations;
  const opt::Objective neg = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
    const double f = -ll.evaluate(v, g);
    if (g != nullptr) *g = -*g;
    return f;
  };
  out.bfgs = opt::minimize_bfgs(neg, phi, bo);
  out.evaluations += out.bfgs.evaluations;
  return out;
}

}  // namespace

FitResult fit(const PreparedCohort& cohort, const FitConfig& cfg,
              const std::vector<std::string>& x_names) {
  cfg.validate();
  if (cohort.size() == 0) throw Error(ErrorCode::Config, "cannot fit an empty cohort");
  if (cohort.events() == 0) throw Error(ErrorCode::Config, "cohort has no events (status = 1)");

  const LogLikObjective ll(cohort, cfg.model);
  const ParamLayout& layout = ll.layout();
  const Eigen::VectorXd phi0 = layout.to_unconstrained(default_start(cfg.model, cohort.dim(), cfg));

  FitResult res;
  res.model = cfg.model;
  res.names = layout.names(x_names);

  Rng rng(cfg.seed);
  bool have_best = false;
  opt::BfgsResult best;
  for (int s = 0; s <= cfg.multistarts; ++s) {
    Eigen::VectorXd start = phi0;
    if (s > 0) {
      for (Eigen::Index k = 0; k < start.size(); ++k)
        start[k] += cfg.multistart_sd * standard_normal(rng);
    }
    StartOutcome out;
    try {
      out = run_start(ll, start, cfg);
    } catch (const Error& e) {
      res.warnings.push_back(fmt::format("start {}: {}", s, e.what()));
      continue;
    }
    res.evaluations += out.evaluations;
    for (auto& w : out.warnings) res.warnings.push_back(fmt::format("start {}: {}", s, w));
    if (out.bfgs.termination == opt::Termination::BadStart) continue;
    if (!have_best || out.bfgs.f < best.f) {
      best = std::move(out.bfgs);
      res.best_start = s;
      have_best = true;
    }
  }
  res.starts = cfg.multistarts + 1;
  if (!have_best) {
    throw NonFiniteLikelihood(0, "log-likelihood is not finite at any starting point");
  }

  res.transformed = best.x;
  res.estimates = layout.natural_values(best.x);
  res.loglik = -best.f;
  res.iterations = best.iterations;
  res.loglik_comparable = cfg.model == Model::M1 ? res.loglik - cohort.sum_dhp() : res.loglik;
  res.aic = -2.0 * res.loglik_comparable + 2.0 * static_cast<double>(layout.size());

  const opt::Objective neg = [&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
    const double f = -ll.evaluate(v, g);
    if (g != nullptr) *g = -*g;
    return f;
  };

  bool grad_ok = false;
  try {
    res.gradient_max = opt::central_gradient(neg, best.x, 1e-5).lpNorm<Eigen::Infinity>();
    grad_ok = res.gradient_max < 1e-3 * (1.0 + std::abs(res.loglik));
  } catch (const Error& e) {
    res.gradient_max = kNaN;
    res.warnings.push_back(fmt::format("gradient check failed: {}", e.what()));
  }
  const bool optimiser_ok = best.termination != opt::Termination::EvaluationLimit &&
                            best.termination != opt::Termination::BadStart;
  res.converged = optimiser_ok && grad_ok;
  if (!res.converged) res.warnings.emplace_back("NotConverged");

  const auto k = static_cast<Eigen::Index>(layout.size());
  res.std_errors = Eigen::VectorXd::Constant(k, kNaN);
  res.covariance = Eigen::MatrixXd::Constant(k, k, kNaN);
  try {
    const Eigen::MatrixXd info = opt::hessian_from_gradient(neg, best.x, cfg.hessian_step);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    if (eig.info() == Eigen::Success && info.allFinite() && eig.eigenvalues().minCoeff() > 0.0) {
      const Eigen::VectorXd inv = eig.eigenvalues().cwiseMax(1e-10).cwiseInverse();
      res.covariance = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
      for (Eigen::Index j = 0; j < k; ++j) {
        const double se = std::sqrt(res.covariance(j, j));
        res.std_errors[j] = layout.is_log(static_cast<std::size_t>(j)) ? res.estimates[j] * se : se;
      }
      res.se_available = true;
    } else {
      res.warnings.emplace_back("SingularHessian");
    }
  } catch (const Error& e) {
    res.warnings.push_back(fmt::format("SingularHessian: {}", e.what()));
  }
  return res;
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

std::vector<Interval> confidence_intervals(const FitResult& fit, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::Config, fmt::format("CI level must be in (0,1), got {}", level));
  if (!fit.se_available) {
    throw Error(ErrorCode::SEsUnavailable,
                fmt::format("{} fit has no standard errors (Hessian not positive definite)",
                            to_string(fit.model)));
  }
  const double zq = normal_quantile(0.5 * (1.0 + level));
  std::vector<Interval> out;
  for (Eigen::Index j = 0; j < fit.estimates.size(); ++j) {
    const double half = zq * fit.std_errors[j];
    out.push_back({fit.estimates[j] - half, fit.estimates[j] + half});
  }
  return out;
}

M4Selection select_m4(std::span<const FitResult> fits) {
  M4Selection sel;
  bool found = false;
  const FitResult* chosen = nullptr;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    if (!f.converged) {
      sel.warnings.push_back(fmt::format("{} excluded: not converged", to_string(f.model)));
      continue;
    }
    if (!found) {
      chosen = &f;
      sel.index = i;
      found = true;
      continue;
    }
    const double tie_tol = 1e-9 * std::max(1.0, std::abs(chosen->aic));
    const bool better = f.aic < chosen->aic - tie_tol;
    const bool tie_fewer = std::abs(f.aic - chosen->aic) <= tie_tol &&
                           f.parameter_count() < chosen->parameter_count();
    if (better || tie_fewer) {
      chosen = &f;
      sel.index = i;
    }
  }
  if (!found) throw Error(ErrorCode::NoEligibleFit, "no converged fit available for selection");
  sel.chosen = chosen->model;
  switch (chosen->model) {
    case Model::M1: sel.c_hat = 1.0; break;
    case Model::M2: sel.c_hat = chosen->estimates[*chosen->index_of("gamma")]; break;
    case Model::M3: sel.c_hat = chosen->estimates[*chosen->index_of("mu")]; break;
  }
  return sel;
}

}  // namespace exhaz
