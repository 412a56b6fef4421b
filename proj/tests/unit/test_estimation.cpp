#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "exhaz/error.hpp"
#include "exhaz/estimation.hpp"
#include "exhaz/simulation.hpp"
#include "oracles.hpp"

using namespace exhaz;

namespace {

const LifeTable& table() {
  static const LifeTable t = sim::reference_life_table();
  return t;
}

PreparedCohort simulated(std::size_t n, const char* scenario, std::uint64_t seed = 1) {
  auto sc = *sim::find_scenario(scenario);
  sc.n = n;
  sc.seed = seed;
  return PreparedCohort(sim::generate_cohort(sc, 0, table(), 0.05), table());
}

FitResult fake(Model m, double aic) {
  FitResult f;
  f.model = m;
  const std::size_t k = m == Model::M1 ? 9 : m == Model::M2 ? 10 : 11;
  f.names = ParamLayout(m, 3).names({"age", "sex", "W"});
  f.estimates = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k));
  if (m == Model::M2) f.estimates[9] = 1.8;
  if (m == Model::M3) f.estimates[9] = 6.4;
  f.aic = aic;
  f.converged = true;
  return f;
}

}  // namespace

TEST_CASE("normal_quantile") {
  CHECK(std::abs(normal_quantile(0.975) - 1.959964) < 1e-6);
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(normal_quantile(0.05) == doctest::Approx(-normal_quantile(0.95)).epsilon(1e-14));
}

TEST_CASE("confidence_intervals: zero SE, level, SEsUnavailable") {
  FitResult f = fake(Model::M1, 10.0);
  f.std_errors = Eigen::VectorXd::Zero(9);
  f.se_available = true;
  for (const auto& ci : confidence_intervals(f, 0.95)) {
    CHECK(ci.lo == 1.0);
    CHECK(ci.hi == 1.0);
  }
  f.std_errors = Eigen::VectorXd::Constant(9, 0.5);
  const auto ci = confidence_intervals(f, 0.9);
  CHECK(ci[0].hi - ci[0].lo == doctest::Approx(2 * 0.5 * normal_quantile(0.95)).epsilon(1e-14));
  f.se_available = false;
  try {
    confidence_intervals(f, 0.95);
    FAIL("expected SEsUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SEsUnavailable);
  }
}

TEST_CASE("select_m4: worked examples") {
  {
    const std::vector<FitResult> fits{fake(Model::M1, 100), fake(Model::M2, 102), fake(Model::M3, 103)};
    const auto s = select_m4(fits);
    CHECK(s.chosen == Model::M1);
    CHECK(s.c_hat == 1.0);
  }
  {
    const std::vector<FitResult> fits{fake(Model::M3, 100), fake(Model::M1, 100), fake(Model::M2, 105)};
    const auto s = select_m4(fits);
    CHECK(s.chosen == Model::M1);
    CHECK(s.index == 1);
  }
  {
    const std::vector<FitResult> fits{fake(Model::M1, 110), fake(Model::M2, 100), fake(Model::M3, 100)};
    const auto s = select_m4(fits);
    CHECK(s.chosen == Model::M2);
    CHECK(s.c_hat == 1.8);
  }
  {
    std::vector<FitResult> fits{fake(Model::M1, 110), fake(Model::M2, 105), fake(Model::M3, 90)};
    CHECK(select_m4(fits).c_hat == 6.4);
    fits[2].converged = false;
    const auto s = select_m4(fits);
    CHECK(s.chosen == Model::M2);
    CHECK(s.warnings.size() == 1);
    fits[0].converged = fits[1].converged = false;
    try {
      select_m4(fits);
      FAIL("expected NoEligibleFit");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoEligibleFit);
    }
  }
}

TEST_CASE("cda_warm_start: stationary point and separable quadratic") {
  const Eigen::Vector3d target(0.3, -1.2, 0.9);
  auto quad = [&](const Eigen::VectorXd& v) { return -(v - target).cwiseProduct(Eigen::Vector3d(1, 4, 0.5)).dot(v - target); };
  const auto still = cda_warm_start(quad, target);
  CHECK(still.phi == Eigen::VectorXd(target));
  CHECK(still.after == still.before);

  const auto moved = cda_warm_start(quad, Eigen::Vector3d(0.0, 0.0, 0.0));
  CHECK((moved.phi - target).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(moved.trace.size() == 3);
  double prev = moved.before;
  for (double v : moved.trace) {
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("cda_warm_start: improves the default start on a simulated cohort") {
  const auto c = simulated(1000, "none");
  const LogLikObjective obj(c, Model::M1);
  FitConfig cfg;
  const auto init = obj.layout().to_unconstrained(default_start(Model::M1, 3, cfg));
  const auto r = cda_warm_start([&](const Eigen::VectorXd& v) { return obj.value(v); }, init);
  CHECK(r.before == doctest::Approx(obj.value(init)));
  CHECK(r.after > r.before);
  CHECK(obj.value(r.phi) == doctest::Approx(r.after));
}

TEST_CASE("fit: AIC convention, delta-method SEs, determinism") {
  const auto c = simulated(1000, "none", 4);
  FitConfig cfg;
  cfg.model = Model::M1;
  const auto f1 = fit(c, cfg, {"age", "sex", "W"});
  REQUIRE(f1.converged);
  REQUIRE(f1.se_available);
  CHECK(f1.names.front() == "kappa");
  CHECK(f1.loglik_comparable == doctest::Approx(f1.loglik - c.sum_dhp()).epsilon(1e-14));
  CHECK(f1.aic == doctest::Approx(-2 * f1.loglik_comparable + 2 * 9).epsilon(1e-14));

  // Positive parameters: se_natural = estimate * se_log.
  for (Eigen::Index j = 0; j < 3; ++j)
    CHECK(f1.std_errors[j] == doctest::Approx(f1.estimates[j] * std::sqrt(f1.covariance(j, j))).epsilon(1e-14));

  // Oracle: invert the natural-scale Hessian of the log-likelihood directly.
  const ParamLayout layout(Model::M1, 3);
  auto nat_ll = [&](const Eigen::VectorXd& theta) {
    ModelParams p{{{theta[0], theta[1], theta[2]}, {theta[3], theta[4], theta[5]}, {theta[6], theta[7], theta[8]}},
                  std::monostate{}};
    return loglik(p, c);
  };
  const Eigen::VectorXd th = f1.estimates;
  Eigen::MatrixXd H(9, 9);
  for (int a = 0; a < 9; ++a)
    for (int b = 0; b < 9; ++b) {
      const double ha = 1e-4 * std::max(1.0, std::abs(th[a])), hb = 1e-4 * std::max(1.0, std::abs(th[b]));
      auto at = [&](double sa, double sb) {
        Eigen::VectorXd v = th;
        v[a] += sa * ha;
        v[b] += sb * hb;
        return nat_ll(v);
      };
      H(a, b) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * ha * hb);
    }
  const Eigen::MatrixXd cov = (-0.5 * (H + H.transpose())).inverse();
  for (int j = 0; j < 9; ++j) CHECK(std::abs(std::sqrt(cov(j, j)) / f1.std_errors[j] - 1.0) < 1e-3);

  const auto again = fit(c, cfg, {"age", "sex", "W"});
  CHECK(again.estimates == f1.estimates);
  CHECK(again.std_errors.cwiseEqual(f1.std_errors).count() == 9);
  CHECK(again.loglik == f1.loglik);

  cfg.multistarts = 2;
  cfg.seed = 99;
  const auto ms1 = fit(c, cfg), ms2 = fit(c, cfg);
  CHECK(ms1.estimates == ms2.estimates);
  CHECK(ms1.loglik >= f1.loglik - 1e-6);
}

TEST_CASE("fit: comparable AIC identity between M1 and M2 at gamma = 1") {
  const auto c = simulated(500, "none", 6);
  const GhParams g{{0.6, 1.75, 2.5}, {0.1, 0.1, 0.1}, {0.05, 0.2, 0.25}};
  const double l1 = loglik({g, std::monostate{}}, c) - c.sum_dhp();
  const double l2 = loglik({g, SingleCorrection{1.0}}, c);
  CHECK(std::abs(l1 - l2) <= 1e-10 * std::abs(l1));
}

TEST_CASE("fit: optimum passes the gradient gate and M2/M3 report consistent AIC") {
  const auto c = simulated(2000, "moderate", 3);
  FitConfig cfg;
  cfg.model = Model::M1;
  const auto f1 = fit(c, cfg);
  REQUIRE(f1.converged);
  for (Model m : {Model::M2, Model::M3}) {
    cfg.model = m;
    cfg.initial_gh = f1.params(3).gh;
    const auto f = fit(c, cfg);
    CHECK(f.converged);
    CHECK(f.gradient_max < 1e-3 * (1.0 + std::abs(f.loglik)));
    CHECK(f.loglik_comparable == f.loglik);
    CHECK(f.aic == doctest::Approx(-2 * f.loglik + 2.0 * static_cast<double>(f.parameter_count())).epsilon(1e-14));
    // Nested at gamma=1 / b->0: the richer model cannot fit worse than M1.
    CHECK(f.loglik_comparable >= f1.loglik_comparable - 1e-3);
  }
}

TEST_CASE("FitConfig validation") {
  FitConfig cfg;
  cfg.level = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.gradient_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
