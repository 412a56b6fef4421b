#include <doctest.h>

#include <cmath>
#include <random>

#include "exhaz/distributions.hpp"
#include "exhaz/error.hpp"
#include "oracles.hpp"

using namespace exhaz;

namespace {
const EwParams kTruth{0.6, 1.75, 2.5};

double weibull_pdf(double t, double k, double th) {
  return (k / th) * std::pow(t / th, k - 1.0) * std::exp(-std::pow(t / th, k));
}
}  // namespace

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS((EwParams{0.0, 1.0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((EwParams{1.0, -1.0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((GammaFrailtyParams{1.0, 0.0}.validate()), Error);
  CHECK_THROWS_AS((LogNormalFrailtyParams{0.0, 0.0}.validate()), Error);
  CHECK_NOTHROW((EwParams{0.6, 1.75, 2.5}.validate()));
  CHECK(GammaFrailtyParams{6.5, 10.0}.shape() == doctest::Approx(0.65));
}

TEST_CASE("ew_pdf: worked examples") {
  for (double t : {0.05, 0.5, 1.0, 3.0, 9.0}) {
    CHECK(ew_pdf(t, {0.8, 2.0, 1.0}) == doctest::Approx(weibull_pdf(t, 0.8, 2.0)).epsilon(1e-13));
  }
  CHECK(ew_pdf(1.0, {1.0, 1.0, 1.0}) == doctest::Approx(0.367879441171442).epsilon(1e-14));
  const double fd = oracle::central_difference([](double t) { return ew_cdf(t, kTruth); }, 2.0, 1e-5);
  CHECK(std::abs(ew_pdf(2.0, kTruth) - fd) < 1e-8);
  CHECK(ew_pdf(0.0, kTruth) == 0.0);
  CHECK(ew_pdf(-1.0, kTruth) == 0.0);
}

TEST_CASE("ew_cdf: worked examples") {
  for (double k : {0.3, 1.0, 2.7})
    for (double a : {0.5, 1.0, 4.0})
      CHECK(ew_cdf(3.0, {k, 3.0, a}) == doctest::Approx(std::pow(1.0 - std::exp(-1.0), a)).epsilon(1e-14));
  CHECK(ew_cdf(0.0, kTruth) == 0.0);
  const double q = oracle::integrate([](double t) { return ew_pdf(t, kTruth); }, 0.0, 5.0);
  CHECK(std::abs(ew_cdf(5.0, kTruth) - q) < 1e-8);
  CHECK(ew_cdf(5.0, kTruth) > 0.0);
  CHECK(ew_cdf(5.0, kTruth) < 1.0);
}

TEST_CASE("ew_hazard / ew_cum_hazard: worked examples") {
  for (double t : {0.01, 0.3, 2.0, 15.0}) CHECK(ew_hazard(t, {1.0, 4.0, 1.0}) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(ew_cum_hazard(0.0, kTruth) == 0.0);

  // Unimodal hazard for the default truth.
  double best_t = 0.0, best_h = -1.0;
  for (int i = 1; i <= 2000; ++i) {
    const double t = 20.0 * i / 2000.0;
    const double h = ew_hazard(t, kTruth);
    if (h > best_h) {
      best_h = h;
      best_t = t;
    }
  }
  CHECK(best_t > 0.1);
  CHECK(best_t < 20.0);
  CHECK(ew_hazard(0.1, kTruth) < best_h);
  CHECK(ew_hazard(20.0, kTruth) < best_h);
}

TEST_CASE("ew_hazard: overflow is signalled, log forms stay finite") {
  const EwParams p{1.0, 1.0, 1.0};
  CHECK(std::isfinite(ew_log_survival(800.0, p)));
  CHECK(ew_log_survival(800.0, p) == doctest::Approx(-800.0));
  CHECK(std::isfinite(ew_log_hazard(800.0, {2.0, 1.0, 3.0})));
  CHECK_THROWS_AS(ew_cum_hazard(std::numeric_limits<double>::infinity(), p), Error);
}

TEST_CASE("ew_quantile: worked examples") {
  for (double u : {0.01, 0.5, 0.99}) CHECK(ew_cdf(ew_quantile(u, kTruth), kTruth) == doctest::Approx(u).epsilon(1e-12));
  const double a = 2.5;
  CHECK(ew_quantile(std::pow(1.0 - std::exp(-1.0), a), kTruth) == doctest::Approx(1.75).epsilon(1e-12));
  const double median = oracle::bisect([](double t) { return ew_cdf(t, kTruth); }, 0.5, 0.0, 100.0);
  CHECK(std::abs(ew_quantile(0.5, kTruth) - median) < 1e-10);
}

TEST_CASE("ew_time_at_cum_hazard inverts the cumulative hazard") {
  for (double h : {1e-8, 0.01, 0.7, 5.0, 40.0}) {
    const double t = ew_time_at_cum_hazard(h, kTruth);
    CHECK(ew_cum_hazard(t, kTruth) == doctest::Approx(h).epsilon(1e-10));
  }
  CHECK(ew_time_at_cum_hazard(0.0, kTruth) == 0.0);
}

TEST_CASE("property: EW pdf integrates to one, cdf monotone, cum hazard = integral of hazard") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> k(0.3, 3.0), th(0.5, 5.0), al(0.5, 5.0);
  for (int rep = 0; rep < 25; ++rep) {
    const EwParams p{k(rng), th(rng), al(rng)};
    // pdf ~ t^(kappa*alpha - 1) near zero; the head goes through a power substitution.
    const double q = std::max(1.0, 2.0 / (p.kappa * p.alpha));
    const double mass = oracle::integrate_from_zero([&](double t) { return ew_pdf(t, p); }, p.theta, q) +
                        oracle::integrate_to_inf([&](double t) { return ew_pdf(t, p); }, p.theta, 2.0 * p.theta);
    CHECK(std::abs(mass - 1.0) < 1e-6);

    double prev = 0.0;
    for (int i = 1; i <= 200; ++i) {
      const double t = 0.1 * i;
      const double F = ew_cdf(t, p);
      CHECK(std::isfinite(F));
      CHECK(F >= prev);
      prev = F;
      // The inverse is ill-conditioned once 1 - F is tiny.
      if (i % 20 == 0 && 1.0 - F > 1e-6) {
        CHECK(ew_quantile(F, p) == doctest::Approx(t).epsilon(1e-10));
      }
    }
    for (double t : {0.5, 2.0, 6.0}) {
      if (1.0 - ew_cdf(t, p) <= 1e-12) continue;
      const double q = oracle::integrate_from_zero([&](double s) { return ew_hazard(s, p); }, t,
                                                   std::max(1.0, 2.0 / (p.kappa * p.alpha)), 1e-14);
      CHECK(std::abs(ew_cum_hazard(t, p) - q) < 1e-8);
    }
  }
}

TEST_CASE("gamma_frailty_pdf: worked examples") {
  for (double r : {0.1, 1.0, 5.0}) {
    CHECK(gamma_frailty_pdf(r, {2.0, 2.0}) == doctest::Approx(0.5 * std::exp(-r / 2.0)).epsilon(1e-13));
  }
  const GammaFrailtyParams wide{6.5, 10.0};
  const double mass = oracle::integrate_to_inf([&](double r) { return gamma_frailty_pdf(r, wide); }, 0.0, 10.0);
  const double mean = oracle::integrate_to_inf([&](double r) { return r * gamma_frailty_pdf(r, wide); }, 0.0, 10.0);
  const double second = oracle::integrate_to_inf([&](double r) { return r * r * gamma_frailty_pdf(r, wide); }, 0.0, 10.0);
  CHECK(std::abs(mass - 1.0) < 1e-8);
  CHECK(std::abs(mean - 6.5) < 1e-6);
  CHECK(second - mean * mean == doctest::Approx(65.0).epsilon(1e-6));

  const GammaFrailtyParams moderate{1.2, 0.02};
  CHECK(std::sqrt(moderate.mu * moderate.b) == doctest::Approx(0.155).epsilon(0.01));
  const double near = oracle::integrate([&](double r) { return gamma_frailty_pdf(r, moderate); }, 1.2 - 0.5, 1.2 + 0.5);
  CHECK(near > 0.99);
}

TEST_CASE("gamma_laplace: worked examples and oracle grid") {
  CHECK(gamma_laplace(0.0, {6.5, 10.0}) == 1.0);
  auto quad_laplace = [](double s, GammaFrailtyParams g) {
    return oracle::integrate_to_inf([&](double r) { return std::exp(-s * r) * gamma_frailty_pdf(r, g); }, 0.0,
                                    std::max(g.mu, 1.0));
  };
  CHECK(std::abs(gamma_laplace(0.3, {6.5, 10.0}) - quad_laplace(0.3, {6.5, 10.0})) < 1e-8);
  CHECK(gamma_laplace(0.5, {1.2, 1e-8}) == doctest::Approx(std::exp(-0.6)).epsilon(1e-6));

  for (double mu : {1.2, 1.875, 6.5})
    for (double b : {0.02, 0.075, 10.0}) {
      double prev = 1.0;
      for (int i = 0; i <= 10; ++i) {
        const double s = 0.5 * i;
        const GammaFrailtyParams g{mu, b};
        const double v = gamma_laplace(s, g);
        CHECK(std::isfinite(v));
        CHECK(std::abs(v - quad_laplace(s, g)) < 1e-8);
        CHECK(std::exp(gamma_log_laplace(s, g)) == doctest::Approx(v).epsilon(1e-13));
        if (i > 0) CHECK(v < prev);
        prev = v;
      }
    }
}

TEST_CASE("lognormal_frailty_pdf integrates to one") {
  const LogNormalFrailtyParams l{1.406, 0.965};
  const double mass = oracle::integrate_to_inf([&](double r) { return lognormal_frailty_pdf(r, l); }, 0.0, 4.0);
  CHECK(std::abs(mass - 1.0) < 1e-8);
}

TEST_CASE("samplers: moment checks") {
  Rng rng(2024);
  const int n = 100000;
  auto moments = [&](auto draw) {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = draw();
      s += v;
      s2 += v * v;
    }
    const double m = s / n;
    return std::pair{m, (s2 - n * m * m) / (n - 1)};
  };
  const auto [m_wide, v_wide] = moments([&] { return sample_gamma_frailty({6.5, 10.0}, rng); });
  CHECK(std::abs(m_wide - 6.5) < 0.2);
  CHECK(std::abs(v_wide - 65.0) < 5.0);
  const auto [m_sev, v_sev] = moments([&] { return sample_gamma_frailty({1.875, 0.075}, rng); });
  CHECK(std::abs(m_sev - 1.875) < 0.01);
  (void)v_sev;
  for (int i = 0; i < 1000; ++i) CHECK(sample_lognormal_frailty({0.0, 1e-6}, rng) == doctest::Approx(1.0).epsilon(1e-4));

  const auto [m_ln, v_ln] = moments([&] { return sample_lognormal_frailty({0.0, 0.5}, rng); });
  CHECK(m_ln == doctest::Approx(std::exp(0.125)).epsilon(0.01));
  (void)v_ln;
  const auto [m_ex, v_ex] = moments([&] { return sample_exponential(2.0, rng); });
  CHECK(m_ex == doctest::Approx(0.5).epsilon(0.01));
  (void)v_ex;
}

TEST_CASE("samplers: gamma draws pass a DKW band against the gamma cdf") {
  Rng rng(99);
  const GammaFrailtyParams g{6.5, 10.0};
  std::vector<double> xs(10000);
  for (auto& x : xs) x = sample_gamma_frailty(g, rng);
  auto cdf = [&](double r) {
    return oracle::integrate([&](double v) { return gamma_frailty_pdf(v, g); }, 0.0, r, 1e-10);
  };
  // The cdf oracle is slow; compare on a 40-point grid instead of every sample.
  std::sort(xs.begin(), xs.end());
  double worst = 0.0;
  for (int k = 1; k < 40; ++k) {
    const double r = xs[static_cast<std::size_t>(k * xs.size() / 40)];
    const double emp = static_cast<double>(std::upper_bound(xs.begin(), xs.end(), r) - xs.begin()) / xs.size();
    worst = std::max(worst, std::abs(emp - cdf(r)));
  }
  CHECK(worst < oracle::dkw_epsilon(xs.size(), 0.01));
}

TEST_CASE("samplers: uniform01 is in the open interval and deterministic") {
  Rng a(5), b(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(a);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    CHECK(u == uniform01(b));
  }
}
