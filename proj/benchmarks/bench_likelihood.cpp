#include <map>

#include <benchmark/benchmark.h>

#include "exhaz/estimation.hpp"
#include "exhaz/likelihood.hpp"
#include "exhaz/simulation.hpp"

using namespace exhaz;

namespace {

const PreparedCohort& cohort(std::size_t n) {
  static const LifeTable table = sim::reference_life_table();
  static std::map<std::size_t, PreparedCohort> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto sc = *sim::find_scenario("wide");
    sc.n = n;
    it = cache.emplace(n, PreparedCohort(sim::generate_cohort(sc, 0, table, 0.05), table)).first;
  }
  return it->second;
}

ModelParams params(Model m) {
  ModelParams p{sim::default_truth(), std::monostate{}};
  if (m == Model::M2) p.correction = SingleCorrection{6.5};
  if (m == Model::M3) p.correction = GammaFrailtyParams{6.5, 10.0};
  return p;
}

void BM_Loglik(benchmark::State& state) {
  const auto m = static_cast<Model>(state.range(0));
  const auto& c = cohort(static_cast<std::size_t>(state.range(1)));
  const LogLikObjective obj(c, m);
  const Eigen::VectorXd phi = obj.layout().to_unconstrained(params(m));
  for (auto _ : state) benchmark::DoNotOptimize(obj.value(phi));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Loglik)->ArgsProduct({{0, 1, 2}, {1000, 5000}});

void BM_LoglikGradient(benchmark::State& state) {
  const auto m = static_cast<Model>(state.range(0));
  const auto& c = cohort(5000);
  const LogLikObjective obj(c, m);
  const Eigen::VectorXd phi = obj.layout().to_unconstrained(params(m));
  Eigen::VectorXd g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(obj.evaluate(phi, &g));
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * 5000);
}
BENCHMARK(BM_LoglikGradient)->DenseRange(0, 2);

void BM_FitM1(benchmark::State& state) {
  const auto& c = cohort(static_cast<std::size_t>(state.range(0)));
  FitConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(fit(c, cfg).loglik);
}
BENCHMARK(BM_FitM1)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_MarginalSurvivalM3(benchmark::State& state) {
  const auto p = params(Model::M3);
  const std::vector<double> x{0.5, 1.0, 0.0};
  double t = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(marginal_survival_m3(t, x, p, 0.05 * t));
    t = t < 5.0 ? t + 0.01 : 0.1;
  }
}
BENCHMARK(BM_MarginalSurvivalM3);

}  // namespace
