#include <benchmark/benchmark.h>

#include "exhaz/simulation.hpp"

using namespace exhaz;

namespace {

const LifeTable& table() {
  static const LifeTable t = sim::reference_life_table();
  return t;
}

void BM_GenerateCohort(benchmark::State& state) {
  auto sc = *sim::find_scenario("wide");
  sc.n = static_cast<std::size_t>(state.range(0));
  std::size_t rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sim::generate_cohort(sc, rep++, table(), 0.05).patients.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateCohort)->Arg(1000)->Arg(5000);

void BM_PrepareCohort(benchmark::State& state) {
  auto sc = *sim::find_scenario("none");
  sc.n = 5000;
  const auto c = sim::generate_cohort(sc, 0, table(), 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(PreparedCohort(c, table()).sum_dhp());
  state.SetItemsProcessed(state.iterations() * 5000);
}
BENCHMARK(BM_PrepareCohort);

void BM_CumHazardIncrement(benchmark::State& state) {
  const auto s = table().stratum({"1"});
  double age = 40.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(table().cum_hazard_increment(s, {age, 2012.0}, 5.0));
    age = age < 85.0 ? age + 0.37 : 40.0;
  }
}
BENCHMARK(BM_CumHazardIncrement);

void BM_CalibrateDropout(benchmark::State& state) {
  auto sc = *sim::find_scenario("wide");
  for (auto _ : state) benchmark::DoNotOptimize(sim::calibrate_dropout_rate(sc, 0.30, table(), 20000).rate);
}
BENCHMARK(BM_CalibrateDropout)->Unit(benchmark::kMillisecond);

}  // namespace
