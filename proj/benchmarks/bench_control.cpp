#include <benchmark/benchmark.h>

#include "ramsteer/control.hpp"

namespace {

using namespace ramsteer;

void BM_CompensatingReadout(benchmark::State& state) {
  const OpticalChain chain;
  const BeamGeometry geom;
  double y = -200.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(compensating_readout({-55.0, y}, {}, {54.0, 6.0}, chain, geom));
    y = y > 200.0 ? -200.0 : y + 0.5;
  }
}
BENCHMARK(BM_CompensatingReadout);

void BM_HeraldProtocol(benchmark::State& state) {
  HeraldConfig cfg;
  cfg.modes = static_cast<int>(state.range(0));
  cfg.zeta = 0.01;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_herald_protocol(cfg, 10000, seed++));
  }
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_HeraldProtocol)->Arg(10)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
