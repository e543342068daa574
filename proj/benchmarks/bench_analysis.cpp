#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "ramsteer/analysis.hpp"
#include "ramsteer/config.hpp"
#include "ramsteer/fit.hpp"

namespace {

using namespace ramsteer;

struct Fixture {
  Scenario sc = make_scenario(default_config());
  FrameStack stack = simulate_stack(sc, 64, {}, 3);
  Reference ref{Pane::kStokes, {0.0, 150.0}, 0.0};
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Accumulate(benchmark::State& state) {
  const auto& fx = fixture();
  MomentAccumulator acc(fx.sc.pane, fx.ref);
  std::size_t k = 0;
  for (auto _ : state) {
    acc.accumulate(fx.stack.frames[k++ % fx.stack.frames.size()]);
  }
  benchmark::DoNotOptimize(acc.sum_ref());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Accumulate);

void BM_BatchedFiveReferences(benchmark::State& state) {
  const auto& fx = fixture();
  std::vector<Reference> refs;
  for (const double y : {-300.0, -150.0, 0.0, 150.0, 300.0}) {
    refs.push_back({Pane::kStokes, {0.0, y}, 0.0});
  }
  for (auto _ : state) {
    BatchedCorrelator corr(fx.sc.pane, refs, fx.stack.frames.size(), 8);
    for (const auto& f : fx.stack.frames) {
      corr.add(f);
    }
    benchmark::DoNotOptimize(corr.frames_seen());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fx.stack.frames.size()));
}
BENCHMARK(BM_BatchedFiveReferences)->Unit(benchmark::kMillisecond);

void BM_CorrelationMap(benchmark::State& state) {
  const auto& fx = fixture();
  MomentAccumulator acc(fx.sc.pane, fx.ref);
  for (const auto& f : fx.stack.frames) {
    acc.accumulate(f);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(correlation_map(acc));
  }
}
BENCHMARK(BM_CorrelationMap);

void BM_SpotFit(benchmark::State& state) {
  const auto& pane = fixture().sc.pane;
  std::vector<double> v(pane.pixel_count());
  for (int row = 0; row < pane.height_px; ++row) {
    for (int col = 0; col < pane.width_px; ++col) {
      const auto a = geometry::pixel_to_angle(col, row, pane);
      const double r2 = (a.x_urad - 20) * (a.x_urad - 20) + (a.y_urad + 150) * (a.y_urad + 150);
      v[static_cast<std::size_t>(row) * pane.width_px + col] = 0.6 * std::exp(-r2 / (2 * 102.0 * 102.0));
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_gaussian_spot(v, pane, {0.0, -140.0}, 300.0));
  }
}
BENCHMARK(BM_SpotFit);

}  // namespace

BENCHMARK_MAIN();
