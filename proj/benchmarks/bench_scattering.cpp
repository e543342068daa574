#include <benchmark/benchmark.h>

#include "ramsteer/config.hpp"
#include "ramsteer/scattering.hpp"

namespace {

using namespace ramsteer;

const Scenario& scenario() {
  static const Scenario sc = make_scenario(default_config());
  return sc;
}

void BM_SampleShot(benchmark::State& state) {
  const auto& sc = scenario();
  std::uint64_t shot = 0;
  for (auto _ : state) {
    auto rng = make_stream(1, StreamDomain::kScatteringShot, shot++);
    benchmark::DoNotOptimize(sample_shot(sc, {}, rng));
  }
}
BENCHMARK(BM_SampleShot);

void BM_RenderFrame(benchmark::State& state) {
  const auto& sc = scenario();
  const auto noise = state.range(0) == 0 ? NoiseModel::kExpected : NoiseModel::kPoisson;
  auto rng = make_stream(1, StreamDomain::kScatteringShot, 0);
  const auto shot = sample_shot(sc, {}, rng);
  auto a = rng.split(1), b = rng.split(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_frame(shot, sc, {}, a, b, noise));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * sc.pane.pixel_count()));
}
BENCHMARK(BM_RenderFrame)->Arg(0)->Arg(1)->ArgNames({"poisson"});

// Frames per second through the threaded generator.
void BM_SimulateFrames(benchmark::State& state) {
  const auto& sc = scenario();
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    std::size_t seen = 0;
    simulate_frames(sc, n, {}, seed++, [&](Frame&& f) { seen += f.stokes.size(); });
    benchmark::DoNotOptimize(seen);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateFrames)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
