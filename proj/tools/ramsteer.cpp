// Command-line front end: simulate | correlate | steer | herald.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ramsteer/commands.hpp"

namespace {

struct AngleFlags {
  std::optional<double> x;
  std::optional<double> y;

  std::optional<ramsteer::Angle2D> get() const {
    if (!x && !y) {
      return std::nullopt;
    }
    return ramsteer::Angle2D{x.value_or(0.0), y.value_or(0.0)};
  }
};

void add_common(CLI::App* cmd, ramsteer::CommandOptions& opt, std::optional<std::uint64_t>& seed,
                std::optional<unsigned>& threads) {
  cmd->add_option("--config", opt.config_path, "Experiment config (INI); built-in defaults when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", seed, "Override run.seed");
  cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimode Raman memory simulator with steered readout"};
  app.require_subcommand(1);

  ramsteer::CommandOptions opt;
  std::optional<std::uint64_t> seed, frames, shots, csv_frame;
  std::optional<unsigned> threads;
  std::optional<int> fiber;
  AngleFlags ref, target;

  auto* sim = app.add_subcommand("simulate", "Generate a frame stack (RMNS)");
  add_common(sim, opt, seed, threads);
  sim->add_option("--frames", frames, "Override run.n_frames");
  sim->add_option("--out", opt.out, "Output stack path")->default_str("stack.rmns");
  sim->add_option("--schedule", opt.schedule_path, "Per-shot readout schedule CSV")->check(CLI::ExistingFile);
  sim->add_option("--csv-frame", csv_frame, "Also export this shot as <out>.frame<N>.csv");

  auto* cor = app.add_subcommand("correlate", "Correlation map, spot fits and sections from a stack");
  add_common(cor, opt, seed, threads);
  cor->add_option("stack", opt.stack_path, "Input RMNS stack")->required()->check(CLI::ExistingFile);
  cor->add_option("--ref-x", ref.x, "Reference angle x (urad)");
  cor->add_option("--ref-y", ref.y, "Reference angle y (urad)");
  cor->add_option("--fiber", fiber, "Use virtual fiber <id> of the steering grid as reference");
  cor->add_option("--out", opt.out, "Output prefix")->default_str("correlate");

  auto* ste = app.add_subcommand("steer", "Compensated readout per fiber, simulated and verified");
  add_common(ste, opt, seed, threads);
  ste->add_option("--frames", frames, "Frames per simulated run (overrides steer.frames_per_fiber)");
  ste->add_option("--target-x", target.x, "Target anti-Stokes angle x (urad)");
  ste->add_option("--target-y", target.y, "Target anti-Stokes angle y (urad)");
  ste->add_option("--out", opt.out, "Output prefix")->default_str("steer");

  auto* her = app.add_subcommand("herald", "Heralded multiplexed source statistics");
  add_common(her, opt, seed, threads);
  her->add_option("--shots", shots, "Override herald.shots");
  her->add_option("--out", opt.out, "Output prefix")->default_str("herald");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ramsteer::kExitConfigError;
  }

  opt.seed = seed;
  opt.frames = frames;
  opt.shots = shots;
  opt.threads = threads;
  opt.csv_frame = csv_frame;
  opt.fiber = fiber;
  opt.ref = ref.get();
  opt.target = target.get();

  if (opt.ref && opt.fiber) {
    std::cerr << "error: --fiber and --ref-x/--ref-y are exclusive\n";
    return ramsteer::kExitConfigError;
  }
  if (sim->parsed()) {
    return ramsteer::cmd_simulate(opt, std::cout);
  }
  if (cor->parsed()) {
    return ramsteer::cmd_correlate(opt, std::cout);
  }
  if (ste->parsed()) {
    return ramsteer::cmd_steer(opt, std::cout);
  }
  return ramsteer::cmd_herald(opt, std::cout);
}
