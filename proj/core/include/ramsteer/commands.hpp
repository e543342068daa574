#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "ramsteer/config.hpp"

namespace ramsteer {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,      // runtime failure or a steering verification miss
  kExitConfigError = 2,  // bad config, schedule or arguments
  kExitUnreachable = 3,  // at least one target outside the AOD reach
  kExitFitFailed = 4,    // at least one spot fit failed
};

struct CommandOptions {
  std::string config_path;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> frames;
  std::optional<std::uint64_t> shots;
  std::optional<unsigned> threads;
  std::string out;            // simulate: stack path; other commands: output prefix
  std::string stack_path;     // correlate input
  std::string schedule_path;  // simulate: per-shot readout angles
  std::optional<std::uint64_t> csv_frame;  // simulate: also export this shot as CSV
  std::optional<Angle2D> ref;
  std::optional<int> fiber;
  std::optional<Angle2D> target;
};

/// Loads the config (or defaults) and applies command-line overrides.
ExperimentConfig resolve_config(const CommandOptions& opt);

/// Virtual fibers of the steering experiment: `fibers.count` points spaced
/// along the reachable segment for the configured target.
std::vector<Angle2D> fiber_grid(const ExperimentConfig& cfg);

int cmd_simulate(const CommandOptions& opt, std::ostream& log);
int cmd_correlate(const CommandOptions& opt, std::ostream& log);
int cmd_steer(const CommandOptions& opt, std::ostream& log);
int cmd_herald(const CommandOptions& opt, std::ostream& log);

}  // namespace ramsteer
