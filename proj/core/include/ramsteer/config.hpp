#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ramsteer/control.hpp"
#include "ramsteer/geometry.hpp"
#include "ramsteer/scattering.hpp"

namespace ramsteer {

struct CameraConfig {
  int width_px = 64;
  int height_px = 128;
  double pixel_pitch_m = 13.0e-6;

  bool operator==(const CameraConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::uint64_t n_frames = 10000;
  unsigned threads = 0;  // 0: hardware concurrency

  bool operator==(const RunConfig&) const = default;
};

struct AnalysisConfig {
  double reference_radius_urad = 0.0;  // 0: single-pixel reference
  double fit_half_window_urad = 300.0;
  double peak_half_window_urad = 120.0;  // spot-core window for peak correlation
  int batches = 10;                    // batch-means standard errors

  bool operator==(const AnalysisConfig&) const = default;
};

struct SteerConfig {
  Angle2D target{54.0, 6.0};
  std::uint64_t frames_per_fiber = 2000;

  bool operator==(const SteerConfig&) const = default;
};

/// Virtual fibers laid along the steering axis through the centre of the
/// reachable segment.
struct FiberConfig {
  int count = 5;
  double spacing_urad = 100.0;
  double radius_urad = 40.0;

  bool operator==(const FiberConfig&) const = default;
};

struct ExperimentConfig {
  BeamGeometry geometry;
  Angle2D theta_write;
  OpticalChain chain;
  ModeSetParams modes;
  RetrievalModel retrieval;
  CameraConfig camera;
  HeraldConfig herald;
  std::uint64_t herald_shots = 100000;
  RunConfig run;
  AnalysisConfig analysis;
  SteerConfig steer;
  FiberConfig fibers;
  /// [metadata] entries in file order; never read by the simulation.
  std::vector<std::pair<std::string, std::string>> metadata;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parse or validation failure; what() is "source:line: message" when a line
/// is known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Built-in defaults, including the reference metadata block.
ExperimentConfig default_config();

/// INI text to config; keys missing from the text keep their defaults.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Normalized text: every section and key in canonical order, numbers in
/// shortest round-trip form. parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& cfg);

/// FNV-1a 64 of emit_config(cfg) with run.threads zeroed, since the thread
/// count never changes any output.
std::uint64_t config_checksum(const ExperimentConfig& cfg);

/// Throws ConfigError naming the offending key.
void validate_config(const ExperimentConfig& cfg);

geometry::PaneMapping pane_mapping(const ExperimentConfig& cfg);
Scenario make_scenario(const ExperimentConfig& cfg);

}  // namespace ramsteer
