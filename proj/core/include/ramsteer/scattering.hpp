#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ramsteer/geometry.hpp"
#include "ramsteer/rng.hpp"

namespace ramsteer {

/// One angular spinwave mode: a Gaussian far-field spot of the Stokes light.
struct Mode {
  Angle2D theta_S;
  double mean_photons = 0.0;
  double sigma_urad = 0.0;  // standard deviation of the intensity profile
};

struct ModeSetParams {
  double gain_shrink = 2.0;               // write-beam diameter / effective source diameter
  double spot_shape_constant = 0.747132;  // mode FWHM = c * lambda / d_eff
  double envelope_fwhm_urad = 758.947;    // scattering cone diameter
  double mean_photons_per_mode = 1.0e3;
  double grid_spacing_ratio = 0.5;        // grid spacing / mode FWHM

  bool operator==(const ModeSetParams&) const = default;
};

/// Regular square grid of modes covering a disc of diameter envelope_fwhm.
struct ModeSet {
  std::vector<Mode> modes;
  double envelope_fwhm_urad = 0.0;
  double grid_spacing_urad = 0.0;
  double mode_fwhm_urad = 0.0;   // single-mode intensity profile
  double spot_fwhm_urad = 0.0;   // correlation spot: sqrt(2) * mode FWHM
  double source_diameter_m = 0.0;
};

/// Throws std::invalid_argument when gain_shrink < 1 or the envelope is
/// narrower than one correlation spot.
ModeSet build_mode_set(const BeamGeometry& geom, const ModeSetParams& params);

struct RetrievalModel {
  double eta0 = 1.0;
  double diffusion_m2_per_s = 0.154123;
  double tau_storage_s = 1.0e-6;
  double aberration_scale_urad = 435.69;
  double noise_floor = 100.0;  // mean photons per pixel, both panes

  bool operator==(const RetrievalModel&) const = default;
  void validate() const;
};

/// eta0 * exp(-D |K|^2 tau) * exp(-|theta_read|^2 / (2 s^2)), with K the
/// stored transverse wavevector k_w - k_S.
double retrieval_efficiency(const Angle2D& theta_S, const Angle2D& theta_w, const Angle2D& theta_read,
                            const RetrievalModel& rm, const BeamGeometry& geom);

/// FWHM (urad) of the diffusion factor exp(-D K^2 tau) as a function of the
/// Stokes angle; +inf without diffusion.
double diffusion_fwhm_urad(const RetrievalModel& rm, const BeamGeometry& geom);

/// Readout-side envelope: the flat write disc truncated by the diffusion
/// factor, min(envelope, diffusion FWHM).
double readout_envelope_fwhm_urad(const ModeSet& ms, const RetrievalModel& rm, const BeamGeometry& geom);

/// Diffusion coefficient whose damping FWHM equals `target_fwhm_urad`.
double diffusion_for_fwhm(double target_fwhm_urad, double tau_storage_s, const BeamGeometry& geom);

/// Everything the frame generator needs. Immutable once built.
struct Scenario {
  BeamGeometry geom;
  Angle2D theta_write;
  ModeSet modes;
  RetrievalModel retrieval;
  geometry::PaneMapping pane;
};

struct ShotIntensities {
  std::vector<double> stokes;
  std::vector<double> anti_stokes;
};

/// Thermal (exponential) Stokes intensity per mode and its retrieved twin.
ShotIntensities sample_shot(const Scenario& sc, const Angle2D& theta_read, Philox4x32& rng);

enum class Pane : int { kStokes = 0, kAntiStokes = 1 };

struct FrameMetadata {
  int clipped_modes[2] = {0, 0};  // modes whose centre fell off the pane
  double sampled_energy[2] = {0.0, 0.0};
  double rendered_energy[2] = {0.0, 0.0};  // pre-noise, excluding the floor
  double clipped_energy[2] = {0.0, 0.0};
};

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> stokes;
  std::vector<float> anti_stokes;
  std::uint64_t shot_index = 0;
  Angle2D readout_angle;
  FrameMetadata meta;

  Frame() = default;
  Frame(int w, int h);

  std::span<const float> pane(Pane p) const { return p == Pane::kStokes ? stokes : anti_stokes; }
  std::span<float> pane(Pane p) { return p == Pane::kStokes ? stokes : anti_stokes; }
  float at(Pane p, int col, int row) const { return pane(p)[static_cast<std::size_t>(row) * width + col]; }
};

enum class NoiseModel { kPoisson, kExpected };

/// Far-field render of one shot. Each pane is the sum of pixel-integrated
/// Gaussian spots plus the noise floor; kPoisson then samples every pixel.
Frame render_frame(const ShotIntensities& shot, const Scenario& sc, const Angle2D& theta_read,
                   Philox4x32& rng_stokes, Philox4x32& rng_anti_stokes,
                   NoiseModel noise = NoiseModel::kPoisson);

/// Per-shot RNG contract: stream (seed, shot) from StreamDomain::kScatteringShot,
/// split into intensity / Stokes noise / anti-Stokes noise children.
Frame simulate_shot(const Scenario& sc, std::uint64_t seed, std::uint64_t shot, const Angle2D& theta_read,
                    NoiseModel noise = NoiseModel::kPoisson);

struct FrameStack {
  int width = 0;
  int height = 0;
  double pixel_pitch_m = 0.0;
  double f3_m = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_checksum = 0;
  std::vector<Frame> frames;
};

/// Generates shots [0, n_frames) and hands them to `sink` in shot order.
/// `schedule` is either empty (theta_read = 0) or one readout angle per shot.
/// Output is independent of `threads` (0 = hardware concurrency).
void simulate_frames(const Scenario& sc, std::size_t n_frames, std::span<const Angle2D> schedule,
                     std::uint64_t seed, const std::function<void(Frame&&)>& sink, unsigned threads = 0);

FrameStack simulate_stack(const Scenario& sc, std::size_t n_frames, std::span<const Angle2D> schedule,
                          std::uint64_t seed, std::uint64_t config_checksum = 0, unsigned threads = 0);

}  // namespace ramsteer
