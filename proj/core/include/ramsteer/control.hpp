#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ramsteer/geometry.hpp"

namespace ramsteer {

struct SteeringCommand {
  Angle2D theta_read;
  double drive_freq_hz = 0.0;
  Angle2D expected_theta_aS;  // phase_match(theta_w, theta_S, theta_read)
  bool reachable = false;
  /// Signed deflection along the steering axis the exact solution needs.
  double required_deflection_urad = 0.0;
  /// Component of the exact solution perpendicular to the steering axis.
  double off_axis_urad = 0.0;
};

/// Off-axis residue tolerated before a target counts as unreachable.
inline constexpr double kOffAxisToleranceUrad = 1e-6;

/// Readout direction that sends the anti-Stokes twin of `theta_S` to
/// `target_aS`. When the exact solution leaves the AOD band or the steering
/// axis, `reachable` is false and the command is the nearest in-band one.
SteeringCommand compensating_readout(const Angle2D& theta_S, const Angle2D& theta_w, const Angle2D& target_aS,
                                     const OpticalChain& chain, const BeamGeometry& geom);

/// Reachable Stokes directions: a segment centre + t * direction with
/// |t| <= half_length_urad. Unbounded when the band is infinite; a single
/// point when it is zero.
struct FeasibleSegment {
  Angle2D centre;
  Angle2D direction;  // unit
  double half_length_urad = 0.0;

  double length_urad() const { return 2.0 * half_length_urad; }
  bool contains(const Angle2D& theta_S, double tol_urad = 1e-6) const;
  /// Evenly spaced points along the segment around the centre.
  std::vector<Angle2D> sample(int count, double spacing_urad) const;
};

FeasibleSegment feasible_region(const OpticalChain& chain, const BeamGeometry& geom, const Angle2D& theta_w,
                                const Angle2D& target_aS);

struct HeraldConfig {
  int modes = 10;
  double zeta = 0.01;  // mean excitations per mode per shot
  double eta_retrieve = 1.0;
  double eta_detect = 1.0;
  double switch_latency_s = 1e-8;
  double memory_lifetime_s = 1e-6;

  bool operator==(const HeraldConfig&) const = default;
  /// Per-mode probability of at least one excitation, zeta / (1 + zeta).
  double p() const { return zeta / (1.0 + zeta); }
  static double zeta_from_p(double p) { return p / (1.0 - p); }
  void validate() const;
};

struct HeraldStats {
  std::uint64_t shots = 0;
  std::uint64_t heralds = 0;
  std::uint64_t routed_successes = 0;
  std::uint64_t multi_excitation_events = 0;
  double herald_prob = 0.0;
  double success_prob = 0.0;
  double multi_given_herald = 0.0;  // NaN when nothing heralded
};

/// Monte Carlo of the multiplexed source: per shot and mode a geometric
/// excitation count with mean zeta, binomial herald detection, the
/// lowest-index heralded mode routed, success if it retrieves >= 1 photon.
HeraldStats run_herald_protocol(const HeraldConfig& cfg, std::uint64_t shots, std::uint64_t seed);

/// Closed forms for the same protocol.
double herald_prob_per_mode(const HeraldConfig& cfg);
double herald_prob_exact(const HeraldConfig& cfg);
double multi_given_herald_exact(const HeraldConfig& cfg);
double success_prob_exact(const HeraldConfig& cfg);

void write_herald_csv(const std::string& path, const HeraldConfig& cfg, const HeraldStats& stats,
                      std::uint64_t config_checksum, std::uint64_t seed);

/// Schedule CSV with header `shot,theta_read_x_urad,theta_read_y_urad` or
/// `shot,drive_freq_hz`; drive frequencies go through aod_chain_angle.
/// Shots must be 0..n-1 in order.
std::vector<Angle2D> read_schedule(const std::string& path, const OpticalChain& chain);
void write_schedule(const std::string& path, const std::vector<Angle2D>& schedule, std::uint64_t config_checksum,
                    std::uint64_t seed);

}  // namespace ramsteer
