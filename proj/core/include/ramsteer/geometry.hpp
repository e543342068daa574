#pragma once

#include <cmath>
#include <cstddef>

namespace ramsteer {

/// Far-field direction. Both components in microradians; y is the default
/// steering axis.
struct Angle2D {
  double x_urad = 0.0;
  double y_urad = 0.0;

  constexpr Angle2D operator+(const Angle2D& o) const { return {x_urad + o.x_urad, y_urad + o.y_urad}; }
  constexpr Angle2D operator-(const Angle2D& o) const { return {x_urad - o.x_urad, y_urad - o.y_urad}; }
  constexpr Angle2D operator-() const { return {-x_urad, -y_urad}; }
  constexpr Angle2D operator*(double s) const { return {x_urad * s, y_urad * s}; }
  constexpr bool operator==(const Angle2D&) const = default;

  double norm() const { return std::hypot(x_urad, y_urad); }
  bool finite() const { return std::isfinite(x_urad) && std::isfinite(y_urad); }
};

/// Paraxial guard: directions at or beyond this magnitude are rejected.
inline constexpr double kParaxialLimitUrad = 1.0e4;

inline constexpr double kPi = 3.14159265358979323846;

/// FWHM / sigma of a Gaussian, 2 sqrt(2 ln 2).
inline constexpr double kFwhmPerSigma = 2.3548200450309493;

/// Transverse part of a wavevector, tagged with the carrier it belongs to.
struct TransverseWavevector {
  double kx = 0.0;  // rad/m
  double ky = 0.0;  // rad/m
  double wavelength_m = 0.0;
};

/// AOD -> 4f relay (f1, f2) -> cell -> f3 -> camera.
struct OpticalChain {
  double f1_m = 0.050;
  double f2_m = 0.750;
  double f3_m = 0.500;
  double base_freq_hz = 80.0e6;
  double aod_slope_rad_per_hz = 3.0e-10;  // deflection at the AOD per Hz of drive offset
  double band_halfwidth_hz = 10.0e6;
  Angle2D steer_axis{0.0, 1.0};  // unit vector in the cell frame

  bool operator==(const OpticalChain&) const = default;
  void validate() const;
  double demagnification() const { return f1_m / f2_m; }
  /// Largest deflection magnitude reachable at the cell, in urad.
  double max_cell_deflection_urad() const;
  Angle2D unit_axis() const;
};

struct BeamGeometry {
  double w0_write_m = 3.5e-3;
  double w0_read_m = 3.5e-3;
  double w0_pump_m = 6.0e-3;
  double cell_length_m = 0.10;
  double lambda_write_m = 795.0e-9;
  double lambda_read_m = 780.0e-9;

  bool operator==(const BeamGeometry&) const = default;
  void validate() const;
};

namespace geometry {

TransverseWavevector angle_to_k(const Angle2D& a, double wavelength_m);
Angle2D k_to_angle(const TransverseWavevector& k);

/// Delayed phase matching, k_aS = k_w - k_S + k_r in the transverse plane.
/// Write and Stokes directions live at lambda_write, readout and anti-Stokes
/// at lambda_read.
Angle2D phase_match(const Angle2D& theta_w, const Angle2D& theta_S, const Angle2D& theta_r,
                    const BeamGeometry& geom);

/// Deflection at the cell centre for a given AOD drive frequency. Throws
/// std::out_of_range outside the configured band.
Angle2D aod_chain_angle(double drive_freq_hz, const OpticalChain& chain);

/// Inverse of aod_chain_angle for a signed deflection along the steering axis.
/// Does not check the band.
double drive_freq_for_deflection(double cell_deflection_urad, const OpticalChain& chain);

/// Ray leaving the AOD centre at `aod_deflection_rad`, propagated through the
/// 4f relay to the cell centre (ABCD). The relay images the AOD onto the cell,
/// so offset is zero for every deflection; the angle is scaled by -f1/f2.
struct RelayRay {
  double offset_m;
  double angle_rad;
};
RelayRay relay_to_cell(double aod_deflection_rad, const OpticalChain& chain);

/// Linear far-field map of one camera pane: x = f3 * theta.
/// Pixel (col, row) has its centre at col, row in pixel coordinates;
/// the origin is the pixel that sees theta = (0, 0).
struct PaneMapping {
  int width_px = 64;
  int height_px = 128;
  double pixel_pitch_m = 13.0e-6;
  double f3_m = 0.5;
  double origin_col = 32.0;
  double origin_row = 64.0;

  static PaneMapping centred(int width, int height, double pixel_pitch_m, double f3_m);
  double urad_per_pixel() const { return pixel_pitch_m / f3_m * 1e6; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_px) * static_cast<std::size_t>(height_px); }
};

struct PixelPosition {
  double col = 0.0;
  double row = 0.0;
  bool on_pane = false;
};

PixelPosition angle_to_pixel(const Angle2D& a, const PaneMapping& pane);
Angle2D pixel_to_angle(double col, double row, const PaneMapping& pane);

/// F = w0^2 / (lambda L) for the write beam.
double fresnel_number(const BeamGeometry& geom);

/// Angular precision lambda_write / w0_write of the stored spinwave, in urad.
double spinwave_k_precision(const BeamGeometry& geom);

}  // namespace geometry
}  // namespace ramsteer
