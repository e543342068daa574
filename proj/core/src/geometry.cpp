#include "ramsteer/geometry.hpp"

#include <stdexcept>
#include <string>

namespace ramsteer {
namespace {

constexpr double kUradPerRad = 1e6;

void require_paraxial(const Angle2D& a, const char* what) {
  if (!a.finite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite angle");
  }
  if (a.norm() >= kParaxialLimitUrad) {
    throw std::invalid_argument(std::string(what) + ": angle outside paraxial range");
  }
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

void OpticalChain::validate() const {
  require_positive(f1_m, "chain.f1_m");
  require_positive(f2_m, "chain.f2_m");
  require_positive(f3_m, "chain.f3_m");
  require_positive(base_freq_hz, "chain.base_freq_hz");
  require_positive(aod_slope_rad_per_hz, "chain.aod_slope_rad_per_hz");
  if (!(band_halfwidth_hz >= 0.0)) {
    throw std::invalid_argument("chain.band_halfwidth_hz must be >= 0");
  }
  if (!steer_axis.finite() || steer_axis.norm() == 0.0) {
    throw std::invalid_argument("chain.steer_axis must be a non-zero finite vector");
  }
}

double OpticalChain::max_cell_deflection_urad() const {
  return aod_slope_rad_per_hz * band_halfwidth_hz * demagnification() * kUradPerRad;
}

Angle2D OpticalChain::unit_axis() const {
  const double n = steer_axis.norm();
  return {steer_axis.x_urad / n, steer_axis.y_urad / n};
}

void BeamGeometry::validate() const {
  require_positive(w0_write_m, "geometry.w0_write_m");
  require_positive(w0_read_m, "geometry.w0_read_m");
  require_positive(w0_pump_m, "geometry.w0_pump_m");
  require_positive(cell_length_m, "geometry.cell_length_m");
  require_positive(lambda_write_m, "geometry.lambda_write_m");
  require_positive(lambda_read_m, "geometry.lambda_read_m");
}

namespace geometry {

TransverseWavevector angle_to_k(const Angle2D& a, double wavelength_m) {
  require_paraxial(a, "angle_to_k");
  require_positive(wavelength_m, "wavelength");
  const double scale = 2.0 * kPi / (wavelength_m * kUradPerRad);
  return {a.x_urad * scale, a.y_urad * scale, wavelength_m};
}

Angle2D k_to_angle(const TransverseWavevector& k) {
  if (!std::isfinite(k.kx) || !std::isfinite(k.ky)) {
    throw std::invalid_argument("k_to_angle: non-finite wavevector");
  }
  require_positive(k.wavelength_m, "wavelength");
  const double scale = k.wavelength_m * kUradPerRad / (2.0 * kPi);
  return {k.kx * scale, k.ky * scale};
}

Angle2D phase_match(const Angle2D& theta_w, const Angle2D& theta_S, const Angle2D& theta_r,
                    const BeamGeometry& geom) {
  const auto kw = angle_to_k(theta_w, geom.lambda_write_m);
  const auto ks = angle_to_k(theta_S, geom.lambda_write_m);
  const auto kr = angle_to_k(theta_r, geom.lambda_read_m);
  return k_to_angle({kw.kx - ks.kx + kr.kx, kw.ky - ks.ky + kr.ky, geom.lambda_read_m});
}

Angle2D aod_chain_angle(double drive_freq_hz, const OpticalChain& chain) {
  if (!std::isfinite(drive_freq_hz)) {
    throw std::invalid_argument("aod_chain_angle: non-finite drive frequency");
  }
  const double offset = drive_freq_hz - chain.base_freq_hz;
  if (std::abs(offset) > chain.band_halfwidth_hz) {
    throw std::out_of_range("aod_chain_angle: drive frequency " + std::to_string(drive_freq_hz) +
                            " Hz outside AOD band");
  }
  const double cell_urad = chain.aod_slope_rad_per_hz * offset * chain.demagnification() * kUradPerRad;
  return chain.unit_axis() * cell_urad;
}

double drive_freq_for_deflection(double cell_deflection_urad, const OpticalChain& chain) {
  return chain.base_freq_hz +
         cell_deflection_urad / (kUradPerRad * chain.aod_slope_rad_per_hz * chain.demagnification());
}

RelayRay relay_to_cell(double aod_deflection_rad, const OpticalChain& chain) {
  // Ray-transfer matrices, applied right to left:
  // free(f2) * lens(f2) * free(f1 + f2) * lens(f1) * free(f1)
  struct M {
    double a, b, c, d;
    M operator*(const M& o) const {
      return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
  };
  const auto free = [](double l) { return M{1.0, l, 0.0, 1.0}; };
  const auto lens = [](double f) { return M{1.0, 0.0, -1.0 / f, 1.0}; };
  const double f1 = chain.f1_m;
  const double f2 = chain.f2_m;
  const M sys = free(f2) * lens(f2) * free(f1 + f2) * lens(f1) * free(f1);
  return {sys.b * aod_deflection_rad, sys.d * aod_deflection_rad};
}

PaneMapping PaneMapping::centred(int width, int height, double pixel_pitch_m, double f3_m) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("pane dimensions must be positive");
  }
  require_positive(pixel_pitch_m, "camera.pixel_pitch_m");
  require_positive(f3_m, "chain.f3_m");
  return {width, height, pixel_pitch_m, f3_m, static_cast<double>(width / 2),
          static_cast<double>(height / 2)};
}

PixelPosition angle_to_pixel(const Angle2D& a, const PaneMapping& pane) {
  const double per_px = pane.urad_per_pixel();
  PixelPosition p;
  p.col = pane.origin_col + a.x_urad / per_px;
  p.row = pane.origin_row + a.y_urad / per_px;
  p.on_pane = std::isfinite(p.col) && std::isfinite(p.row) && p.col >= -0.5 &&
              p.col < pane.width_px - 0.5 && p.row >= -0.5 && p.row < pane.height_px - 0.5;
  return p;
}

Angle2D pixel_to_angle(double col, double row, const PaneMapping& pane) {
  const double per_px = pane.urad_per_pixel();
  return {(col - pane.origin_col) * per_px, (row - pane.origin_row) * per_px};
}

double fresnel_number(const BeamGeometry& geom) {
  return geom.w0_write_m * geom.w0_write_m / (geom.lambda_write_m * geom.cell_length_m);
}

double spinwave_k_precision(const BeamGeometry& geom) {
  return geom.lambda_write_m / geom.w0_write_m * kUradPerRad;
}

}  // namespace geometry
}  // namespace ramsteer
