#pragma once

#include <span>
#include <string>
#include <vector>

#include "ramsteer/analysis.hpp"
#include "ramsteer/geometry.hpp"

namespace ramsteer {

enum class FitStatus {
  kOk,
  kTooFewPixels,   // window below 5x5 valid pixels (2D) or 7 samples (1D)
  kNotConverged,   // iteration cap hit; best-effort values reported
  kDegenerate,     // non-finite or non-positive width / amplitude
  kOutsideWindow,  // centre left the fit window
  kLowSignal,      // amplitude below min_snr * rms_residual
};

const char* to_string(FitStatus s);

struct FitOptions {
  int max_iterations = 100;
  double rel_step_tol = 1e-8;
  double top_fraction = 0.05;  // initial centre from the centroid of the brightest pixels
  double min_snr = 5.0;
};

struct GaussianSpotFit {
  Angle2D centre;
  double fwhm_x_urad = 0.0;
  double fwhm_y_urad = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  double rms_residual = 0.0;
  bool converged = false;
  int iterations = 0;
  std::size_t pixels_used = 0;
  FitStatus status = FitStatus::kTooFewPixels;

  bool ok() const { return status == FitStatus::kOk; }
  /// Model value at the centre.
  double peak() const { return amplitude + offset; }
};

/// Least-squares fit of amplitude * exp(-(dx^2 / 2 sx^2 + dy^2 / 2 sy^2)) + offset
/// over the pixels whose centres lie in the square window of half-width
/// `half_window_urad` around `window_centre`. NaN pixels and the flat indices
/// in `masked` are skipped.
GaussianSpotFit fit_gaussian_spot(std::span<const double> pane_values, const geometry::PaneMapping& pane,
                                  const Angle2D& window_centre, double half_window_urad,
                                  std::span<const std::size_t> masked = {}, const FitOptions& opt = {});

struct ProfileFit {
  double centre_urad = 0.0;
  double fwhm_urad = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  double rms_residual = 0.0;
  bool converged = false;
  int iterations = 0;
  FitStatus status = FitStatus::kTooFewPixels;

  bool ok() const { return status == FitStatus::kOk; }
};

ProfileFit fit_gaussian_profile(const Profile& profile, double window_centre_urad, double half_window_urad,
                                const FitOptions& opt = {});

/// Fit seeded at the brightest finite pixel of `pane`. Reference pixels are
/// masked when the map's reference lies on the same pane.
GaussianSpotFit locate_twin_spot(const CorrelationMap& map, double half_window_urad,
                                 Pane pane = Pane::kAntiStokes, const FitOptions& opt = {});

/// Fit of the Stokes-pane spot around the reference, reference pixels masked.
GaussianSpotFit locate_reference_spot(const CorrelationMap& map, double half_window_urad, const FitOptions& opt = {});

/// Twin and reference spots of one reference in a batched run. Centre and
/// widths come from the full-run fit with `half_window_urad`. The peak
/// correlation and its standard error come from per-batch fits restricted to
/// the spot core (`peak_half_window_urad` around the full-run centre), where
/// a Gaussian describes the spot even when the envelope edge truncates its
/// tails.
struct SpotMeasurement {
  GaussianSpotFit twin;
  GaussianSpotFit reference_spot;
  MeanAndError peak;
  std::size_t peak_batches = 0;  // batches whose fit succeeded
};

SpotMeasurement measure_spots(const BatchedCorrelator& corr, std::size_t ref, double half_window_urad,
                              double peak_half_window_urad, const FitOptions& opt = {});

/// centre_x_urad,centre_y_urad,fwhm_x_urad,fwhm_y_urad,amplitude,offset,rms_residual,converged,iterations,status
void write_fit_csv(const std::string& path, const GaussianSpotFit& fit, const OutputTag& tag);

}  // namespace ramsteer
