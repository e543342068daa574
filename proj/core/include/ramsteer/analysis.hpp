#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ramsteer/geometry.hpp"
#include "ramsteer/scattering.hpp"

namespace ramsteer {

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Where the reference intensity of a correlation map is read.
/// radius 0 selects the single pixel nearest to `centre`; a positive radius
/// sums all pixels whose centres lie strictly inside the disc.
struct Reference {
  Pane pane = Pane::kStokes;
  Angle2D centre;
  double radius_urad = 0.0;
};

/// Flat indices (row * width + col) of the reference pixels. Throws
/// std::out_of_range if the reference lies off the pane or selects no pixel.
std::vector<std::size_t> reference_pixels(const Reference& ref, const geometry::PaneMapping& pane);

/// Mean pixel-centre angle of the reference pixels: the direction the
/// reference actually samples.
Angle2D reference_centroid(const Reference& ref, const geometry::PaneMapping& pane);

/// Raw single-pass sums over frames for both panes against one reference.
/// Pixel arrays hold the Stokes pane followed by the anti-Stokes pane.
class MomentAccumulator {
 public:
  MomentAccumulator(const geometry::PaneMapping& pane, const Reference& ref);

  void accumulate(const Frame& frame);
  /// Adds another accumulator's sums. Throws on shape or reference mismatch.
  void merge(const MomentAccumulator& other);

  std::uint64_t n() const { return n_; }
  const geometry::PaneMapping& pane() const { return pane_; }
  const Reference& reference() const { return ref_; }
  const std::vector<std::size_t>& reference_indices() const { return ref_idx_; }
  const std::vector<double>& sum_I() const { return sum_I_; }
  const std::vector<double>& sum_I2() const { return sum_I2_; }
  const std::vector<double>& sum_I_ref() const { return sum_I_ref_; }
  double sum_ref() const { return sum_ref_; }
  double sum_ref2() const { return sum_ref2_; }

  /// Reference intensity of one frame.
  double reference_value(const Frame& frame) const;

 private:
  geometry::PaneMapping pane_;
  Reference ref_;
  std::vector<std::size_t> ref_idx_;
  std::uint64_t n_ = 0;
  std::vector<double> sum_I_;
  std::vector<double> sum_I2_;
  std::vector<double> sum_I_ref_;
  double sum_ref_ = 0.0;
  double sum_ref2_ = 0.0;
};

struct CorrelationMap {
  geometry::PaneMapping pane;
  std::vector<double> values;  // Stokes pane then anti-Stokes pane; NaN where undefined
  Reference reference;
  std::uint64_t n_frames = 0;

  std::span<const double> pane_values(Pane p) const;
  double at(Pane p, int col, int row) const;
  /// Value at the pixel nearest to `a`; NaN off the pane.
  double at_angle(Pane p, const Angle2D& a) const;
};

/// Pearson coefficient of every pixel against the reference. Throws
/// InsufficientData when n < 2.
CorrelationMap correlation_map(const MomentAccumulator& acc);

/// Same quantity by two passes over stored frames (mean first, then
/// centred co-moments); the reference oracle for the streaming path.
CorrelationMap correlation_map_two_pass(std::span<const Frame> frames, const geometry::PaneMapping& pane,
                                        const Reference& ref);

/// Accumulates `frames` into `batches` consecutive chunks (sizes differ by at
/// most one).
std::vector<MomentAccumulator> accumulate_batches(std::span<const Frame> frames, const geometry::PaneMapping& pane,
                                                  const Reference& ref, std::size_t batches);
MomentAccumulator merge_all(const std::vector<MomentAccumulator>& parts);

/// Streams frames into per-batch accumulators for several references at
/// once; frame k of n goes to batch k * batches / n.
class BatchedCorrelator {
 public:
  BatchedCorrelator(const geometry::PaneMapping& pane, const std::vector<Reference>& refs, std::uint64_t n_frames,
                    std::size_t batches);

  void add(const Frame& frame);

  std::size_t reference_count() const { return parts_.size(); }
  std::size_t batch_count() const { return batches_; }
  std::uint64_t frames_seen() const { return seen_; }
  const MomentAccumulator& batch(std::size_t ref, std::size_t b) const { return parts_[ref][b]; }
  MomentAccumulator merged(std::size_t ref) const { return merge_all(parts_[ref]); }

 private:
  std::vector<std::vector<MomentAccumulator>> parts_;
  std::uint64_t n_frames_;
  std::size_t batches_;
  std::uint64_t seen_ = 0;
};

enum class Axis { kX, kY };

struct Profile {
  Axis axis = Axis::kX;
  std::vector<double> coord_urad;
  std::vector<double> values;
};

/// Row (Axis::kX) or column (Axis::kY) through the pixel nearest `through`.
Profile cross_section(const CorrelationMap& map, Pane pane, Axis axis, const Angle2D& through);

/// 2 * envelope solid angle / spot solid angle, before rounding.
double mode_count_exact(double envelope_fwhm_x, double envelope_fwhm_y, double spot_fwhm_x, double spot_fwhm_y);
/// Rounded to nearest; throws std::invalid_argument on non-positive widths.
int count_modes(double envelope_fwhm_x, double envelope_fwhm_y, double spot_fwhm_x, double spot_fwhm_y);
inline int count_modes(double envelope_fwhm, double spot_fwhm) {
  return count_modes(envelope_fwhm, envelope_fwhm, spot_fwhm, spot_fwhm);
}

struct VirtualFiber {
  Angle2D centre;
  double radius_urad = 0.0;
};

/// Sum of the pixels whose centres lie strictly inside the fiber disc.
double virtual_fiber_intensity(const Frame& frame, Pane pane, const VirtualFiber& fiber,
                               const geometry::PaneMapping& mapping);
std::vector<double> virtual_fiber_series(std::span<const Frame> frames, Pane pane, const VirtualFiber& fiber,
                                         const geometry::PaneMapping& mapping);

/// Sample Pearson coefficient; NaN when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

struct MeanAndError {
  double mean = 0.0;
  double stderr_ = 0.0;
};
/// Mean and standard error of independent batch values.
MeanAndError batch_mean(std::span<const double> values);

struct OutputTag {
  std::uint64_t config_checksum = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

/// pane,theta_x_urad,theta_y_urad,C
void write_map_csv(const std::string& path, const CorrelationMap& map, const OutputTag& tag);
/// Binary 16-bit PGM, Stokes pane above the anti-Stokes pane; C in [-1, 1]
/// maps linearly to [0, 65535] and NaN to 0.
void write_map_pgm(const std::string& path, const CorrelationMap& map, const OutputTag& tag);
std::uint16_t correlation_to_gray(double c);

void write_profile_csv(const std::string& path, const Profile& profile, const OutputTag& tag);

}  // namespace ramsteer
