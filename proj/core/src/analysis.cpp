#include "ramsteer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ramsteer/csv.hpp"

namespace ramsteer {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t pane_offset(Pane p, std::size_t pane_pixels) { return p == Pane::kStokes ? 0 : pane_pixels; }

bool inside_disc(const Angle2D& pixel_centre, const Angle2D& centre, double radius) {
  return (pixel_centre - centre).norm() < radius;
}

double pearson_from_sums(long double n, long double si, long double si2, long double sr, long double sr2,
                         long double sir) {
  const long double var_i = n * si2 - si * si;
  const long double var_r = n * sr2 - sr * sr;
  // Exact zero for integer data. The f64 sums of non-integer data carry a
  // relative error up to ~n eps, so a constant pixel leaves residue of that size.
  const long double kRel = std::max(1e-15L, 4.0L * n * std::numeric_limits<double>::epsilon());
  if (!(var_i > kRel * n * si2) || !(var_r > kRel * n * sr2)) {
    return kNaN;
  }
  const long double cov = n * sir - si * sr;
  return static_cast<double>(cov / std::sqrt(var_i * var_r));
}

void write_tag(std::ostream& out, const OutputTag& tag) {
  write_comment(out, "config_checksum", hex64(tag.config_checksum));
  write_comment(out, "seed", std::to_string(tag.seed));
  for (const auto& [k, v] : tag.extra) {
    write_comment(out, k, v);
  }
}

const char* pane_name(Pane p) { return p == Pane::kStokes ? "stokes" : "anti_stokes"; }

}  // namespace

std::vector<std::size_t> reference_pixels(const Reference& ref, const geometry::PaneMapping& pane) {
  if (!ref.centre.finite() || !(ref.radius_urad >= 0.0)) {
    throw std::invalid_argument("reference: centre must be finite and radius >= 0");
  }
  const auto pos = geometry::angle_to_pixel(ref.centre, pane);
  if (!pos.on_pane) {
    throw std::out_of_range("reference (" + format_double(ref.centre.x_urad) + ", " +
                            format_double(ref.centre.y_urad) + ") urad lies off the pane");
  }
  const auto nearest = static_cast<std::size_t>(std::lround(pos.row)) * pane.width_px +
                       static_cast<std::size_t>(std::lround(pos.col));
  std::vector<std::size_t> idx;
  if (ref.radius_urad > 0.0) {
    for (int row = 0; row < pane.height_px; ++row) {
      for (int col = 0; col < pane.width_px; ++col) {
        if (inside_disc(geometry::pixel_to_angle(col, row, pane), ref.centre, ref.radius_urad)) {
          idx.push_back(static_cast<std::size_t>(row) * pane.width_px + col);
        }
      }
    }
  }
  // The nearest pixel always belongs to the reference, so a disc smaller than
  // a pixel degrades to the single-pixel reference.
  if (std::find(idx.begin(), idx.end(), nearest) == idx.end()) {
    idx.push_back(nearest);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

Angle2D reference_centroid(const Reference& ref, const geometry::PaneMapping& pane) {
  const auto idx = reference_pixels(ref, pane);
  Angle2D sum;
  for (const auto i : idx) {
    const auto col = static_cast<double>(i % static_cast<std::size_t>(pane.width_px));
    const auto row = static_cast<double>(i / static_cast<std::size_t>(pane.width_px));
    sum = sum + geometry::pixel_to_angle(col, row, pane);
  }
  return sum * (1.0 / static_cast<double>(idx.size()));
}

MomentAccumulator::MomentAccumulator(const geometry::PaneMapping& pane, const Reference& ref)
    : pane_(pane),
      ref_(ref),
      ref_idx_(reference_pixels(ref, pane)),
      sum_I_(2 * pane.pixel_count(), 0.0),
      sum_I2_(2 * pane.pixel_count(), 0.0),
      sum_I_ref_(2 * pane.pixel_count(), 0.0) {}

double MomentAccumulator::reference_value(const Frame& frame) const {
  const auto src = frame.pane(ref_.pane);
  double r = 0.0;
  for (const auto i : ref_idx_) {
    r += src[i];
  }
  return r;
}

void MomentAccumulator::accumulate(const Frame& frame) {
  if (frame.width != pane_.width_px || frame.height != pane_.height_px) {
    throw std::invalid_argument("accumulate: frame is " + std::to_string(frame.width) + "x" +
                                std::to_string(frame.height) + ", accumulator expects " +
                                std::to_string(pane_.width_px) + "x" + std::to_string(pane_.height_px));
  }
  const double r = reference_value(frame);
  const std::size_t n = pane_.pixel_count();
  for (const Pane p : {Pane::kStokes, Pane::kAntiStokes}) {
    const auto src = frame.pane(p);
    const std::size_t off = pane_offset(p, n);
    double* s1 = sum_I_.data() + off;
    double* s2 = sum_I2_.data() + off;
    double* sr = sum_I_ref_.data() + off;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = src[i];
      s1[i] += v;
      s2[i] += v * v;
      sr[i] += v * r;
    }
  }
  sum_ref_ += r;
  sum_ref2_ += r * r;
  ++n_;
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.pane_.width_px != pane_.width_px || other.pane_.height_px != pane_.height_px ||
      other.ref_idx_ != ref_idx_ || other.ref_.pane != ref_.pane) {
    throw std::invalid_argument("merge: accumulators differ in shape or reference");
  }
  for (std::size_t i = 0; i < sum_I_.size(); ++i) {
    sum_I_[i] += other.sum_I_[i];
    sum_I2_[i] += other.sum_I2_[i];
    sum_I_ref_[i] += other.sum_I_ref_[i];
  }
  sum_ref_ += other.sum_ref_;
  sum_ref2_ += other.sum_ref2_;
  n_ += other.n_;
}

std::span<const double> CorrelationMap::pane_values(Pane p) const {
  const std::size_t n = pane.pixel_count();
  return std::span<const double>(values).subspan(pane_offset(p, n), n);
}

double CorrelationMap::at(Pane p, int col, int row) const {
  return pane_values(p)[static_cast<std::size_t>(row) * pane.width_px + col];
}

double CorrelationMap::at_angle(Pane p, const Angle2D& a) const {
  const auto pos = geometry::angle_to_pixel(a, pane);
  if (!pos.on_pane) {
    return kNaN;
  }
  return at(p, static_cast<int>(std::lround(pos.col)), static_cast<int>(std::lround(pos.row)));
}

CorrelationMap correlation_map(const MomentAccumulator& acc) {
  if (acc.n() < 2) {
    throw InsufficientData("correlation map needs at least 2 frames, have " + std::to_string(acc.n()));
  }
  CorrelationMap map;
  map.pane = acc.pane();
  map.reference = acc.reference();
  map.n_frames = acc.n();
  map.values.resize(acc.sum_I().size());
  const long double n = static_cast<long double>(acc.n());
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    map.values[i] = pearson_from_sums(n, acc.sum_I()[i], acc.sum_I2()[i], acc.sum_ref(), acc.sum_ref2(),
                                      acc.sum_I_ref()[i]);
  }
  return map;
}

CorrelationMap correlation_map_two_pass(std::span<const Frame> frames, const geometry::PaneMapping& pane,
                                        const Reference& ref) {
  if (frames.size() < 2) {
    throw InsufficientData("correlation map needs at least 2 frames, have " + std::to_string(frames.size()));
  }
  const MomentAccumulator probe(pane, ref);
  const std::size_t n_px = pane.pixel_count();
  const long double n = static_cast<long double>(frames.size());

  // Extended precision throughout: the centred co-moments of weakly
  // correlated pixels cancel heavily, and this is the reference result.
  std::vector<long double> r(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    r[k] = probe.reference_value(frames[k]);
  }
  const long double mean_r = std::accumulate(r.begin(), r.end(), 0.0L) / n;
  long double var_r = 0.0L;
  for (const long double v : r) {
    var_r += (v - mean_r) * (v - mean_r);
  }

  CorrelationMap map;
  map.pane = pane;
  map.reference = ref;
  map.n_frames = frames.size();
  map.values.assign(2 * n_px, kNaN);
  std::vector<long double> mean(2 * n_px, 0.0L);
  for (const auto& f : frames) {
    for (const Pane p : {Pane::kStokes, Pane::kAntiStokes}) {
      const auto src = f.pane(p);
      const std::size_t off = pane_offset(p, n_px);
      for (std::size_t i = 0; i < n_px; ++i) {
        mean[off + i] += src[i];
      }
    }
  }
  for (auto& m : mean) {
    m /= n;
  }
  std::vector<long double> cov(2 * n_px, 0.0L);
  std::vector<long double> var(2 * n_px, 0.0L);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const long double dr = r[k] - mean_r;
    for (const Pane p : {Pane::kStokes, Pane::kAntiStokes}) {
      const auto src = frames[k].pane(p);
      const std::size_t off = pane_offset(p, n_px);
      for (std::size_t i = 0; i < n_px; ++i) {
        const long double d = src[i] - mean[off + i];
        cov[off + i] += d * dr;
        var[off + i] += d * d;
      }
    }
  }
  if (var_r > 0.0) {
    for (std::size_t i = 0; i < map.values.size(); ++i) {
      if (var[i] > 0.0) {
        map.values[i] = static_cast<double>(cov[i] / std::sqrt(var[i] * var_r));
      }
    }
  }
  return map;
}

std::vector<MomentAccumulator> accumulate_batches(std::span<const Frame> frames, const geometry::PaneMapping& pane,
                                                  const Reference& ref, std::size_t batches) {
  if (batches == 0 || batches > frames.size()) {
    throw std::invalid_argument("accumulate_batches: need 1 <= batches <= frames");
  }
  std::vector<MomentAccumulator> out;
  out.reserve(batches);
  const std::size_t base = frames.size() / batches;
  const std::size_t extra = frames.size() % batches;
  std::size_t start = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    MomentAccumulator acc(pane, ref);
    for (std::size_t k = start; k < start + len; ++k) {
      acc.accumulate(frames[k]);
    }
    out.push_back(std::move(acc));
    start += len;
  }
  return out;
}

MomentAccumulator merge_all(const std::vector<MomentAccumulator>& parts) {
  if (parts.empty()) {
    throw std::invalid_argument("merge_all: no accumulators");
  }
  MomentAccumulator out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    out.merge(parts[i]);
  }
  return out;
}

BatchedCorrelator::BatchedCorrelator(const geometry::PaneMapping& pane, const std::vector<Reference>& refs,
                                     std::uint64_t n_frames, std::size_t batches)
    : n_frames_(n_frames), batches_(batches) {
  if (refs.empty()) {
    throw std::invalid_argument("BatchedCorrelator: no references");
  }
  if (batches == 0 || batches > n_frames) {
    throw std::invalid_argument("BatchedCorrelator: need 1 <= batches <= frames");
  }
  for (const auto& r : refs) {
    parts_.emplace_back(batches, MomentAccumulator(pane, r));
  }
}

void BatchedCorrelator::add(const Frame& frame) {
  if (seen_ >= n_frames_) {
    throw std::logic_error("BatchedCorrelator: more frames than announced");
  }
  const auto b = static_cast<std::size_t>(seen_ * batches_ / n_frames_);
  for (auto& per_ref : parts_) {
    per_ref[b].accumulate(frame);
  }
  ++seen_;
}

Profile cross_section(const CorrelationMap& map, Pane pane, Axis axis, const Angle2D& through) {
  const auto& pm = map.pane;
  const auto pos = geometry::angle_to_pixel(through, pm);
  if (!pos.on_pane) {
    throw std::out_of_range("cross_section: line lies off the pane");
  }
  Profile prof;
  prof.axis = axis;
  if (axis == Axis::kX) {
    const int row = static_cast<int>(std::lround(pos.row));
    for (int col = 0; col < pm.width_px; ++col) {
      prof.coord_urad.push_back(geometry::pixel_to_angle(col, row, pm).x_urad);
      prof.values.push_back(map.at(pane, col, row));
    }
  } else {
    const int col = static_cast<int>(std::lround(pos.col));
    for (int row = 0; row < pm.height_px; ++row) {
      prof.coord_urad.push_back(geometry::pixel_to_angle(col, row, pm).y_urad);
      prof.values.push_back(map.at(pane, col, row));
    }
  }
  return prof;
}

double mode_count_exact(double envelope_fwhm_x, double envelope_fwhm_y, double spot_fwhm_x, double spot_fwhm_y) {
  if (!(envelope_fwhm_x > 0.0 && envelope_fwhm_y > 0.0 && spot_fwhm_x > 0.0 && spot_fwhm_y > 0.0)) {
    throw std::invalid_argument("count_modes: widths must be positive");
  }
  return 2.0 * (envelope_fwhm_x * envelope_fwhm_y) / (spot_fwhm_x * spot_fwhm_y);
}

int count_modes(double envelope_fwhm_x, double envelope_fwhm_y, double spot_fwhm_x, double spot_fwhm_y) {
  return static_cast<int>(std::lround(mode_count_exact(envelope_fwhm_x, envelope_fwhm_y, spot_fwhm_x, spot_fwhm_y)));
}

double virtual_fiber_intensity(const Frame& frame, Pane pane, const VirtualFiber& fiber,
                               const geometry::PaneMapping& mapping) {
  const auto src = frame.pane(pane);
  double total = 0.0;
  for (int row = 0; row < frame.height; ++row) {
    for (int col = 0; col < frame.width; ++col) {
      if (inside_disc(geometry::pixel_to_angle(col, row, mapping), fiber.centre, fiber.radius_urad)) {
        total += src[static_cast<std::size_t>(row) * frame.width + col];
      }
    }
  }
  return total;
}

std::vector<double> virtual_fiber_series(std::span<const Frame> frames, Pane pane, const VirtualFiber& fiber,
                                         const geometry::PaneMapping& mapping) {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    out.push_back(virtual_fiber_intensity(f, pane, fiber, mapping));
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("pearson: need two equal-length samples of size >= 2");
  }
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    return kNaN;
  }
  return sab / std::sqrt(saa * sbb);
}

MeanAndError batch_mean(std::span<const double> values) {
  if (values.size() < 2) {
    throw InsufficientData("batch_mean: need at least 2 batches");
  }
  const double n = static_cast<double>(values.size());
  const double m = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) {
    ss += (v - m) * (v - m);
  }
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

void write_map_csv(const std::string& path, const CorrelationMap& map, const OutputTag& tag) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  write_tag(out, tag);
  write_comment(out, "n_frames", std::to_string(map.n_frames));
  write_comment(out, "ref_pane", pane_name(map.reference.pane));
  write_comment(out, "ref_x_urad", format_double(map.reference.centre.x_urad));
  write_comment(out, "ref_y_urad", format_double(map.reference.centre.y_urad));
  write_comment(out, "ref_radius_urad", format_double(map.reference.radius_urad));
  out << "pane,theta_x_urad,theta_y_urad,C\n";
  for (const Pane p : {Pane::kStokes, Pane::kAntiStokes}) {
    for (int row = 0; row < map.pane.height_px; ++row) {
      for (int col = 0; col < map.pane.width_px; ++col) {
        const auto a = geometry::pixel_to_angle(col, row, map.pane);
        out << pane_name(p) << ',' << format_double(a.x_urad) << ',' << format_double(a.y_urad) << ','
            << format_double(map.at(p, col, row)) << '\n';
      }
    }
  }
}

std::uint16_t correlation_to_gray(double c) {
  if (std::isnan(c)) {
    return 0;
  }
  const double clamped = std::clamp(c, -1.0, 1.0);
  return static_cast<std::uint16_t>(std::lround((clamped + 1.0) * 0.5 * 65535.0));
}

void write_map_pgm(const std::string& path, const CorrelationMap& map, const OutputTag& tag) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  const int w = map.pane.width_px;
  const int h = map.pane.height_px;
  out << "P5\n";
  out << "# config_checksum=" << hex64(tag.config_checksum) << '\n';
  out << "# seed=" << tag.seed << '\n';
  out << w << ' ' << 2 * h << "\n65535\n";
  std::vector<char> row(static_cast<std::size_t>(w) * 2);
  for (const Pane p : {Pane::kStokes, Pane::kAntiStokes}) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const auto g = correlation_to_gray(map.at(p, c, r));
        row[2 * static_cast<std::size_t>(c)] = static_cast<char>(g >> 8);
        row[2 * static_cast<std::size_t>(c) + 1] = static_cast<char>(g & 0xff);
      }
      out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
  }
}

void write_profile_csv(const std::string& path, const Profile& profile, const OutputTag& tag) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  write_tag(out, tag);
  out << (profile.axis == Axis::kX ? "theta_x_urad" : "theta_y_urad") << ",C\n";
  for (std::size_t i = 0; i < profile.values.size(); ++i) {
    out << format_double(profile.coord_urad[i]) << ',' << format_double(profile.values[i]) << '\n';
  }
}

}  // namespace ramsteer
