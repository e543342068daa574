#include "ramsteer/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace ramsteer {
namespace {

constexpr double kLn2 = 0.69314718055994531;
constexpr double kInvSqrt2 = 0.70710678118654752;
constexpr double kRenderHalfWidthSigma = 8.0;

// Probability mass of a standard normal on [a, b], accurate in both tails.
double normal_interval(double a, double b) {
  if (a >= 0.0) {
    return 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
  }
  if (b <= 0.0) {
    return 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
  }
  return 1.0 - 0.5 * std::erfc(-a * kInvSqrt2) - 0.5 * std::erfc(b * kInvSqrt2);
}

struct AxisWeights {
  int first = 0;
  std::vector<double> w;
  double total = 0.0;
};

// Pixel-integrated weights of a Gaussian centred at `centre_px` along one
// axis of `n` pixels; pixel i covers [i - 0.5, i + 0.5].
AxisWeights axis_weights(double centre_px, double sigma_px, int n) {
  AxisWeights out;
  const double reach = kRenderHalfWidthSigma * sigma_px;
  const int lo = std::max(0, static_cast<int>(std::floor(centre_px - reach)));
  const int hi = std::min(n - 1, static_cast<int>(std::ceil(centre_px + reach)));
  if (hi < lo) {
    return out;
  }
  out.first = lo;
  out.w.resize(static_cast<std::size_t>(hi - lo + 1));
  for (int i = lo; i <= hi; ++i) {
    const double a = (i - 0.5 - centre_px) / sigma_px;
    const double b = (i + 0.5 - centre_px) / sigma_px;
    const double w = normal_interval(a, b);
    out.w[static_cast<std::size_t>(i - lo)] = w;
    out.total += w;
  }
  return out;
}

void render_pane(std::span<const double> intensities, std::span<const Angle2D> centres,
                 std::span<const Mode> modes, const geometry::PaneMapping& pane, std::vector<double>& acc,
                 FrameMetadata& meta, int pane_index) {
  const double per_px = pane.urad_per_pixel();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const double intensity = intensities[m];
    meta.sampled_energy[pane_index] += intensity;
    const auto pos = geometry::angle_to_pixel(centres[m], pane);
    if (!pos.on_pane) {
      ++meta.clipped_modes[pane_index];
    }
    if (intensity <= 0.0) {
      continue;
    }
    const double sigma_px = modes[m].sigma_urad / per_px;
    const AxisWeights wx = axis_weights(pos.col, sigma_px, pane.width_px);
    const AxisWeights wy = axis_weights(pos.row, sigma_px, pane.height_px);
    const double inside = wx.total * wy.total;
    meta.rendered_energy[pane_index] += intensity * inside;
    meta.clipped_energy[pane_index] += intensity * (1.0 - inside);
    for (std::size_t j = 0; j < wy.w.size(); ++j) {
      const double row_scale = intensity * wy.w[j];
      double* dst = acc.data() + static_cast<std::size_t>(wy.first + static_cast<int>(j)) * pane.width_px + wx.first;
      for (std::size_t i = 0; i < wx.w.size(); ++i) {
        dst[i] += row_scale * wx.w[i];
      }
    }
  }
}

void apply_noise(std::span<const double> expected, double floor, std::span<float> out, Philox4x32& rng,
                 NoiseModel noise) {
  if (noise == NoiseModel::kExpected) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<float>(expected[i] + floor);
    }
    return;
  }
  std::poisson_distribution<long> poisson;
  using Param = std::poisson_distribution<long>::param_type;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mean = expected[i] + floor;
    out[i] = mean > 0.0 ? static_cast<float>(poisson(rng, Param(mean))) : 0.0f;
  }
}

}  // namespace

ModeSet build_mode_set(const BeamGeometry& geom, const ModeSetParams& p) {
  geom.validate();
  if (!(p.gain_shrink >= 1.0)) {
    throw std::invalid_argument("modes.gain_shrink must be >= 1");
  }
  if (!(p.spot_shape_constant > 0.0)) {
    throw std::invalid_argument("modes.spot_shape_constant must be positive");
  }
  if (!(p.mean_photons_per_mode >= 0.0)) {
    throw std::invalid_argument("modes.mean_photons_per_mode must be >= 0");
  }
  if (!(p.grid_spacing_ratio > 0.0)) {
    throw std::invalid_argument("modes.grid_spacing_ratio must be positive");
  }

  ModeSet ms;
  ms.source_diameter_m = 2.0 * geom.w0_write_m / p.gain_shrink;
  ms.mode_fwhm_urad = p.spot_shape_constant * geom.lambda_write_m / ms.source_diameter_m * 1e6;
  ms.spot_fwhm_urad = std::sqrt(2.0) * ms.mode_fwhm_urad;
  ms.envelope_fwhm_urad = p.envelope_fwhm_urad;
  ms.grid_spacing_urad = p.grid_spacing_ratio * ms.mode_fwhm_urad;
  if (!(p.envelope_fwhm_urad >= ms.spot_fwhm_urad)) {
    throw std::invalid_argument("modes.envelope_fwhm_urad (" + std::to_string(p.envelope_fwhm_urad) +
                                ") is smaller than one correlation spot (" + std::to_string(ms.spot_fwhm_urad) +
                                ")");
  }
  const double sigma = ms.mode_fwhm_urad / kFwhmPerSigma;
  const double radius = 0.5 * p.envelope_fwhm_urad;
  const int n = static_cast<int>(std::floor(radius / ms.grid_spacing_urad + 1e-9));
  for (int j = -n; j <= n; ++j) {
    for (int i = -n; i <= n; ++i) {
      const Angle2D c{i * ms.grid_spacing_urad, j * ms.grid_spacing_urad};
      if (c.norm() <= radius * (1.0 + 1e-12)) {
        ms.modes.push_back({c, p.mean_photons_per_mode, sigma});
      }
    }
  }
  return ms;
}

void RetrievalModel::validate() const {
  if (!(eta0 >= 0.0 && eta0 <= 1.0)) {
    throw std::invalid_argument("retrieval.eta0 must lie in [0, 1]");
  }
  if (!(diffusion_m2_per_s >= 0.0)) {
    throw std::invalid_argument("retrieval.diffusion_m2_per_s must be >= 0");
  }
  if (!(tau_storage_s >= 0.0)) {
    throw std::invalid_argument("retrieval.tau_storage_s must be >= 0");
  }
  if (!(aberration_scale_urad > 0.0)) {
    throw std::invalid_argument("retrieval.aberration_scale_urad must be positive");
  }
  if (!(noise_floor >= 0.0)) {
    throw std::invalid_argument("retrieval.noise_floor must be >= 0");
  }
}

double retrieval_efficiency(const Angle2D& theta_S, const Angle2D& theta_w, const Angle2D& theta_read,
                            const RetrievalModel& rm, const BeamGeometry& geom) {
  const auto K = geometry::angle_to_k(theta_w - theta_S, geom.lambda_write_m);
  const double k2 = K.kx * K.kx + K.ky * K.ky;
  const double r2 = theta_read.x_urad * theta_read.x_urad + theta_read.y_urad * theta_read.y_urad;
  const double s = rm.aberration_scale_urad;
  return rm.eta0 * std::exp(-rm.diffusion_m2_per_s * k2 * rm.tau_storage_s) * std::exp(-r2 / (2.0 * s * s));
}

double diffusion_fwhm_urad(const RetrievalModel& rm, const BeamGeometry& geom) {
  const double dt = rm.diffusion_m2_per_s * rm.tau_storage_s;
  if (dt <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  // exp(-D tau (2 pi theta / lambda)^2) = 1/2
  const double half = std::sqrt(kLn2 / dt) * geom.lambda_write_m / (2.0 * kPi);
  return 2.0 * half * 1e6;
}

double readout_envelope_fwhm_urad(const ModeSet& ms, const RetrievalModel& rm, const BeamGeometry& geom) {
  return std::min(ms.envelope_fwhm_urad, diffusion_fwhm_urad(rm, geom));
}

double diffusion_for_fwhm(double target_fwhm_urad, double tau_storage_s, const BeamGeometry& geom) {
  if (!(target_fwhm_urad > 0.0) || !(tau_storage_s > 0.0)) {
    throw std::invalid_argument("diffusion_for_fwhm: target and tau must be positive");
  }
  const double k_half = 2.0 * kPi * (0.5 * target_fwhm_urad * 1e-6) / geom.lambda_write_m;
  return kLn2 / (tau_storage_s * k_half * k_half);
}

ShotIntensities sample_shot(const Scenario& sc, const Angle2D& theta_read, Philox4x32& rng) {
  const auto& modes = sc.modes.modes;
  ShotIntensities out;
  out.stokes.resize(modes.size());
  out.anti_stokes.resize(modes.size());
  std::exponential_distribution<double> thermal(1.0);
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const double is = modes[m].mean_photons * thermal(rng);
    const double eta = retrieval_efficiency(modes[m].theta_S, sc.theta_write, theta_read, sc.retrieval, sc.geom);
    out.stokes[m] = is;
    out.anti_stokes[m] = eta * is;
  }
  return out;
}

Frame::Frame(int w, int h)
    : width(w),
      height(h),
      stokes(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0f),
      anti_stokes(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0f) {}

Frame render_frame(const ShotIntensities& shot, const Scenario& sc, const Angle2D& theta_read,
                   Philox4x32& rng_stokes, Philox4x32& rng_anti_stokes, NoiseModel noise) {
  const auto& modes = sc.modes.modes;
  if (shot.stokes.size() != modes.size() || shot.anti_stokes.size() != modes.size()) {
    throw std::invalid_argument("render_frame: intensity count does not match the mode set");
  }
  const auto& pane = sc.pane;
  Frame frame(pane.width_px, pane.height_px);
  frame.readout_angle = theta_read;

  std::vector<Angle2D> stokes_centres(modes.size());
  std::vector<Angle2D> anti_centres(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) {
    stokes_centres[m] = modes[m].theta_S;
    anti_centres[m] = geometry::phase_match(sc.theta_write, modes[m].theta_S, theta_read, sc.geom);
  }

  std::vector<double> acc(pane.pixel_count(), 0.0);
  render_pane(shot.stokes, stokes_centres, modes, pane, acc, frame.meta, 0);
  apply_noise(acc, sc.retrieval.noise_floor, frame.stokes, rng_stokes, noise);

  std::fill(acc.begin(), acc.end(), 0.0);
  render_pane(shot.anti_stokes, anti_centres, modes, pane, acc, frame.meta, 1);
  apply_noise(acc, sc.retrieval.noise_floor, frame.anti_stokes, rng_anti_stokes, noise);
  return frame;
}

Frame simulate_shot(const Scenario& sc, std::uint64_t seed, std::uint64_t shot, const Angle2D& theta_read,
                    NoiseModel noise) {
  const Philox4x32 base = make_stream(seed, StreamDomain::kScatteringShot, shot);
  Philox4x32 rng_intensity = base.split(0);
  Philox4x32 rng_stokes = base.split(1);
  Philox4x32 rng_anti = base.split(2);
  const ShotIntensities intensities = sample_shot(sc, theta_read, rng_intensity);
  Frame f = render_frame(intensities, sc, theta_read, rng_stokes, rng_anti, noise);
  f.shot_index = shot;
  return f;
}

void simulate_frames(const Scenario& sc, std::size_t n_frames, std::span<const Angle2D> schedule,
                     std::uint64_t seed, const std::function<void(Frame&&)>& sink, unsigned threads) {
  if (n_frames == 0) {
    throw std::invalid_argument("simulate: n_frames must be >= 1");
  }
  if (!schedule.empty() && schedule.size() != n_frames) {
    throw std::invalid_argument("simulate: schedule has " + std::to_string(schedule.size()) +
                                " entries, expected " + std::to_string(n_frames));
  }
  sc.retrieval.validate();
  const auto read_angle = [&](std::size_t shot) { return schedule.empty() ? Angle2D{} : schedule[shot]; };

  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_frames));
  if (workers <= 1) {
    for (std::size_t shot = 0; shot < n_frames; ++shot) {
      sink(simulate_shot(sc, seed, shot, read_angle(shot)));
    }
    return;
  }

  const std::size_t batch = 16 * static_cast<std::size_t>(workers);
  std::vector<Frame> buffer(batch);
  for (std::size_t start = 0; start < n_frames; start += batch) {
    const std::size_t count = std::min(batch, n_frames - start);
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += workers) {
          buffer[i] = simulate_shot(sc, seed, start + i, read_angle(start + i));
        }
      });
    }
    pool.clear();
    for (std::size_t i = 0; i < count; ++i) {
      sink(std::move(buffer[i]));
    }
  }
}

FrameStack simulate_stack(const Scenario& sc, std::size_t n_frames, std::span<const Angle2D> schedule,
                          std::uint64_t seed, std::uint64_t config_checksum, unsigned threads) {
  FrameStack stack;
  stack.width = sc.pane.width_px;
  stack.height = sc.pane.height_px;
  stack.pixel_pitch_m = sc.pane.pixel_pitch_m;
  stack.f3_m = sc.pane.f3_m;
  stack.seed = seed;
  stack.config_checksum = config_checksum;
  stack.frames.reserve(n_frames);
  simulate_frames(sc, n_frames, schedule, seed, [&](Frame&& f) { stack.frames.push_back(std::move(f)); }, threads);
  return stack;
}

}  // namespace ramsteer
