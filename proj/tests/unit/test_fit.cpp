#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "ramsteer/csv.hpp"
#include "ramsteer/fit.hpp"

using namespace ramsteer;
using geometry::PaneMapping;

namespace {

const PaneMapping kPane = PaneMapping::centred(64, 128, 13e-6, 0.5);

struct Truth {
  Angle2D centre;
  double sx, sy, amp, offset;
};

std::vector<double> gaussian_pane(const PaneMapping& p, const Truth& t) {
  std::vector<double> v(p.pixel_count());
  for (int row = 0; row < p.height_px; ++row) {
    for (int col = 0; col < p.width_px; ++col) {
      const auto a = geometry::pixel_to_angle(col, row, p);
      const double dx = a.x_urad - t.centre.x_urad, dy = a.y_urad - t.centre.y_urad;
      v[static_cast<std::size_t>(row) * p.width_px + col] =
          t.amp * std::exp(-(dx * dx / (2 * t.sx * t.sx) + dy * dy / (2 * t.sy * t.sy))) + t.offset;
    }
  }
  return v;
}

CorrelationMap map_with(const std::vector<double>& stokes, const std::vector<double>& anti, const Reference& ref) {
  CorrelationMap m;
  m.pane = kPane;
  m.reference = ref;
  m.values = stokes;
  m.values.insert(m.values.end(), anti.begin(), anti.end());
  m.n_frames = 100;
  return m;
}

}  // namespace

TEST(SpotFit, NoiselessGaussianRecovered) {
  const Truth t{{12.3, -40.7}, 90.0, 110.0, 0.8, 0.05};
  const auto v = gaussian_pane(kPane, t);
  const auto fit = fit_gaussian_spot(v, kPane, {0, 0}, 300.0);
  ASSERT_TRUE(fit.ok()) << to_string(fit.status);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.centre.x_urad, t.centre.x_urad, 1e-6 * 100);
  EXPECT_NEAR(fit.centre.y_urad, t.centre.y_urad, 1e-6 * 100);
  EXPECT_NEAR(fit.fwhm_x_urad, kFwhmPerSigma * t.sx, 1e-6 * kFwhmPerSigma * t.sx);
  EXPECT_NEAR(fit.fwhm_y_urad, kFwhmPerSigma * t.sy, 1e-6 * kFwhmPerSigma * t.sy);
  EXPECT_NEAR(fit.amplitude, t.amp, 1e-6 * t.amp);
  EXPECT_NEAR(fit.offset, t.offset, 1e-6 * t.amp);
  EXPECT_NEAR(fit.peak(), t.amp + t.offset, 1e-6);
  EXPECT_LT(fit.rms_residual, 1e-7);
}

TEST(SpotFit, RecoversAcrossRandomSpots) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> c(-150, 150), s(60, 130), a(0.2, 1.0), o(-0.05, 0.1);
  for (int i = 0; i < 20; ++i) {
    const Truth t{{c(gen), c(gen)}, s(gen), s(gen), a(gen), o(gen)};
    const auto fit = fit_gaussian_spot(gaussian_pane(kPane, t), kPane, t.centre + Angle2D{20, -15}, 300.0);
    ASSERT_TRUE(fit.ok()) << i << ' ' << to_string(fit.status);
    EXPECT_NEAR(fit.centre.x_urad, t.centre.x_urad, 1e-4);
    EXPECT_NEAR(fit.centre.y_urad, t.centre.y_urad, 1e-4);
    EXPECT_NEAR(fit.fwhm_x_urad / (kFwhmPerSigma * t.sx), 1.0, 1e-6);
  }
}

TEST(SpotFit, NaNAndMaskedPixelsAreSkipped) {
  const Truth t{{-30, 60}, 100.0, 100.0, 0.6, 0.0};
  auto v = gaussian_pane(kPane, t);
  std::vector<std::size_t> masked;
  for (std::size_t i = 0; i < v.size(); i += 13) {
    v[i] = std::nan("");
  }
  for (std::size_t i = 5; i < v.size(); i += 17) {
    v[i] = 50.0;  // outliers, hidden by the mask
    masked.push_back(i);
  }
  const auto fit = fit_gaussian_spot(v, kPane, {0, 0}, 300.0, masked);
  ASSERT_TRUE(fit.ok());
  EXPECT_NEAR(fit.centre.x_urad, -30, 1e-4);
  EXPECT_NEAR(fit.centre.y_urad, 60, 1e-4);
}

TEST(SpotFit, TooFewPixels) {
  const auto v = gaussian_pane(kPane, {{0, 0}, 100, 100, 1, 0});
  const auto fit = fit_gaussian_spot(v, kPane, {0, 0}, 40.0);  // 3x3 pixels
  EXPECT_EQ(fit.status, FitStatus::kTooFewPixels);
  EXPECT_FALSE(fit.ok());
  std::vector<double> all_nan(kPane.pixel_count(), std::nan(""));
  EXPECT_EQ(fit_gaussian_spot(all_nan, kPane, {0, 0}, 300.0).status, FitStatus::kTooFewPixels);
  EXPECT_THROW(fit_gaussian_spot(std::vector<double>(3), kPane, {0, 0}, 300.0), std::invalid_argument);
}

TEST(SpotFit, PureNoiseIsRejected) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n(0.0, 0.02);
    std::vector<double> v(kPane.pixel_count());
    for (auto& x : v) {
      x = n(gen);
    }
    const auto fit = fit_gaussian_spot(v, kPane, {0, 0}, 300.0);
    EXPECT_FALSE(fit.ok()) << "seed " << seed << " amplitude " << fit.amplitude << " rms " << fit.rms_residual;
  }
}

TEST(SpotFit, StatusNames) {
  EXPECT_STREQ(to_string(FitStatus::kOk), "ok");
  EXPECT_STREQ(to_string(FitStatus::kTooFewPixels), "too_few_pixels");
  EXPECT_STREQ(to_string(FitStatus::kNotConverged), "not_converged");
  EXPECT_STREQ(to_string(FitStatus::kDegenerate), "degenerate");
  EXPECT_STREQ(to_string(FitStatus::kOutsideWindow), "outside_window");
  EXPECT_STREQ(to_string(FitStatus::kLowSignal), "low_signal");
}

TEST(ProfileFit, NoiselessProfileRecovered) {
  Profile prof;
  prof.axis = Axis::kY;
  for (int i = -40; i <= 40; ++i) {
    const double y = 26.0 * i;
    prof.coord_urad.push_back(y);
    prof.values.push_back(0.7 * std::exp(-(y - 33.0) * (y - 33.0) / (2 * 95.0 * 95.0)) + 0.02);
  }
  const auto fit = fit_gaussian_profile(prof, 0.0, 300.0);
  ASSERT_TRUE(fit.ok()) << to_string(fit.status);
  EXPECT_NEAR(fit.centre_urad, 33.0, 1e-6 * 100);
  EXPECT_NEAR(fit.fwhm_urad, kFwhmPerSigma * 95.0, 1e-6 * kFwhmPerSigma * 95.0);
  EXPECT_NEAR(fit.amplitude, 0.7, 1e-6);
  EXPECT_NEAR(fit.offset, 0.02, 1e-6);
}

TEST(ProfileFit, NeedsSevenSamples) {
  Profile prof;
  for (int i = 0; i < 6; ++i) {
    prof.coord_urad.push_back(26.0 * i);
    prof.values.push_back(std::exp(-i * i / 4.0));
  }
  EXPECT_EQ(fit_gaussian_profile(prof, 60.0, 1000.0).status, FitStatus::kTooFewPixels);
}

TEST(TwinSpot, FoundOnAntiStokesPane) {
  const auto stokes = gaussian_pane(kPane, {{100, 50}, 100, 100, 1.0, 0.0});
  const auto anti = gaussian_pane(kPane, {{-98.1, -49.1}, 100, 100, 0.8, 0.01});
  const auto map = map_with(stokes, anti, {Pane::kStokes, {100, 50}, 0});
  const auto fit = locate_twin_spot(map, 300.0);
  ASSERT_TRUE(fit.ok());
  EXPECT_NEAR(fit.centre.x_urad, -98.1, 1e-4);
  EXPECT_NEAR(fit.centre.y_urad, -49.1, 1e-4);
  const auto ref = locate_reference_spot(map, 300.0);
  ASSERT_TRUE(ref.ok());
  EXPECT_NEAR(ref.centre.x_urad, 100, 1e-4);
}

TEST(TwinSpot, ReferencePixelsMaskedOnSamePane) {
  // Reference on the anti-Stokes pane: its self-correlation spike must not seed the fit.
  auto anti = gaussian_pane(kPane, {{0, 300}, 100, 100, 0.5, 0.0});
  const Reference ref{Pane::kAntiStokes, {0, -400}, 0};
  anti[reference_pixels(ref, kPane)[0]] = 1.0;
  const auto map = map_with(std::vector<double>(kPane.pixel_count(), 0.0), anti, ref);
  const auto fit = locate_twin_spot(map, 300.0);
  ASSERT_TRUE(fit.ok());
  EXPECT_NEAR(fit.centre.y_urad, 300, 1e-3);
}

TEST(TwinSpot, CrossSectionPeakMatchesFitCentre) {
  const auto anti = gaussian_pane(kPane, {{41, -77}, 100, 100, 0.8, 0.0});
  const auto map = map_with(std::vector<double>(kPane.pixel_count(), 0.0), anti, {Pane::kStokes, {0, 0}, 0});
  const auto fit = locate_twin_spot(map, 300.0);
  ASSERT_TRUE(fit.ok());
  for (const Axis axis : {Axis::kX, Axis::kY}) {
    const auto prof = cross_section(map, Pane::kAntiStokes, axis, fit.centre);
    const auto it = std::max_element(prof.values.begin(), prof.values.end());
    const double peak = prof.coord_urad[static_cast<std::size_t>(it - prof.values.begin())];
    const double c = axis == Axis::kX ? fit.centre.x_urad : fit.centre.y_urad;
    EXPECT_LE(std::abs(peak - c), kPane.urad_per_pixel());
  }
}

TEST(FitCsv, NamedHeaderSingleRow) {
  GaussianSpotFit f;
  f.centre = {1.5, -2};
  f.fwhm_x_urad = 240;
  f.fwhm_y_urad = 250;
  f.amplitude = 0.7;
  f.status = FitStatus::kLowSignal;
  const auto path = (std::filesystem::temp_directory_path() / "ramsteer_fit.csv").string();
  write_fit_csv(path, f, {1, 2, {{"role", "twin"}}});
  const auto t = read_csv_file(path);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.header.size(), 10u);
  EXPECT_EQ(t.header.front(), "centre_x_urad");
  EXPECT_EQ(t.header.back(), "status");
  EXPECT_EQ(t.rows[0].back(), "low_signal");
  EXPECT_EQ(parse_double(t.rows[0][0]), 1.5);
}
