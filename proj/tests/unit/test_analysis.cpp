#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "ramsteer/analysis.hpp"
#include "ramsteer/config.hpp"
#include "ramsteer/csv.hpp"

using namespace ramsteer;
using geometry::PaneMapping;
namespace fs = std::filesystem;

namespace {

// Tiny pane: 1 urad per pixel, origin at the centre pixel.
PaneMapping small_pane(int w, int h) { return PaneMapping::centred(w, h, 1e-6, 1.0); }

Angle2D pixel_angle(const PaneMapping& p, int col, int row) { return geometry::pixel_to_angle(col, row, p); }

// Integer-valued frames with a shared thermal component so pixels correlate.
std::vector<Frame> random_stack(int w, int h, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::poisson_distribution<int> pois(40.0);
  std::exponential_distribution<double> ex(1.0 / 50);
  std::vector<Frame> out;
  for (int k = 0; k < n; ++k) {
    Frame f(w, h);
    const double common = ex(gen);
    for (std::size_t i = 0; i < f.stokes.size(); ++i) {
      f.stokes[i] = static_cast<float>(pois(gen) + std::floor(common * static_cast<double>(i % 3)));
      f.anti_stokes[i] = static_cast<float>(pois(gen) + std::floor(common * static_cast<double>((i + 1) % 2)));
    }
    out.push_back(std::move(f));
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ramsteer_analysis";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Reference, SinglePixelIsNearest) {
  const auto p = small_pane(5, 5);
  const auto idx = reference_pixels({Pane::kStokes, {1.3, -0.6}, 0.0}, p);
  ASSERT_EQ(idx.size(), 1u);
  EXPECT_EQ(idx[0], 1u * 5 + 3);  // row 2 - 1, col 2 + 1
}

TEST(Reference, DiscUsesStrictInequalityAndKeepsNearest) {
  const auto p = small_pane(7, 7);
  // Radius exactly 1: the four edge neighbours sit on the boundary and are excluded.
  EXPECT_EQ(reference_pixels({Pane::kStokes, {0, 0}, 1.0}, p).size(), 1u);
  EXPECT_EQ(reference_pixels({Pane::kStokes, {0, 0}, 1.01}, p).size(), 5u);
  EXPECT_EQ(reference_pixels({Pane::kStokes, {0, 0}, 1.5}, p).size(), 9u);
  // A disc between pixel centres still keeps the nearest pixel.
  EXPECT_EQ(reference_pixels({Pane::kStokes, {0.4, 0.4}, 0.2}, p).size(), 1u);
}

TEST(Reference, OffPaneThrows) {
  const auto p = small_pane(5, 5);
  EXPECT_THROW(reference_pixels({Pane::kStokes, {10, 0}, 0.0}, p), std::out_of_range);
  EXPECT_THROW(reference_pixels({Pane::kStokes, {0, 0}, -1.0}, p), std::invalid_argument);
}

TEST(Reference, CentroidSnapsToPixelCentres) {
  const auto p = small_pane(9, 9);
  const auto c = reference_centroid({Pane::kStokes, {1.3, -0.6}, 0.0}, p);
  EXPECT_EQ(c.x_urad, 1.0);
  EXPECT_EQ(c.y_urad, -1.0);
  const auto d = reference_centroid({Pane::kStokes, {0, 0}, 2.5}, p);
  EXPECT_NEAR(d.x_urad, 0.0, 1e-12);
  EXPECT_NEAR(d.y_urad, 0.0, 1e-12);
}

TEST(Accumulator, EmptyPlusFrameHasOneShot) {
  const auto p = small_pane(3, 3);
  MomentAccumulator acc(p, {Pane::kStokes, {0, 0}, 0});
  EXPECT_EQ(acc.n(), 0u);
  acc.accumulate(Frame(3, 3));
  EXPECT_EQ(acc.n(), 1u);
  EXPECT_THROW(correlation_map(acc), InsufficientData);
  EXPECT_THROW(acc.accumulate(Frame(4, 3)), std::invalid_argument);
}

TEST(Correlation, HandStackPairedPixelIsOne) {
  // Two pixels, three frames: (1,2), (2,4), (3,6).
  const auto p = small_pane(2, 1);
  std::vector<Frame> frames;
  for (float v : {1.0f, 2.0f, 3.0f}) {
    Frame f(2, 1);
    f.stokes = {v, 2 * v};
    frames.push_back(f);
  }
  MomentAccumulator acc(p, {Pane::kStokes, pixel_angle(p, 0, 0), 0});
  for (const auto& f : frames) {
    acc.accumulate(f);
  }
  const auto map = correlation_map(acc);
  EXPECT_DOUBLE_EQ(map.at(Pane::kStokes, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(map.at(Pane::kStokes, 1, 0), 1.0);
  // Anti-Stokes pane is all zero: undefined, not zero.
  EXPECT_TRUE(std::isnan(map.at(Pane::kAntiStokes, 0, 0)));
  EXPECT_EQ(map.n_frames, 3u);
}

TEST(Correlation, AnticorrelatedPixelIsMinusOne) {
  const auto p = small_pane(3, 1);
  MomentAccumulator acc(p, {Pane::kStokes, pixel_angle(p, 0, 0), 0});
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> u(0, 100);
  for (int k = 0; k < 50; ++k) {
    Frame f(3, 1);
    const float v = static_cast<float>(u(gen));
    f.stokes = {v, 100.0f - v, 7.0f};
    f.anti_stokes = {100.0f - v, v, static_cast<float>(u(gen))};
    acc.accumulate(f);
  }
  const auto map = correlation_map(acc);
  EXPECT_DOUBLE_EQ(map.at(Pane::kStokes, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(map.at(Pane::kStokes, 1, 0), -1.0);
  EXPECT_TRUE(std::isnan(map.at(Pane::kStokes, 2, 0)));
  EXPECT_DOUBLE_EQ(map.at(Pane::kAntiStokes, 0, 0), -1.0);
  EXPECT_DOUBLE_EQ(map.at(Pane::kAntiStokes, 1, 0), 1.0);
}

TEST(Correlation, ConstantNonIntegerPixelIsNaN) {
  const auto p = small_pane(2, 1);
  MomentAccumulator acc(p, {Pane::kStokes, pixel_angle(p, 0, 0), 0});
  for (int k = 0; k < 1000; ++k) {
    Frame f(2, 1);
    f.stokes = {static_cast<float>(k % 7), 0.1f};
    acc.accumulate(f);
  }
  EXPECT_TRUE(std::isnan(correlation_map(acc).at(Pane::kStokes, 1, 0)));
}

TEST(Correlation, StreamingEqualsTwoPassProperty) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = small_pane(6, 5);
    const auto frames = random_stack(6, 5, 100, seed);
    for (const Reference ref : {Reference{Pane::kStokes, {0, 0}, 0}, Reference{Pane::kAntiStokes, {1, 0}, 1.6}}) {
      MomentAccumulator acc(p, ref);
      for (const auto& f : frames) {
        acc.accumulate(f);
      }
      const auto a = correlation_map(acc);
      const auto b = correlation_map_two_pass(frames, p, ref);
      ASSERT_EQ(a.values.size(), b.values.size());
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (std::isnan(b.values[i])) {
          EXPECT_TRUE(std::isnan(a.values[i]));
          continue;
        }
        EXPECT_NEAR(a.values[i], b.values[i], 1e-12 * std::max(1.0, std::abs(b.values[i])));
        EXPECT_LE(std::abs(a.values[i]), 1.0 + 1e-9);
      }
    }
  }
}

TEST(Correlation, MergeIsBitStableUnderReordering) {
  const auto p = small_pane(5, 4);
  const auto frames = random_stack(5, 4, 97, 3);
  const Reference ref{Pane::kStokes, {0, 0}, 0};
  MomentAccumulator seq(p, ref);
  for (const auto& f : frames) {
    seq.accumulate(f);
  }
  const auto expect = correlation_map(seq);
  auto parts = accumulate_batches(frames, p, ref, 7);
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(parts.begin(), parts.end(), gen);
    const auto merged = merge_all(parts);
    EXPECT_EQ(merged.n(), 97u);
    EXPECT_EQ(merged.sum_I(), seq.sum_I());
    EXPECT_EQ(merged.sum_I_ref(), seq.sum_I_ref());
    const auto got = correlation_map(merged);
    for (std::size_t i = 0; i < got.values.size(); ++i) {
      if (std::isnan(expect.values[i])) {
        EXPECT_TRUE(std::isnan(got.values[i]));
      } else {
        EXPECT_EQ(got.values[i], expect.values[i]);
      }
    }
  }
}

TEST(Correlation, MergeRejectsMismatchedReference) {
  const auto p = small_pane(5, 4);
  MomentAccumulator a(p, {Pane::kStokes, {0, 0}, 0});
  MomentAccumulator b(p, {Pane::kStokes, {1, 0}, 0});
  EXPECT_THROW(a.merge(b), std::invalid_argument);
}

TEST(Correlation, BatchedCorrelatorMatchesBatches) {
  const auto p = small_pane(4, 4);
  const auto frames = random_stack(4, 4, 23, 5);
  const std::vector<Reference> refs{{Pane::kStokes, {0, 0}, 0}, {Pane::kAntiStokes, {-1, 1}, 0}};
  BatchedCorrelator bc(p, refs, frames.size(), 4);
  for (const auto& f : frames) {
    bc.add(f);
  }
  EXPECT_EQ(bc.frames_seen(), 23u);
  EXPECT_THROW(bc.add(frames[0]), std::logic_error);
  for (std::size_t r = 0; r < refs.size(); ++r) {
    std::uint64_t total = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      total += bc.batch(r, b).n();
      EXPECT_GE(bc.batch(r, b).n(), 5u);
    }
    EXPECT_EQ(total, 23u);
    MomentAccumulator seq(p, refs[r]);
    for (const auto& f : frames) {
      seq.accumulate(f);
    }
    EXPECT_EQ(bc.merged(r).sum_I_ref(), seq.sum_I_ref());
  }
}

TEST(CrossSection, LengthAndSymmetry) {
  const auto p = small_pane(9, 7);
  CorrelationMap map;
  map.pane = p;
  map.values.assign(2 * p.pixel_count(), 0.0);
  for (int row = 0; row < 7; ++row) {
    for (int col = 0; col < 9; ++col) {
      const auto a = pixel_angle(p, col, row);
      map.values[p.pixel_count() + static_cast<std::size_t>(row) * 9 + col] = std::exp(-0.1 * a.norm() * a.norm());
    }
  }
  const auto px = cross_section(map, Pane::kAntiStokes, Axis::kX, {0, 0});
  const auto py = cross_section(map, Pane::kAntiStokes, Axis::kY, {0, 0});
  ASSERT_EQ(px.values.size(), 9u);
  ASSERT_EQ(py.values.size(), 7u);
  for (std::size_t i = 0; i < px.values.size(); ++i) {
    EXPECT_DOUBLE_EQ(px.values[i], px.values[px.values.size() - 1 - i]);
    EXPECT_DOUBLE_EQ(px.coord_urad[i], -px.coord_urad[px.values.size() - 1 - i]);
  }
  for (std::size_t i = 0; i < py.values.size(); ++i) {
    EXPECT_DOUBLE_EQ(py.values[i], py.values[py.values.size() - 1 - i]);
  }
  EXPECT_THROW(cross_section(map, Pane::kAntiStokes, Axis::kX, {100, 0}), std::out_of_range);
}

TEST(ModeCount, EnvelopeEqualSpotIsTwo) { EXPECT_EQ(count_modes(240, 240), 2); }

TEST(ModeCount, CalibratedWriteAndReadout) {
  const auto sc = make_scenario(default_config());
  EXPECT_EQ(count_modes(sc.modes.envelope_fwhm_urad, sc.modes.spot_fwhm_urad), 20);
  EXPECT_EQ(count_modes(readout_envelope_fwhm_urad(sc.modes, sc.retrieval, sc.geom), sc.modes.spot_fwhm_urad), 10);
}

TEST(ModeCount, QuadraticScalingProperty) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> w(50, 2000), k(0.1, 10);
  for (int i = 0; i < 200; ++i) {
    const double ex = w(gen), ey = w(gen), s = w(gen), t = w(gen), f = k(gen);
    EXPECT_NEAR(mode_count_exact(f * ex, f * ey, s, t), f * f * mode_count_exact(ex, ey, s, t),
                1e-12 * f * f * mode_count_exact(ex, ey, s, t));
  }
  EXPECT_THROW(count_modes(0, 10), std::invalid_argument);
  EXPECT_EQ(count_modes(480, 480, 240, 240), 8);
  EXPECT_EQ(count_modes(480, 240, 240, 240), 4);
}

TEST(VirtualFiber, WholePaneAndZeroRadius) {
  const auto p = small_pane(5, 5);
  Frame f(5, 5);
  std::iota(f.stokes.begin(), f.stokes.end(), 1.0f);
  EXPECT_EQ(virtual_fiber_intensity(f, Pane::kStokes, {{0, 0}, 100.0}, p), 25.0 * 26 / 2);
  EXPECT_EQ(virtual_fiber_intensity(f, Pane::kStokes, {{0, 0}, 0.0}, p), 0.0);
  EXPECT_EQ(virtual_fiber_intensity(f, Pane::kStokes, {{0, 0}, 1.01}, p), 13 + 8 + 18 + 12 + 14);
}

TEST(VirtualFiber, FiberPearsonMatchesMapAtFiberCentre) {
  auto cfg = default_config();
  const auto sc = make_scenario(cfg);
  const auto stack = simulate_stack(sc, 600, {}, 31, 0, 0);
  const Angle2D s_centre = pixel_angle(sc.pane, 32, 64 + 6);
  const Angle2D twin = geometry::phase_match({0, 0}, s_centre, {0, 0}, sc.geom);
  const auto tp = geometry::angle_to_pixel(twin, sc.pane);
  const Angle2D aS_centre = pixel_angle(sc.pane, static_cast<int>(std::lround(tp.col)),
                                        static_cast<int>(std::lround(tp.row)));
  const VirtualFiber stokes_fiber{s_centre, 40.0};
  const VirtualFiber aS_fiber{aS_centre, 0.4 * sc.pane.urad_per_pixel()};  // one pixel
  const auto a = virtual_fiber_series(stack.frames, Pane::kStokes, stokes_fiber, sc.pane);
  const auto b = virtual_fiber_series(stack.frames, Pane::kAntiStokes, aS_fiber, sc.pane);
  const double r = pearson(a, b);

  MomentAccumulator acc(sc.pane, {Pane::kStokes, s_centre, 40.0});
  for (const auto& f : stack.frames) {
    acc.accumulate(f);
  }
  const double c = correlation_map(acc).at_angle(Pane::kAntiStokes, aS_centre);
  EXPECT_GT(c, 0.2);
  const double se = (1 - c * c) / std::sqrt(static_cast<double>(stack.frames.size()) - 3);
  EXPECT_NEAR(r, c, 3 * se);
  EXPECT_NEAR(r, c, 1e-9);  // same estimator on the same samples
}

TEST(Stats, PearsonAndBatchMean) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, z{5, 5, 5, 5};
  EXPECT_DOUBLE_EQ(pearson(a, b), 1.0);
  EXPECT_TRUE(std::isnan(pearson(a, z)));
  EXPECT_THROW(pearson(a, std::vector<double>{1, 2}), std::invalid_argument);
  const auto m = batch_mean(a);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.stderr_, std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3 / 4), 1e-15);
  EXPECT_THROW(batch_mean(std::vector<double>{1.0}), InsufficientData);
}

TEST(Export, GrayMapping) {
  EXPECT_EQ(correlation_to_gray(-1.0), 0);
  EXPECT_EQ(correlation_to_gray(1.0), 65535);
  EXPECT_EQ(correlation_to_gray(0.0), 32768);
  EXPECT_EQ(correlation_to_gray(std::nan("")), 0);
  EXPECT_EQ(correlation_to_gray(1.0 + 1e-10), 65535);
}

TEST(Export, PgmAndCsvLayout) {
  const auto p = small_pane(3, 2);
  CorrelationMap map;
  map.pane = p;
  map.values = {-1, 0, 1, 0.5, std::nan(""), 0, 1, 1, 1, 1, 1, -1};
  map.n_frames = 10;
  const OutputTag tag{0x1234, 77, {}};
  const auto pgm = scratch("m.pgm");
  write_map_pgm(pgm.string(), map, tag);
  std::ifstream in(pgm, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes.rfind("P5\n", 0), 0u);
  EXPECT_NE(bytes.find("# config_checksum=0000000000001234"), std::string::npos);
  EXPECT_NE(bytes.find("# seed=77"), std::string::npos);
  EXPECT_NE(bytes.find("3 4\n65535\n"), std::string::npos);
  const std::string px = bytes.substr(bytes.size() - 24);
  ASSERT_EQ(px.size(), 24u);
  EXPECT_EQ(static_cast<unsigned char>(px[0]), 0);
  EXPECT_EQ(static_cast<unsigned char>(px[4]), 0xff);  // C = 1 big-endian high byte
  EXPECT_EQ(static_cast<unsigned char>(px[5]), 0xff);
  EXPECT_EQ(static_cast<unsigned char>(px[8]) << 8 | static_cast<unsigned char>(px[9]), 0);  // NaN

  const auto csv = scratch("m.csv");
  write_map_csv(csv.string(), map, tag);
  const auto t = read_csv_file(csv.string());
  EXPECT_EQ(t.header, (std::vector<std::string>{"pane", "theta_x_urad", "theta_y_urad", "C"}));
  ASSERT_EQ(t.rows.size(), 12u);
  EXPECT_EQ(t.rows[4][3], "nan");
  EXPECT_EQ(t.rows[11][0], "anti_stokes");
  EXPECT_EQ(parse_double(t.rows[11][3]), -1.0);
}
