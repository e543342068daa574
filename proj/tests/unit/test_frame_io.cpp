#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ramsteer/config.hpp"
#include "ramsteer/csv.hpp"
#include "ramsteer/frame_io.hpp"

using namespace ramsteer;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ramsteer_frame_io";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FrameStack tiny_stack(std::size_t n, std::uint64_t seed) {
  auto cfg = default_config();
  cfg.camera.width_px = 16;
  cfg.camera.height_px = 24;
  cfg.camera.pixel_pitch_m = 52e-6;  // keep the 16x24 pane covering the envelope
  const auto sc = make_scenario(cfg);
  return simulate_stack(sc, n, {}, seed, config_checksum(cfg), 1);
}

std::uint32_t u32_at(const std::vector<unsigned char>& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

}  // namespace

TEST(Rmns, HeaderLayoutIsLittleEndian) {
  const auto stack = tiny_stack(3, 17);
  const auto path = scratch("layout.rmns");
  write_stack(path.string(), stack);
  const auto bytes = slurp(path);
  ASSERT_EQ(kRmnsHeaderBytes, 50u);
  ASSERT_EQ(bytes.size(), kRmnsHeaderBytes + 3 * 2 * 16 * 24 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RMNS");
  EXPECT_EQ(bytes[4] | bytes[5] << 8, kRmnsVersion);
  EXPECT_EQ(u32_at(bytes, 6), 16u);
  EXPECT_EQ(u32_at(bytes, 10), 24u);
  EXPECT_EQ(u32_at(bytes, 14), 3u);
  double pitch = 0;
  std::memcpy(&pitch, bytes.data() + 18, 8);  // test host is little-endian
  EXPECT_EQ(pitch, 52e-6);
  std::uint64_t seed = 0;
  std::memcpy(&seed, bytes.data() + 34, 8);
  EXPECT_EQ(seed, 17u);
  // First Stokes pixel of frame 0.
  float v = 0;
  std::memcpy(&v, bytes.data() + kRmnsHeaderBytes, 4);
  EXPECT_EQ(v, stack.frames[0].stokes[0]);
}

TEST(Rmns, RoundTripIsExact) {
  const auto stack = tiny_stack(5, 3);
  const auto path = scratch("roundtrip.rmns");
  write_stack(path.string(), stack);
  const auto back = read_stack(path.string());
  EXPECT_EQ(back.width, stack.width);
  EXPECT_EQ(back.height, stack.height);
  EXPECT_EQ(back.pixel_pitch_m, stack.pixel_pitch_m);
  EXPECT_EQ(back.f3_m, stack.f3_m);
  EXPECT_EQ(back.seed, stack.seed);
  EXPECT_EQ(back.config_checksum, stack.config_checksum);
  ASSERT_EQ(back.frames.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(back.frames[i].stokes, stack.frames[i].stokes);
    EXPECT_EQ(back.frames[i].anti_stokes, stack.frames[i].anti_stokes);
    EXPECT_EQ(back.frames[i].shot_index, i);
  }
}

TEST(Rmns, WriterPatchesCountOnClose) {
  const auto stack = tiny_stack(4, 8);
  const auto path = scratch("patched.rmns");
  {
    auto h = header_for(stack);
    h.count = 0;
    StackWriter w(path.string(), h);
    for (const auto& f : stack.frames) {
      w.write(f);
    }
    EXPECT_EQ(w.written(), 4u);
  }  // destructor closes
  StackReader r(path.string());
  EXPECT_EQ(r.header().count, 4u);
  Frame f;
  int n = 0;
  while (r.next(f)) {
    ++n;
  }
  EXPECT_EQ(n, 4);
}

TEST(Rmns, WriterRejectsShapeMismatch) {
  const auto path = scratch("mismatch.rmns");
  StackHeader h;
  h.width = 4;
  h.height = 4;
  h.pixel_pitch_m = 1e-5;
  h.f3_m = 0.5;
  StackWriter w(path.string(), h);
  EXPECT_THROW(w.write(Frame(5, 4)), std::invalid_argument);
}

TEST(Rmns, TruncatedAndForeignFilesAreFormatErrors) {
  const auto stack = tiny_stack(2, 1);
  const auto path = scratch("trunc.rmns");
  write_stack(path.string(), stack);
  auto bytes = slurp(path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() - 10));
  }
  EXPECT_THROW(read_stack(path.string()), FormatError);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), 20);
  }
  EXPECT_THROW(StackReader(path.string()), FormatError);
  bytes[0] = 'X';
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_THROW(StackReader(path.string()), FormatError);
}

TEST(Rmns, SameSeedGivesIdenticalChecksum) {
  const auto a = scratch("a.rmns"), b = scratch("b.rmns"), c = scratch("c.rmns");
  write_stack(a.string(), tiny_stack(3, 42));
  write_stack(b.string(), tiny_stack(3, 42));
  write_stack(c.string(), tiny_stack(3, 43));
  EXPECT_EQ(file_checksum(a.string()), file_checksum(b.string()));
  EXPECT_NE(file_checksum(a.string()), file_checksum(c.string()));
  const auto bytes = slurp(a);
  EXPECT_EQ(file_checksum(a.string()), fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
}

TEST(Rmns, PaneMappingFromHeaderIsCentred) {
  StackHeader h;
  h.width = 64;
  h.height = 128;
  h.pixel_pitch_m = 13e-6;
  h.f3_m = 0.5;
  const auto p = pane_mapping(h);
  const auto c = geometry::PaneMapping::centred(64, 128, 13e-6, 0.5);
  EXPECT_EQ(p.origin_col, c.origin_col);
  EXPECT_EQ(p.origin_row, c.origin_row);
  EXPECT_EQ(p.urad_per_pixel(), c.urad_per_pixel());
}

TEST(FrameCsv, OneRowPerPixelPerPane) {
  const auto stack = tiny_stack(1, 5);
  const auto path = scratch("frame.csv");
  const auto pane = geometry::PaneMapping::centred(stack.width, stack.height, stack.pixel_pitch_m, stack.f3_m);
  write_frame_csv(path.string(), stack.frames[0], pane, 5, 0xabcdef);
  const auto t = read_csv_file(path.string());
  ASSERT_EQ(t.rows.size(), 2u * 16 * 24);
  EXPECT_EQ(t.header, (std::vector<std::string>{"pane", "col", "row", "theta_x_urad", "theta_y_urad", "counts"}));
  bool has_seed = false, has_checksum = false;
  for (const auto& c : t.comments) {
    has_seed |= c.find("seed=5") != std::string::npos;
    has_checksum |= c.find("config_checksum=0000000000abcdef") != std::string::npos;
  }
  EXPECT_TRUE(has_seed);
  EXPECT_TRUE(has_checksum);
  // Spot-check one anti-Stokes pixel.
  const auto& row = t.rows[16 * 24 + 3];
  EXPECT_EQ(row[0], "anti_stokes");
  EXPECT_EQ(parse_int(row[1]), 3);
  EXPECT_EQ(parse_int(row[2]), 0);
  EXPECT_EQ(parse_double(row[5]), stack.frames[0].at(Pane::kAntiStokes, 3, 0));
}
