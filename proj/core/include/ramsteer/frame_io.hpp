#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "ramsteer/scattering.hpp"

namespace ramsteer {

/// RMNS stack file, little-endian:
///   "RMNS" | u16 version | u32 width | u32 height | u32 count |
///   f64 pixel_pitch_m | f64 f3_m | u64 seed | u64 config_checksum
/// followed by `count` frames, each the Stokes pane then the anti-Stokes
/// pane, row-major f32.
inline constexpr std::uint16_t kRmnsVersion = 1;
inline constexpr std::size_t kRmnsHeaderBytes = 4 + 2 + 4 * 3 + 8 * 4;

struct StackHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t count = 0;
  double pixel_pitch_m = 0.0;
  double f3_m = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t config_checksum = 0;

  std::size_t pane_pixels() const { return static_cast<std::size_t>(width) * height; }
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Streams frames to disk; the frame count in the header is patched on close.
class StackWriter {
 public:
  StackWriter(const std::string& path, StackHeader header);
  ~StackWriter();
  StackWriter(const StackWriter&) = delete;
  StackWriter& operator=(const StackWriter&) = delete;

  void write(const Frame& frame);
  void close();
  std::uint32_t written() const { return written_; }

 private:
  std::ofstream out_;
  StackHeader header_;
  std::uint32_t written_ = 0;
  bool open_ = false;
};

class StackReader {
 public:
  explicit StackReader(const std::string& path);

  const StackHeader& header() const { return header_; }
  /// False once all `count` frames were read. Throws FormatError on truncation.
  bool next(Frame& frame);
  std::uint32_t read_so_far() const { return read_; }

 private:
  std::ifstream in_;
  StackHeader header_;
  std::uint32_t read_ = 0;
};

void write_stack(const std::string& path, const FrameStack& stack);
FrameStack read_stack(const std::string& path);

StackHeader header_for(const FrameStack& stack);

/// Pane geometry implied by a header: centred origin.
geometry::PaneMapping pane_mapping(const StackHeader& h);

/// One frame as CSV: pane,col,row,theta_x_urad,theta_y_urad,counts.
void write_frame_csv(const std::string& path, const Frame& frame, const geometry::PaneMapping& pane,
                     std::uint64_t seed, std::uint64_t config_checksum);

/// FNV-1a 64 over the bytes of a file.
std::uint64_t file_checksum(const std::string& path);

}  // namespace ramsteer
