#include "ramsteer/frame_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <vector>

#include "ramsteer/csv.hpp"

namespace ramsteer {
namespace {

template <typename T>
void put_le(std::vector<char>& buf, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(p[i]) << (8 * i);
  }
  return v;
}

std::vector<char> encode_header(const StackHeader& h) {
  std::vector<char> buf{'R', 'M', 'N', 'S'};
  put_le<std::uint16_t>(buf, kRmnsVersion);
  put_le<std::uint32_t>(buf, h.width);
  put_le<std::uint32_t>(buf, h.height);
  put_le<std::uint32_t>(buf, h.count);
  put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(h.pixel_pitch_m));
  put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(h.f3_m));
  put_le<std::uint64_t>(buf, h.seed);
  put_le<std::uint64_t>(buf, h.config_checksum);
  return buf;
}

void encode_pane(std::vector<char>& buf, std::span<const float> pane) {
  buf.clear();
  buf.reserve(pane.size() * 4);
  for (float f : pane) {
    put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(f));
  }
}

void decode_pane(const std::vector<unsigned char>& raw, std::span<float> pane) {
  for (std::size_t i = 0; i < pane.size(); ++i) {
    pane[i] = std::bit_cast<float>(get_le<std::uint32_t>(raw.data() + 4 * i));
  }
}

}  // namespace

StackHeader header_for(const FrameStack& stack) {
  StackHeader h;
  h.width = static_cast<std::uint32_t>(stack.width);
  h.height = static_cast<std::uint32_t>(stack.height);
  h.count = static_cast<std::uint32_t>(stack.frames.size());
  h.pixel_pitch_m = stack.pixel_pitch_m;
  h.f3_m = stack.f3_m;
  h.seed = stack.seed;
  h.config_checksum = stack.config_checksum;
  return h;
}

geometry::PaneMapping pane_mapping(const StackHeader& h) {
  return geometry::PaneMapping::centred(static_cast<int>(h.width), static_cast<int>(h.height), h.pixel_pitch_m,
                                        h.f3_m);
}

StackWriter::StackWriter(const std::string& path, StackHeader header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(header) {
  if (!out_) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  if (header_.width == 0 || header_.height == 0) {
    throw std::invalid_argument("stack panes must be non-empty");
  }
  header_.count = 0;
  const auto buf = encode_header(header_);
  out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  open_ = true;
}

StackWriter::~StackWriter() {
  try {
    close();
  } catch (...) {
  }
}

void StackWriter::write(const Frame& frame) {
  if (!open_) {
    throw std::logic_error("StackWriter: write after close");
  }
  if (frame.width != static_cast<int>(header_.width) || frame.height != static_cast<int>(header_.height)) {
    throw std::invalid_argument("StackWriter: frame shape does not match the stack");
  }
  std::vector<char> buf;
  encode_pane(buf, frame.stokes);
  out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  encode_pane(buf, frame.anti_stokes);
  out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  ++written_;
}

void StackWriter::close() {
  if (!open_) {
    return;
  }
  open_ = false;
  header_.count = written_;
  const auto buf = encode_header(header_);
  out_.seekp(0);
  out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out_.close();
  if (!out_) {
    throw std::runtime_error("StackWriter: write failed");
  }
}

StackReader::StackReader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) {
    throw std::runtime_error("cannot open " + path);
  }
  std::array<unsigned char, kRmnsHeaderBytes> raw{};
  in_.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (in_.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw FormatError(path + ": truncated RMNS header");
  }
  if (std::memcmp(raw.data(), "RMNS", 4) != 0) {
    throw FormatError(path + ": not an RMNS stack (bad magic)");
  }
  const auto version = get_le<std::uint16_t>(raw.data() + 4);
  if (version != kRmnsVersion) {
    throw FormatError(path + ": unsupported RMNS version " + std::to_string(version));
  }
  const unsigned char* p = raw.data() + 6;
  header_.width = get_le<std::uint32_t>(p);
  header_.height = get_le<std::uint32_t>(p + 4);
  header_.count = get_le<std::uint32_t>(p + 8);
  header_.pixel_pitch_m = std::bit_cast<double>(get_le<std::uint64_t>(p + 12));
  header_.f3_m = std::bit_cast<double>(get_le<std::uint64_t>(p + 20));
  header_.seed = get_le<std::uint64_t>(p + 28);
  header_.config_checksum = get_le<std::uint64_t>(p + 36);
  if (header_.width == 0 || header_.height == 0) {
    throw FormatError(path + ": empty pane dimensions");
  }
}

bool StackReader::next(Frame& frame) {
  if (read_ >= header_.count) {
    return false;
  }
  const std::size_t n = header_.pane_pixels();
  if (frame.width != static_cast<int>(header_.width) || frame.height != static_cast<int>(header_.height)) {
    frame = Frame(static_cast<int>(header_.width), static_cast<int>(header_.height));
  }
  std::vector<unsigned char> raw(n * 4);
  for (auto* pane : {&frame.stokes, &frame.anti_stokes}) {
    in_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in_.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw FormatError("RMNS stack truncated at frame " + std::to_string(read_));
    }
    decode_pane(raw, *pane);
  }
  frame.shot_index = read_;
  ++read_;
  return true;
}

void write_stack(const std::string& path, const FrameStack& stack) {
  StackWriter w(path, header_for(stack));
  for (const auto& f : stack.frames) {
    w.write(f);
  }
  w.close();
}

FrameStack read_stack(const std::string& path) {
  StackReader r(path);
  const auto& h = r.header();
  FrameStack s;
  s.width = static_cast<int>(h.width);
  s.height = static_cast<int>(h.height);
  s.pixel_pitch_m = h.pixel_pitch_m;
  s.f3_m = h.f3_m;
  s.seed = h.seed;
  s.config_checksum = h.config_checksum;
  s.frames.reserve(h.count);
  Frame f;
  while (r.next(f)) {
    s.frames.push_back(f);
  }
  return s;
}

void write_frame_csv(const std::string& path, const Frame& frame, const geometry::PaneMapping& pane,
                     std::uint64_t seed, std::uint64_t config_checksum) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open " + path + " for writing");
  }
  write_comment(out, "config_checksum", hex64(config_checksum));
  write_comment(out, "seed", std::to_string(seed));
  write_comment(out, "shot", std::to_string(frame.shot_index));
  out << "pane,col,row,theta_x_urad,theta_y_urad,counts\n";
  for (const Pane p : {Pane::kStokes, Pane::kAntiStokes}) {
    const char* name = p == Pane::kStokes ? "stokes" : "anti_stokes";
    for (int row = 0; row < frame.height; ++row) {
      for (int col = 0; col < frame.width; ++col) {
        const auto a = geometry::pixel_to_angle(col, row, pane);
        out << name << ',' << col << ',' << row << ',' << format_double(a.x_urad) << ','
            << format_double(a.y_urad) << ',' << format_double(frame.at(p, col, row)) << '\n';
      }
    }
  }
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::uint64_t state = 0xcbf29ce484222325ull;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    state = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), state);
  }
  return state;
}

}  // namespace ramsteer
