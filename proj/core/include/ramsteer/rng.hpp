#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace ramsteer {

/// SplitMix64 finalizer; used to derive keys and child streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 64-bit key comes from the run seed and the upper half of the counter
/// holds a stream id, so every (seed, stream) pair is an independent sequence
/// that can be created in any order on any thread. Satisfies
/// UniformRandomBitGenerator.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Child stream, independent of this one and of siblings with other ids.
  Philox4x32 split(std::uint64_t child) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Raw bijection: ten rounds of Philox on one counter block.
  static Block generate_block(Block counter, Key key);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  Key key_;
  std::uint64_t block_index_ = 0;
  Block buffer_{};
  int buffered_ = 0;
};

/// Stream ids for distinct consumers of one seed.
enum class StreamDomain : std::uint64_t {
  kScatteringShot = 1,
  kHeraldShot = 2,
};

Philox4x32 make_stream(std::uint64_t seed, StreamDomain domain, std::uint64_t index);

}  // namespace ramsteer
