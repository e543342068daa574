#include "ramsteer/rng.hpp"

namespace ramsteer {
namespace {

constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

Philox4x32::Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

}  // namespace

Philox4x32::Block Philox4x32::generate_block(Block ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMulA, ctr[0], hi0, lo0);
    mulhilo(kMulB, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(key_from_seed(seed)) {}

Philox4x32::result_type Philox4x32::operator()() {
  if (buffered_ == 0) {
    const Block ctr{static_cast<std::uint32_t>(block_index_), static_cast<std::uint32_t>(block_index_ >> 32),
                    static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    buffer_ = generate_block(ctr, key_);
    ++block_index_;
    buffered_ = 4;
  }
  return buffer_[4 - buffered_--];
}

Philox4x32 Philox4x32::split(std::uint64_t child) const {
  return Philox4x32(seed_, splitmix64(stream_ ^ splitmix64(child + 1)));
}

Philox4x32 make_stream(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain)));
  return Philox4x32(key, index);
}

}  // namespace ramsteer
