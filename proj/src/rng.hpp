/// @file rng.hpp
/// @brief Counter-based random number generation (Philox4x32-10).
///
/// Every random quantity in the library is addressed, not sequenced: a
/// stream is identified by (seed, purpose, index) and positions within the
/// stream by a 64-bit block counter.  This makes each ensemble member, each
/// design configuration, and each spectral frequency independently
/// reproducible regardless of execution order or thread count.
///
/// Counter layout (4 x u32): {block_lo, block_hi, index, purpose}.
/// Key (2 x u32): {seed_lo, seed_hi}.
#ifndef CONDSIM_RNG_HPP
#define CONDSIM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace condsim {

/// Stream domains; keeps draws for different purposes disjoint.
enum class StreamPurpose : uint32_t {
  Spectrum = 1,  // complex noise for circulant-embedding draws
  OffGrid = 2,   // synthetic-observation noise, one stream per draw
  Design = 3,    // observation coordinates in the evaluation harness
  Values = 4,    // observation values in the evaluation harness
};

struct Counter4 {
  uint32_t v[4];
};

/// One Philox4x32-10 block: 128-bit counter + 64-bit key -> 128 bits out.
inline Counter4 philox4x32(Counter4 ctr, uint32_t key0, uint32_t key1) {
  constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  uint32_t x0 = ctr.v[0], x1 = ctr.v[1], x2 = ctr.v[2], x3 = ctr.v[3];
  for (int round = 0; round < 10; ++round) {
    uint64_t p0 = uint64_t(M0) * x0;
    uint64_t p1 = uint64_t(M1) * x2;
    uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    x0 = hi1 ^ x1 ^ key0;
    x1 = lo1;
    uint32_t nx2 = hi0 ^ x3 ^ key1;
    x3 = lo0;
    x2 = nx2;
    if (round < 9) { key0 += W0; key1 += W1; }
  }
  return {{x0, x1, x2, x3}};
}

/// Addressable raw block within a (seed, purpose, index) stream.
inline Counter4 stream_block(uint64_t seed, StreamPurpose purpose,
                             uint32_t index, uint64_t block) {
  Counter4 ctr{{uint32_t(block), uint32_t(block >> 32), index,
                static_cast<uint32_t>(purpose)}};
  return philox4x32(ctr, uint32_t(seed), uint32_t(seed >> 32));
}

/// Box-Muller on a pair of 32-bit words.  u1 in (0,1] keeps the log finite;
/// u2 in (0,1) avoids the degenerate angle.
inline void box_muller(uint32_t w0, uint32_t w1, double &z0, double &z1) {
  constexpr double k32 = 1.0 / 4294967296.0; // 2^-32
  double u1 = (double(w0) + 1.0) * k32;
  double u2 = (double(w1) + 0.5) * k32;
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  z0 = r * std::cos(a);
  z1 = r * std::sin(a);
}

/// Standard-normal pair addressed by block; used one-block-per-frequency in
/// the spectral simulator.  Only the first two words of the block are used.
inline void normal_pair_at(uint64_t seed, StreamPurpose purpose,
                           uint32_t index, uint64_t block, double &z0,
                           double &z1) {
  Counter4 b = stream_block(seed, purpose, index, block);
  box_muller(b.v[0], b.v[1], z0, z1);
}

/// Sequential consumer over one stream.  A stream is used either for
/// normals or for uniforms, never both interleaved; each block of four
/// words yields four normals (two Box-Muller pairs) or four uniforms.
class RandomStream {
public:
  RandomStream(uint64_t seed, StreamPurpose purpose, uint32_t index)
      : seed_(seed), purpose_(purpose), index_(index) {}

  double normal() {
    if (n_pending_ == 0) {
      Counter4 b = next_block();
      double z0, z1, z2, z3;
      box_muller(b.v[0], b.v[1], z0, z1);
      box_muller(b.v[2], b.v[3], z2, z3);
      pending_[0] = z3; pending_[1] = z2; pending_[2] = z1;
      n_pending_ = 3;
      return z0;
    }
    return pending_[--n_pending_];
  }

  /// Uniform in (0,1).
  double uniform() {
    if (word_pos_ == 4) word_pos_ = 0;
    if (word_pos_ == 0) words_ = next_block();
    return (double(words_.v[word_pos_++]) + 0.5) / 4294967296.0;
  }

private:
  Counter4 next_block() {
    return stream_block(seed_, purpose_, index_, block_++);
  }

  uint64_t seed_;
  StreamPurpose purpose_;
  uint32_t index_;
  uint64_t block_ = 0;
  Counter4 words_{{0, 0, 0, 0}};
  int word_pos_ = 0;
  double pending_[3] = {0, 0, 0};
  int n_pending_ = 0;
};

} // namespace condsim

#endif
