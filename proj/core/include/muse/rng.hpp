#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace muse {

/// Philox4x32-10 block function (Salmon et al., Random123).
/// Maps a 128-bit counter and 64-bit key to 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// Seedable, platform-stable generator built on Philox4x32-10.
///
/// The key is the 64-bit seed (low word first). The counter is
/// {index_lo, index_hi, stream, 0} where index is a 64-bit block index starting
/// at 0 and incremented after each block of four 32-bit outputs. Distinct
/// (seed, stream) pairs therefore yield disjoint sequences.
///
/// Derived draws:
///  - next_u32: next 32-bit word of the current block.
///  - uniform: (next_u32 >> 5) * 2^26 + (next_u32 >> 6), scaled by 2^-53, in [0, 1).
///  - uniform_index(n): rejection sampling on next_u32 against the largest
///    multiple of n below 2^32.
///  - normal: Box-Muller on two uniforms, u1 mapped to (0, 1].
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint32_t stream = 0) noexcept;

  std::uint32_t next_u32() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  std::uint32_t uniform_index(std::uint32_t n) noexcept;
  double normal() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint32_t stream() const noexcept { return stream_; }

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

/// Well-known stream ids so each consumer within a trial draws independently.
enum class RngStream : std::uint32_t {
  kSplit = 1,
  kInit = 2,
  kDropout = 3,
  kSynth = 4,
  kEigen = 5,
};

inline Rng make_rng(std::uint64_t seed, RngStream stream) noexcept {
  return Rng(seed, static_cast<std::uint32_t>(stream));
}

/// Uniform sample of `count` distinct items from `pool` by partial Fisher-Yates.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t count, Rng& rng);

}  // namespace muse
