#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvsde {

/// Philox4x32-10 counter-based generator. A block is a pure function of
/// (counter, key), so any (stream, step, slot) coordinate can be drawn in
/// O(1) with no sequential state; runs are reproducible independent of
/// thread scheduling.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
      const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
      const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent sub-seed for a named purpose (flow run, coupling
/// run, initial sampling, ...) from a user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

/// Standard-normal field indexed by (stream, step, slot). Each Philox block
/// yields two normals via Box-Muller; slot pairs (2j, 2j+1) share a block.
class NormalField {
 public:
  explicit NormalField(std::uint64_t seed) : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)} {}

  /// Both normals of the block holding `slot` (slot must be even).
  std::array<double, 2> pair(std::uint32_t stream, std::uint32_t step, std::uint32_t slot_pair) const {
    const auto b = Philox4x32::block({step, slot_pair, stream, 0u}, key_);
    const double u1 = 1.0 - to_unit(b[0], b[1]);  // (0, 1]
    const double u2 = to_unit(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  double normal(std::uint32_t stream, std::uint32_t step, std::uint32_t slot) const {
    return pair(stream, step, slot >> 1)[slot & 1u];
  }

  /// Uniform in [0, 1).
  double uniform(std::uint32_t stream, std::uint32_t step, std::uint32_t slot) const {
    const auto b = Philox4x32::block({step, slot, stream, 1u}, key_);
    return to_unit(b[0], b[1]);
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t v = (std::uint64_t(hi) << 32) | lo;
    return double(v >> 11) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
};

}  // namespace mvsde
