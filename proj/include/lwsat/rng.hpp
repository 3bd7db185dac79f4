#pragma once

#include <cstdint>

namespace lwsat {

/// SplitMix64 generator (Steele, Lea & Flood; the java.util.SplittableRandom
/// mixer). Chosen over the std engines because its output stream is fully
/// specified here, so seeded runs reproduce bit-for-bit on every platform.
/// std::uniform_*_distribution is implementation-defined and must not be used
/// anywhere determinism matters; the helpers below replace it.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, n), n >= 1. Multiply-shift reduction; the bias is
  /// O(n / 2^64) and irrelevant at the sample sizes used here.
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool next_bool() { return (next_u64() >> 63) != 0; }

private:
  std::uint64_t state_;
};

/// Finalizer of SplitMix64, used as a stateless mixer for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derive an independent substream seed from (seed, a) or (seed, a, b).
/// Used for per-instance / per-run / per-episode streams so that work items
/// can be processed in any order (or in parallel) without changing results.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) {
  return mix64(seed + 0x9e3779b97f4a7c15ull * (a + 1));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

} // namespace lwsat
