#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace pm {

// 64-bit FNV-1a. Offset basis 0xcbf29ce484222325, prime 0x100000001b3.
inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                                std::uint64_t h = kFnvOffsetBasis) noexcept {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffsetBasis) noexcept {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

/// Folds a 64-bit word into an FNV-1a state, little-endian byte order.
constexpr std::uint64_t fnv1a64_u64(std::uint64_t word, std::uint64_t h = kFnvOffsetBasis) noexcept {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xffU;
    h *= kFnvPrime;
  }
  return h;
}

/// SplitMix64 (Steele, Lea, Flood). Increment 0x9e3779b97f4a7c15, finalizer
/// multipliers 0xbf58476d1ce4e5b9 and 0x94d049bb133111eb. All pseudo-random
/// streams in the project come from this generator so that results are
/// bitwise identical across platforms and standard libraries.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t operator()() noexcept { return next(); }
  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

  /// Uniform on [0, 1) with 53 bits of resolution.
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (one value per call).
  double gaussian() noexcept;

 private:
  std::uint64_t state_;
};

/// Stateless mix of two words, used to derive keyed sub-streams.
constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  SplitMix64 g(a ^ (b * 0x9e3779b97f4a7c15ULL));
  g.next();
  return g.next();
}

}  // namespace pm
