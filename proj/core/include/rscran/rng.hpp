#pragma once

#include <cmath>
#include <cstdint>

namespace rscran {

// Counter-based generator: output i is a finalizer-strength mix of (key, i).
// Sub-streams derived via fork() have unrelated keys, so independent pieces of
// the pipeline (links, samples, workers) can consume their own streams in any
// order without perturbing each other. Same seed => same draws, always.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed + kGolden)) {}

  // Derives an independent sub-stream keyed by up to three tags.
  Rng fork(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    Rng r(*this);
    r.key_ = mix(mix(mix(key_ ^ mix(a + kGolden)) ^ mix(b + 2 * kGolden)) ^
                 mix(c + 3 * kGolden));
    r.counter_ = 0;
    r.has_cached_ = false;
    return r;
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on {0, ..., n-1}, n >= 1. Debiased multiply-shift rejection.
  int uniform_int(int n) {
    const auto bound = static_cast<std::uint64_t>(n);
    auto m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < bound) {
      const std::uint64_t cutoff = std::uint64_t(-bound) % bound;
      while (lo < cutoff) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<int>(m >> 64);
  }

  // Standard normal via Box-Muller; pairs are cached so draw counts stay
  // deterministic regardless of call sites.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    cached_ = r * std::sin(t);
    has_cached_ = true;
    return r * std::cos(t);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

  // splitmix64 finalizer (Stafford mix13 variant).
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Stream tags for the pipeline stages; fork(tag, ...) keeps every consumer on
// its own sub-stream.
namespace rng_tag {
inline constexpr std::uint64_t kBsPosition = 1;
inline constexpr std::uint64_t kUserPosition = 2;
inline constexpr std::uint64_t kShadowing = 3;
inline constexpr std::uint64_t kCache = 4;
inline constexpr std::uint64_t kRequest = 5;
inline constexpr std::uint64_t kSample = 6;
inline constexpr std::uint64_t kSymbol = 7;
inline constexpr std::uint64_t kEval = 8;
}  // namespace rng_tag

}  // namespace rscran
