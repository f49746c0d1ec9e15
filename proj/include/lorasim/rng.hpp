#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>

namespace lorasim {

// 64-bit FNV-1a; used for substream tags and content digests.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One named substream of a run's generator. Streams are independent, so
// draws consumed by one subsystem never shift the values seen by another.
// All mappings are spelled out here rather than taken from <random>
// distributions, which keeps generated values identical across standard
// library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t run_seed, std::string_view name)
      : gen_(splitmix64(run_seed ^ fnv1a64(name))) {}

  // 53-bit mantissa in [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased draw in [lo, hi] via rejection sampling.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(gen_());
    constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t rem = (kMax % span + 1) % span;
    const std::uint64_t limit = kMax - rem;
    std::uint64_t draw;
    do {
      draw = gen_();
    } while (draw > limit);
    return lo + static_cast<std::int64_t>(draw % span);
  }

  // Box-Muller; two fresh draws per call, no cached spare.
  double normal(double mean, double sigma) {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return mean + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace lorasim
