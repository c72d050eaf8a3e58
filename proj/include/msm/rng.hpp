#pragma once

#include <cmath>
#include <cstdint>

namespace msm {

// Counter-based random stream. Every draw is a pure hash of (key, counter),
// and child streams are derived by re-keying, so values never depend on the
// order in which sibling streams are consumed. This is what makes the
// simulator bit-reproducible under parallel evaluation.
class RngStream {
 public:
  RngStream() = default;

  static RngStream from_seed(std::uint64_t seed) {
    return RngStream(mix(seed ^ 0x6d733a73696d756cULL));
  }

  // Independent sub-stream for a purpose tag or element index.
  RngStream child(std::uint64_t t) const {
    return RngStream(mix(key_ ^ mix(t + 0x517cc1b727220a95ULL)));
  }

  std::uint64_t next_u64() {
    return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // 0 .. n-1
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(phi);
    have_spare_ = true;
    return radius * std::cos(phi);
  }

 private:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Compile-time tag for naming child streams (FNV-1a).
constexpr std::uint64_t stream_tag(const char* s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  while (*s) {
    h ^= static_cast<std::uint64_t>(*s++);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace msm
