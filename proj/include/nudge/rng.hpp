#pragma once

#include <cmath>
#include <cstdint>

namespace nudge {

/// Deterministic splitmix64 generator. The standard library distributions are
/// implementation-defined, so all randomness in the project goes through this
/// type to keep datasets and checkpoints bit-reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n).
  int next_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  /// Standard normal via Box-Muller; draws two uniforms per call.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  uint64_t state() const { return state_; }

  /// Independent stream derived from (seed, stream id). Used so that
  /// per-epoch / per-scene draws do not depend on iteration order.
  static Rng fork(uint64_t seed, uint64_t stream) {
    Rng mix(seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL));
    mix.next_u64();
    return Rng(mix.next_u64());
  }

 private:
  uint64_t state_;
};

/// FNV-1a over bytes; used for config hashes and checkpoint fingerprints.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace nudge
