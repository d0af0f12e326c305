#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace fsnet {

// splitmix64, used to derive independent sub-streams from one user seed.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, std::string_view tag) {
  uint64_t h = mix64(seed);
  for (char c : tag) h = mix64(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
  return h;
}

// Deterministic generator with hand-rolled distributions. std::*_distribution
// is implementation-defined, which would break byte-identical outputs across
// toolchains, so uniform and normal draws are implemented here (xoshiro-free,
// plain splitmix64 stream + Box-Muller).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix64(seed ^ 0x8f5c9d3aa61e02fbULL)) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; two uniforms per draw keeps the stream
  // position independent of any cached second value.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  uint64_t state_;
};

}  // namespace fsnet
