#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dcwm {

// Deterministic RNG: mt19937_64 plus hand-rolled output transforms.
//
// std::uniform_real_distribution and friends are not pinned down by the
// standard, so identical seeds can produce different streams across
// stdlibs.  Checkpoint/metrics byte-reproducibility depends on the exact
// stream, hence the explicit mappings here.  Every call consumes a fixed
// number of engine outputs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes exactly two engine outputs.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Standard Gumbel(0,1): -log(-log(u)), u in (0,1).
  double gumbel() {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return -std::log(-std::log(u) + 1e-20);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Modulo bias is < 2^-40 for any n that fits in 24 bits, which covers
    // every use here (buffer indices, ensemble picks).
    return eng_() % n;
  }

  // Derive an independent child stream; deterministic in (parent state, tag).
  Rng fork(uint64_t tag) {
    uint64_t z = eng_() + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace dcwm
