#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hf {

/// Deterministic RNG with platform-independent normal/uniform draws
/// (std distributions are implementation-defined, so both are hand-rolled
/// on top of mt19937_64).
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed), seed_mix_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  long uniform_int(long lo, long hi_inclusive) {
    const uint64_t span = static_cast<uint64_t>(hi_inclusive - lo) + 1;
    return lo + static_cast<long>(gen_() % span);
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Independent stream for worker `index`, derived by splitmix64 hashing.
  Rng split(uint64_t index) const {
    uint64_t z = seed_mix_ + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

  void reseed(uint64_t seed) {
    gen_.seed(seed);
    seed_mix_ = seed;
    have_spare_ = false;
  }

 private:
  std::mt19937_64 gen_;
  uint64_t seed_mix_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hf
