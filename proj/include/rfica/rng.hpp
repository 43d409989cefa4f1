#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace rfica {

// Mixes a seed with a salt into a new stream seed (splitmix64 finalizer).
// Chained calls give independent, reproducible sub-streams for trials,
// clients and restarts.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Portable seeded generator: std::mt19937_64 for the bit stream (its output
// sequence is fixed by the standard), uniforms from the top 53 bits, normals
// via Box-Muller. std::*_distribution is avoided on purpose since its
// algorithm is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double next_uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_uniform();
    } while (u1 <= 0.0);
    const double u2 = next_uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * 3.14159265358979323846 * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

  // Uniform index in [0, n). n must be positive.
  std::size_t next_index(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
  }

  bool next_bernoulli(double p) { return next_uniform() < p; }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[next_index(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rfica
