#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fleetmig {

// Reproducible random stream. Uses mt19937_64 (output fully specified by the
// standard) seeded through std::seed_seq, and converts bits to doubles by hand
// so draws are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng({seed}) {}

  /// Independent substream keyed by (seed, a, b, ...), e.g. (seed, month, vessel).
  Rng(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    words.reserve(key.size() * 2);
    for (std::uint64_t k : key) {
      words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    for (;;) {
      double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  /// Standard Gumbel (type-I extreme value, location 0, scale 1).
  double gumbel() { return -std::log(-std::log(uniform())); }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fleetmig
