#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace egan {

// Advances a splitmix64 state and returns the next output.
uint64_t splitmix64(uint64_t& state);

// Derives an independent stream seed from a base seed and up to three
// indices.  Used to key RNG streams by (phase, epoch, step) so that a
// resumed run reproduces the exact stream without carrying RNG state.
uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0);

// Deterministic generator (xoshiro256**) with the handful of draws the
// library needs.  All distributions are implemented here rather than with
// std::*_distribution so sequences are stable across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01();

  double uniform(double lo, double hi);

  // Uniform index in [0, n).  n must be positive.
  size_t uniform_index(size_t n);

  // Draws an index from an unnormalized nonnegative weight vector by CDF
  // inversion.  Weights must not all be zero.
  size_t categorical(std::span<const double> weights);

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t s_[4];
};

}  // namespace egan
