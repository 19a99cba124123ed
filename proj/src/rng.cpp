#include "egan/rng.hpp"

#include "egan/errors.hpp"

namespace egan {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t s = base;
  uint64_t out = splitmix64(s);
  s ^= 0x632be59bd9b4e019ULL + a;
  out ^= splitmix64(s);
  s ^= 0x9e6c63d0876a9a47ULL + b;
  out ^= splitmix64(s);
  s ^= 0xc2b2ae3d27d4eb4fULL + c;
  out ^= splitmix64(s);
  return out;
}

namespace {
inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(uint64_t seed) {
  // Seed the four xoshiro words from splitmix64 per its authors' advice.
  uint64_t s = seed;
  for (auto& w : s_) w = splitmix64(s);
  // All-zero state is invalid; splitmix64 cannot produce four zeros from
  // any seed, but keep a guard for clarity.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

uint64_t Rng::next_u64() {
  uint64_t result = rotl(s_[1] * 5, 7) * 9;
  uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

size_t Rng::uniform_index(size_t n) {
  if (n == 0) throw ContractError("uniform_index: n must be positive");
  return static_cast<size_t>(uniform01() * static_cast<double>(n)) % n;
}

size_t Rng::categorical(std::span<const double> weights) {
  if (weights.empty()) throw ContractError("categorical: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ContractError("categorical: negative weight");
    total += w;
  }
  if (total <= 0.0) throw ContractError("categorical: weights sum to zero");
  double u = uniform01() * total;
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  // Fell through on rounding; return the last index with nonzero weight.
  for (size_t i = weights.size(); i > 0; --i)
    if (weights[i - 1] > 0.0) return i - 1;
  return weights.size() - 1;
}

}  // namespace egan
