#pragma once

#include <cmath>
#include <initializer_list>
#include <numbers>

#include "veila/core/common.hpp"

namespace veila {

// Counter-based RNG. Every draw is a pure function of (seed, stream, counter),
// so dataset generation, training and sampling can draw reproducibly without
// shared state, and a run can resume at any step with the identical sequence.
namespace rng {

inline u64 splitmix(u64 x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline u64 mix(u64 a, u64 b) { return splitmix(splitmix(a) ^ (b + 0x633d5d1f800bce6dull)); }

// Fold an arbitrary key path into one stream id.
inline u64 stream(std::initializer_list<u64> keys) {
  u64 h = 0x51f0e9a3c2b4d871ull;
  for (u64 k : keys) h = mix(h, k);
  return h;
}

}  // namespace rng

class CounterRng {
 public:
  explicit CounterRng(u64 seed, u64 stream_id = 0)
      : state_(rng::mix(seed, stream_id)) {}
  CounterRng(u64 seed, std::initializer_list<u64> keys)
      : state_(rng::mix(seed, rng::stream(keys))) {}

  u64 next_u64() { return rng::mix(state_, counter_++); }

  // [0, 1)
  double uniform() {
    return double(next_u64() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; uses two draws per call, no cached state.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n)
  u64 index(u64 n) {
    VEILA_CHECK(n > 0, "index() needs n > 0");
    return next_u64() % n;
  }

  u64 counter() const { return counter_; }

 private:
  u64 state_;
  u64 counter_ = 0;
};

}  // namespace veila
