#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "least/text.hpp"

namespace least {

// All randomness flows through mt19937_64 plus the helpers below. The
// std:: distributions are avoided on purpose: their output is not pinned by
// the standard, and reports/checkpoints must reproduce bit-for-bit.

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n). n must be > 0.
inline size_t uniform_index(std::mt19937_64& rng, size_t n) {
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t bound = (UINT64_MAX / un) * un;
  uint64_t r = rng();
  while (r >= bound) r = rng();
  return static_cast<size_t>(r % un);
}

template <typename T>
void shuffle_vector(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

// Independent named stream from one run seed.
inline uint64_t derive_seed(uint64_t base, std::string_view stream) {
  return base ^ (fnv1a64(stream) + 0x9e3779b97f4a7c15ull + (base << 6) +
                 (base >> 2));
}

}  // namespace least
