#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace walklm {

// splitmix64 finalizer. Every random decision in the project flows through
// this so that runs replay bit-exactly from a seed.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive combine of a seed with arbitrary integer context
// (node ids, batch counters, slot indices, ...). Distinct argument lists
// give independent-looking streams.
inline uint64_t hash_stream(uint64_t seed, std::initializer_list<uint64_t> parts) {
  uint64_t h = mix64(seed ^ 0x8f1bbcdcbfa53e0bULL);
  for (uint64_t p : parts) h = mix64(h ^ p);
  return h;
}

// Small deterministic generator (splitmix64 sequence). Not cryptographic;
// statistically fine for sampling, shuffling and dropout.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, n). Lemire's method with rejection; the walk
  // uniformity test is sensitive to modulo bias, so no shortcuts here.
  uint64_t next_below(uint64_t n) {
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      uint64_t threshold = (0ULL - n) % n;
      while (lo < threshold) {
        m = static_cast<__uint128_t>(next_u64()) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Fisher-Yates. std::shuffle's output is implementation-defined, which
  // would make split manifests differ across standard libraries.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace walklm
