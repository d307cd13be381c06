#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace usrl {

// All randomness in the engine flows through splitmix64-derived streams.
// std::mt19937 would be portable but the standard distributions are not, so
// the whole stack is hand-rolled to keep runs bit-identical across platforms.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Order-dependent combiner for deriving per-epoch / per-row seeds.
inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

// FNV-1a over raw bytes; std::hash is unspecified across implementations.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t h) {
  for (int i = 0; i < 8; ++i) {
    h ^= static_cast<unsigned char>(value >> (8 * i));
    h *= 0x100000001b3ull;
  }
  return h;
}

class StableRng {
 public:
  explicit StableRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Unbiased draw in [0, n); n == 0 yields 0.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t max = ~std::uint64_t{0};
    const std::uint64_t reject_from = max - max % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= reject_from);
    return r % n;
  }

  // Fisher-Yates; the only shuffle used anywhere (std::shuffle is unspecified).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace usrl
