#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace pgm {

// All randomness in the library flows through this generator. The std
// <random> distributions and std::shuffle are implementation-defined, so two
// standard libraries can disagree draw by draw; run outputs must instead be
// byte-stable functions of the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // splitmix64
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n); multiply-shift, bias < 2^-53.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal, Box-Muller. One draw consumes two uniforms.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

// Keys an independent stream off one run seed (per-partition batch shuffles,
// per-epoch shuffles, ...). Streams with distinct tags never collide in
// practice; collisions would only correlate draws, not break determinism.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag_a,
                                 std::uint64_t tag_b = 0) {
  Rng r(seed ^ (tag_a * 0xD6E8FEB86659FD93ull) ^ (tag_b * 0xCA5A826395121157ull));
  return r.next_u64();
}

}  // namespace pgm
