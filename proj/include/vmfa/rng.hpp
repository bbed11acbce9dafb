#pragma once

#include <cmath>
#include <cstdint>

namespace vmfa {

/// splitmix64 step; also used to hash seed material into stream keys.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return splitmix64(s);
}

inline std::uint64_t hash3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return hash_combine(hash_combine(a, b), c);
}

/// Deterministic xoshiro256++ generator seeded via splitmix64. Distributions
/// are implemented by hand so streams are reproducible across platforms and
/// standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound). Bias is negligible for bound << 2^64.
  std::int64_t uniform_int(std::int64_t bound) {
    return static_cast<std::int64_t>(
        (static_cast<unsigned __int128>(next_u64()) *
         static_cast<unsigned __int128>(bound)) >>
        64);
  }

  /// Standard normal via Box-Muller; second value cached.
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

/// Stateless uniform component draw keyed by (seed, iteration, n); used for
/// the random extra index added to each search space so parallel E-steps stay
/// reproducible.
inline int uniform_component(std::uint64_t seed, std::uint64_t iteration,
                             std::uint64_t n, int num_components) {
  const std::uint64_t h = hash3(seed, iteration, n);
  return static_cast<int>(
      (static_cast<unsigned __int128>(h) *
       static_cast<unsigned __int128>(num_components)) >>
      64);
}

}  // namespace vmfa
