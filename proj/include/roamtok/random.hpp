#ifndef ROAMTOK_RANDOM_HPP
#define ROAMTOK_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace roamtok {

using Rng = std::mt19937_64;

// Stream tags used when splitting a master seed. Keeping noise, graph and
// token randomness on separate streams lets two algorithms replay the same
// measurement and topology draws.
enum class Stream : std::uint64_t {
  Noise = 1,
  Graph = 2,
  Token = 3,
  Model = 4,
  Backbone = 5,
  Sampling = 6,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed derivation: seed = mix(mix(mix(master) ^ index) ^ tag).
/// Independent of scheduling; trial k always gets the same stream.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    Stream tag) noexcept {
  return mix64(mix64(mix64(master) ^ index) ^ static_cast<std::uint64_t>(tag));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t index, Stream tag) {
  return Rng{derive_seed(master, index, tag)};
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform,
/// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Marsaglia polar method. Stateless so every draw consumes a deterministic
/// number of engine outputs regardless of call pattern.
inline double standard_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace roamtok

#endif  // ROAMTOK_RANDOM_HPP
