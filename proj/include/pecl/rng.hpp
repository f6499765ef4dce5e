#ifndef PECL_RNG_HPP
#define PECL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace pecl {

// Counter-based generator: SplitMix64 (Steele/Lea/Flood, "Fast splittable
// pseudorandom number generators", OOPSLA 2014). The state is a plain 64-bit
// counter advanced by the golden-ratio increment; each output is a finalizing
// mix of the counter. Integer-only, so sequences are identical on every
// platform and trivially reproducible in other languages.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  // Finalizer alone; also used for seed derivation.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(state_ += kGolden); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + next_double() * (hi - lo);
  }

  // Box-Muller; two draws per call, no cached state.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
  std::uint64_t state_;
};

// FNV-1a over the label, then mixed with the base seed. Every independent
// random stream in the project (per-parameter init, per-clip synthesis,
// per-epoch shuffles) hangs off one top-level seed through these.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : label) {
    h = (h ^ c) * 1099511628211ULL;
  }
  return Rng::mix(seed ^ Rng::mix(h));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::uint64_t index) {
  return Rng::mix(derive_seed(seed, label) ^ (Rng::kGolden * (index + 1)));
}

}  // namespace pecl

#endif  // PECL_RNG_HPP
