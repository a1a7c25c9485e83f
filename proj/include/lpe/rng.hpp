#pragma once

#include <cmath>
#include <cstdint>

namespace lpe {

/// Counter-based splittable generator. Each draw applies the splitmix64
/// finalizer to a keyed counter, and sub-streams derive fresh keys as
/// hash(key, index), so parallel and serial runs see identical draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed) {}

  /// Independent child stream; deterministic in (key, index).
  [[nodiscard]] Rng substream(std::uint64_t index) const {
    return Rng(finalize(key_ ^ finalize(index + kGamma)));
  }

  std::uint64_t next_u64() { return finalize(key_ + kGamma * ++counter_); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two draws per value.
  double normal() {
    const double u1 =
        static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Standard Cauchy with the given location, via inverse CDF.
  double cauchy(double location) {
    return location + std::tan(kPi * (uniform() - 0.5));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t finalize(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lpe
