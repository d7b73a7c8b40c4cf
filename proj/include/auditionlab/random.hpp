#pragma once

#include <cstdint>
#include <random>

namespace auditionlab {

/// One step of the splitmix64 sequence (Steele, Lea & Flood). Used as the
/// fixed 64-bit mixing function for stream derivation.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the stream for episode `index` under `master`:
///   splitmix64(master ^ splitmix64(index + 0x9E3779B97F4A7C15)).
/// Counter based, so any episode can be regenerated without running the
/// ones before it.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Explicitly passed source of randomness. Wraps mt19937_64 (whose output
/// sequence is fixed by the standard) and implements its own variate
/// transforms so draws are identical across standard library vendors.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Poisson variate by sequential inversion; intended for small rates.
  std::uint64_t poisson(double lambda);

  /// Independent child stream keyed by `key`.
  RandomStream split(std::uint64_t key) { return RandomStream(derive_seed(next_u64(), key)); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace auditionlab
