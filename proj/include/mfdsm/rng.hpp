#pragma once

#include <cstdint>

namespace mfdsm {

/// SplitMix64 finalizer (Steele, Lea and Flood).
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based uniform source. Every draw is a pure function of
/// (seed, step, user): the user's substream at a given step is
///
///   splitmix64(splitmix64(splitmix64(seed) ^ step) ^ user)
///
/// so a trace does not depend on the order in which users are visited or on
/// the number of threads. Step 0 is reserved for the initial population.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(splitmix64(seed)) {}

  std::uint64_t bits(std::uint64_t step, std::uint64_t user) const {
    return splitmix64(splitmix64(key_ ^ step) ^ user);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t step, std::uint64_t user) const {
    return static_cast<double>(bits(step, user) >> 11) * 0x1.0p-53;
  }

  /// Seed of the r-th independent replication derived from a base seed.
  static std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t replication) {
    return splitmix64(base_seed ^ splitmix64(replication + 0x5851f42d4c957f2dULL));
  }

 private:
  std::uint64_t key_;
};

}  // namespace mfdsm
