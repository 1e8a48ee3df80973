#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace tcm {

// Deterministic, platform-independent random source. xoshiro256** core
// seeded through splitmix64. Every consumer derives its own stream with
// fork(), keyed by a name or integer, so the draw order of one consumer
// never perturbs another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derives an independent stream from this generator's construction seed
  // (not its current state), so forks are stable regardless of how much
  // has been drawn from the parent.
  Rng fork(std::string_view name) const;
  Rng fork(std::uint64_t key) const;

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_double();

  // Unbiased uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; draws exactly two uniforms per call.
  double next_normal();

  // Normal(0, stddev) resampled until |x| <= clip_sigmas * stddev.
  double next_trunc_normal(double stddev, double clip_sigmas = 2.0);

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
};

// FNV-1a 64-bit hash; used for stream keys and content fingerprints.
std::uint64_t fnv1a64(std::string_view data);

// splitmix64 finalizer; mixes a key into a seed.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

}  // namespace tcm
