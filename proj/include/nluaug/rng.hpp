#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace nluaug {

/// Seeded random stream. Every consumer receives its own stream derived with
/// split(), so adding draws in one module never perturbs another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Child stream keyed by name; deterministic in (seed, name).
  Rng split(std::string_view name) const;
  /// Child stream keyed by an index (repeat number, worker id, ...).
  Rng split(std::uint64_t index) const;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Standard normal via Box-Muller (portable across standard libraries).
  double normal();
  /// Draw from an unnormalised non-negative weight vector.
  std::size_t categorical(std::span<const double> weights);

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) std::swap(first[i - 1], first[index(i)]);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// splitmix64 finaliser, used for seed derivation.
std::uint64_t mixSeed(std::uint64_t x);
/// FNV-1a over bytes; stable hash for names and fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ull);

}  // namespace nluaug
