#pragma once

#include <cstdint>
#include <random>

namespace cdvi {

/// SplitMix64 finalizer. Used to derive stream seeds; never used as a
/// generator on its own.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of stream `stream` derived from `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not portable across library
/// implementations, so every conversion (uniform reals, bounded integers,
/// normals, geometric gaps) is written out here. Independent streams (one
/// per frame, per stage, per training step) come from `split`, which seeds a
/// fresh engine with derive_seed(seed, stream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Uniform on the closed range [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi);

  /// Standard normal via the Box-Muller transform; the second value of each
  /// pair is cached.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Geometric on {1, 2, ...} with success probability p (mean 1/p).
  std::uint64_t geometric(double p);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace cdvi
