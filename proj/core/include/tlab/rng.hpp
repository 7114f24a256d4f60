#pragma once

#include <cstdint>
#include <random>

#include "tlab/linalg.hpp"

namespace tlab {

/// Seeded random stream. The engine is std::mt19937_64, whose output sequence
/// is fixed by the standard; uniform and normal variates are produced here
/// rather than through <random> distributions so that streams are identical
/// across standard-library implementations.
///
/// Independent streams are derived by hashing (seed, stream id), so a trial
/// can be regenerated from (experiment seed, trial index) alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Derives an independent child stream; does not advance this stream.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  /// +1 or -1 with equal probability.
  double rademacher();

  Vector normal_vector(std::size_t n);
  Matrix normal_matrix(std::size_t rows, std::size_t cols);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; used for seed derivation and hashing.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for trial `index` of an experiment seeded with `experiment_seed`.
std::uint64_t derive_seed(std::uint64_t experiment_seed, std::uint64_t index) noexcept;

}  // namespace tlab
