#pragma once

#include "flowlab/types.hpp"

#include <cstdint>

namespace flowlab {

/// Counter-based generator (SplitMix64 finalizer over key + counter).
///
/// Output depends only on the seed and the number of draws made, so runs are
/// reproducible across platforms. `split` derives an independent child stream,
/// which is how parallel or per-task work gets its own randomness.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; consumes two raw draws per call.
  double normal();

  SeededRng split(std::uint64_t stream) const;

 private:
  SeededRng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// i.i.d. N(0, 1) entries. Throws std::invalid_argument for dim < 1.
RealVec gaussian_sample(SeededRng& rng, int dim);

/// `count` columns of i.i.d. N(0, 1) entries.
PointSet gaussian_batch(SeededRng& rng, int dim, int count);

}  // namespace flowlab
