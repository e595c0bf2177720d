#include "flowlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace flowlab {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), key_(mix64(seed ^ 0x6A09E667F3BCC909ULL)) {}

std::uint64_t SeededRng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double SeededRng::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SeededRng SeededRng::split(std::uint64_t stream) const {
  return SeededRng(seed_, mix64(key_ ^ mix64(stream + kGolden)));
}

RealVec gaussian_sample(SeededRng& rng, int dim) {
  if (dim < 1) {
    throw std::invalid_argument("gaussian_sample: dim must be >= 1");
  }
  RealVec out(dim);
  for (int i = 0; i < dim; ++i) {
    out[i] = rng.normal();
  }
  return out;
}

PointSet gaussian_batch(SeededRng& rng, int dim, int count) {
  if (dim < 1 || count < 0) {
    throw std::invalid_argument("gaussian_batch: dim must be >= 1 and count >= 0");
  }
  PointSet out(dim, count);
  for (int c = 0; c < count; ++c) {
    for (int i = 0; i < dim; ++i) {
      out(i, c) = rng.normal();
    }
  }
  return out;
}

}  // namespace flowlab
