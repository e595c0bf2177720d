#pragma once

#include "flowlab/rng.hpp"
#include "flowlab/types.hpp"

#include <cstdint>
#include <vector>

namespace flowlab {

/// Anything that can draw i.i.d. points of a fixed dimension.
class PointSampler {
 public:
  virtual ~PointSampler() = default;
  virtual int dim() const = 0;
  virtual PointSet sample(SeededRng& rng, int count) const = 0;
};

struct LabeledPoints {
  PointSet points;
  std::vector<int> labels;
};

/// Isotropic Gaussian mixture. A zero standard deviation gives point masses.
class GaussianMixture : public PointSampler {
 public:
  GaussianMixture(std::vector<RealVec> centers, double std_dev, std::vector<double> weights = {});

  int dim() const override { return static_cast<int>(centers_.front().size()); }
  int num_modes() const { return static_cast<int>(centers_.size()); }
  const std::vector<RealVec>& centers() const { return centers_; }
  const std::vector<double>& weights() const { return weights_; }
  double std_dev() const { return std_dev_; }

  PointSet sample(SeededRng& rng, int count) const override;
  LabeledPoints sample_labeled(SeededRng& rng, int count) const;
  PointSet sample_mode(SeededRng& rng, int mode, int count) const;

 private:
  int draw_mode(SeededRng& rng) const;

  std::vector<RealVec> centers_;
  double std_dev_;
  std::vector<double> weights_;
};

/// Draws from a single mode of a mixture (the target class of a Din attack).
class MixtureModeSampler : public PointSampler {
 public:
  MixtureModeSampler(GaussianMixture mixture, int mode);

  int dim() const override { return mixture_.dim(); }
  int mode() const { return mode_; }
  PointSet sample(SeededRng& rng, int count) const override { return mixture_.sample_mode(rng, mode_, count); }

 private:
  GaussianMixture mixture_;
  int mode_;
};

GaussianMixture point_mass(RealVec location);

/// The classic 2-D benchmark: eight equally weighted modes on a circle.
GaussianMixture eight_gaussians(double radius, double std_dev);

/// Distinct two-tone vectors with entries in {-amplitude, +amplitude}.
/// Vectors equal to any entry of `exclude` are skipped.
std::vector<RealVec> two_tone_glyphs(int count, int dim, double amplitude, std::uint64_t seed,
                                     const std::vector<RealVec>& exclude = {});

/// `modes` two-tone side x side glyph classes blurred by isotropic noise.
GaussianMixture glyph_mixture(int side, int modes, double amplitude, double std_dev,
                              std::uint64_t seed);

}  // namespace flowlab
