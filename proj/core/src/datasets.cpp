#include "flowlab/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace flowlab {

GaussianMixture::GaussianMixture(std::vector<RealVec> centers, double std_dev, std::vector<double> weights)
    : centers_(std::move(centers)), std_dev_(std_dev), weights_(std::move(weights)) {
  if (centers_.empty()) {
    throw std::invalid_argument("GaussianMixture: need at least one center");
  }
  for (const auto& c : centers_) {
    require_same_dim(c.size(), centers_.front().size(), "GaussianMixture");
  }
  if (centers_.front().size() < 1) {
    throw ShapeError("GaussianMixture: centers must have dim >= 1");
  }
  if (!(std_dev_ >= 0.0)) {
    throw std::invalid_argument("GaussianMixture: std_dev must be >= 0");
  }
  if (weights_.empty()) {
    weights_.assign(centers_.size(), 1.0 / static_cast<double>(centers_.size()));
  }
  if (weights_.size() != centers_.size()) {
    throw std::invalid_argument("GaussianMixture: one weight per center");
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (!(total > 0.0) || std::any_of(weights_.begin(), weights_.end(), [](double w) { return w < 0.0; })) {
    throw std::invalid_argument("GaussianMixture: weights must be non-negative with positive sum");
  }
  for (double& w : weights_) {
    w /= total;
  }
}

int GaussianMixture::draw_mode(SeededRng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < weights_.size(); ++k) {
    acc += weights_[k];
    if (u < acc) {
      return static_cast<int>(k);
    }
  }
  return num_modes() - 1;
}

PointSet GaussianMixture::sample(SeededRng& rng, int count) const {
  return sample_labeled(rng, count).points;
}

LabeledPoints GaussianMixture::sample_labeled(SeededRng& rng, int count) const {
  LabeledPoints out;
  out.points.resize(dim(), count);
  out.labels.resize(count);
  for (int c = 0; c < count; ++c) {
    const int k = draw_mode(rng);
    out.labels[c] = k;
    for (int i = 0; i < dim(); ++i) {
      out.points(i, c) = centers_[k][i] + std_dev_ * rng.normal();
    }
  }
  return out;
}

PointSet GaussianMixture::sample_mode(SeededRng& rng, int mode, int count) const {
  if (mode < 0 || mode >= num_modes()) {
    throw std::out_of_range("GaussianMixture: mode index out of range");
  }
  PointSet out(dim(), count);
  for (int c = 0; c < count; ++c) {
    for (int i = 0; i < dim(); ++i) {
      out(i, c) = centers_[mode][i] + std_dev_ * rng.normal();
    }
  }
  return out;
}

GaussianMixture point_mass(RealVec location) {
  return GaussianMixture({std::move(location)}, 0.0);
}

GaussianMixture eight_gaussians(double radius, double std_dev) {
  std::vector<RealVec> centers;
  for (int k = 0; k < 8; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 8.0;
    centers.push_back((RealVec(2) << radius * std::cos(a), radius * std::sin(a)).finished());
  }
  return GaussianMixture(std::move(centers), std_dev);
}

std::vector<RealVec> two_tone_glyphs(int count, int dim, double amplitude, std::uint64_t seed,
                                     const std::vector<RealVec>& exclude) {
  if (count < 0 || dim < 1) {
    throw std::invalid_argument("two_tone_glyphs: bad count or dim");
  }
  if (dim < 63 && static_cast<double>(count + exclude.size()) > std::ldexp(1.0, dim)) {
    throw std::invalid_argument("two_tone_glyphs: not enough distinct patterns in this dimension");
  }
  SeededRng rng(seed);
  std::vector<RealVec> out;
  while (static_cast<int>(out.size()) < count) {
    RealVec g(dim);
    for (int i = 0; i < dim; ++i) {
      g[i] = (rng.next_u64() >> 63) ? amplitude : -amplitude;
    }
    auto same = [&](const RealVec& other) { return other.size() == g.size() && other == g; };
    if (std::any_of(out.begin(), out.end(), same) || std::any_of(exclude.begin(), exclude.end(), same)) {
      continue;
    }
    out.push_back(std::move(g));
  }
  return out;
}

GaussianMixture glyph_mixture(int side, int modes, double amplitude, double std_dev, std::uint64_t seed) {
  if (side < 1 || modes < 1) {
    throw std::invalid_argument("glyph_mixture: side and modes must be >= 1");
  }
  return GaussianMixture(two_tone_glyphs(modes, side * side, amplitude, seed), std_dev);
}

}  // namespace flowlab

namespace flowlab {

MixtureModeSampler::MixtureModeSampler(GaussianMixture mixture, int mode)
    : mixture_(std::move(mixture)), mode_(mode) {
  if (mode_ < 0 || mode_ >= mixture_.num_modes()) {
    throw std::out_of_range("MixtureModeSampler: mode index out of range");
  }
}

}  // namespace flowlab
