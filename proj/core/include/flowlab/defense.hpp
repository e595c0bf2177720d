#pragma once

#include "flowlab/flow.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace flowlab {

// ---------------------------------------------------------------------------
// Perturbation-similarity detection
// ---------------------------------------------------------------------------

struct UfidConfig {
  int probes = 8;             // K, perturbed copies of the input noise
  double probe_sigma = 0.1;   // perturbation scale
  SamplerConfig sampler{50};
  double bandwidth = 1.0;     // RBF bandwidth for output similarity
  double threshold = 0.5;     // tau: statistic above this flags a backdoor

  void validate() const;
};

struct DetectionReport {
  std::string probe_id;
  int probes = 0;
  double probe_sigma = 0.0;
  double bandwidth = 0.0;
  Eigen::MatrixXd similarity;  // K x K, symmetric, unit diagonal
  double statistic = 0.0;      // mean off-diagonal similarity
  double threshold = 0.0;
  bool backdoor = false;
};

/// exp(-||a_i - a_j||^2 / (2 h^2)) for all pairs of columns.
Eigen::MatrixXd pairwise_similarity(const PointSet& samples, double bandwidth);

/// Generates K samples from input_noise + N(0, sigma^2 I) and scores how alike they are.
DetectionReport ufid_detect(const Mlp& field, const RealVec& input_noise, const UfidConfig& cfg, SeededRng& rng,
                            std::string probe_id = "");

struct UfidCalibration {
  double bandwidth = 0.0;
  double threshold = 0.0;
  std::vector<double> benign_statistics;
};

/// Bandwidth = median pairwise distance of `bandwidth_samples` generated samples;
/// threshold = `quantile` of the statistic over `benign_probes` fresh Gaussian inputs.
UfidCalibration calibrate_ufid(const Mlp& field, const UfidConfig& cfg, int benign_probes, double quantile,
                               int bandwidth_samples, SeededRng& rng);

/// Linear-interpolated empirical quantile.
double empirical_quantile(std::vector<double> values, double q);

nlohmann::json to_json(const DetectionReport& report);

// ---------------------------------------------------------------------------
// Trigger inversion
// ---------------------------------------------------------------------------

struct InversionConfig {
  double lambda = 0.5;
  int steps = 200;
  double learning_rate = 0.01;
  int batch_size = 32;
  double t_min = 0.99;
  double t_max = 1.0;
  double gamma_floor = 1e-3;
  /// false: loss = mse + lambda ||mu|| (norm penalised).
  /// true:  loss = mse - lambda ||mu|| (norm rewarded, the literal TERD sign).
  bool reward_norm = false;

  void validate() const;
};

struct InversionResult {
  RealVec mu;
  double gamma = 1.0;
  double final_loss = 0.0;
  int iterations = 0;
  std::optional<double> cosine_to_truth;
  std::vector<double> loss_history;
};

/// Common random numbers for one evaluation of the inversion objective.
struct InversionDraws {
  PointSet x0;   // surrogate data points ~ N(0, I)
  PointSet eps;
  PointSet eps_hat;
  std::vector<double> t;
};

InversionDraws draw_inversion_batch(int dim, int count, const InversionConfig& cfg, SeededRng& rng);

struct InversionLoss {
  double loss = 0.0;
  double mse = 0.0;
  RealVec grad_mu;
  double grad_gamma = 0.0;
};

/// With x_t = x0 + gamma t eps + mu and xh_t = x0 + gamma t eps_hat + mu:
/// MSE(v(x_t) - (x0 - x_t), v(xh_t) - (x0 - xh_t)) -/+ lambda ||mu||, MSE averaged over
/// coordinates and draws.
InversionLoss inversion_loss(const Mlp& field, const RealVec& mu, double gamma, const InversionDraws& draws,
                             const InversionConfig& cfg);

/// Adam on (mu, gamma) from mu = 0, gamma = 1 with fresh draws each step.
InversionResult terd_invert(const Mlp& field, int dim, const InversionConfig& cfg, SeededRng& rng,
                            const std::optional<RealVec>& true_mu = std::nullopt);

/// Cosine of the angle between a and b; 0 when either vector is zero.
double cosine_similarity(const RealVec& a, const RealVec& b);

nlohmann::json to_json(const InversionResult& result);

}  // namespace flowlab
