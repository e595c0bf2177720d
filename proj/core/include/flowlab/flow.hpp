#pragma once

#include "flowlab/adam.hpp"
#include "flowlab/datasets.hpp"
#include "flowlab/mlp.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace flowlab {

/// A point on the straight path between a data point x0 (t = 0) and a noise point xT (t = 1).
struct FlowPathPoint {
  RealVec x0;
  RealVec xT;
  double t = 0.0;
  RealVec xt;
};

/// Euler integration from t = 1 down to t = 0 in `steps` equal increments.
struct SamplerConfig {
  int steps = 100;
};

struct TrainConfig {
  int steps = 2000;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {128, 128};
  int time_embed_dim = 8;
  FieldOutput output = FieldOutput::velocity;
  double kappa = 0.1;
  double grad_clip = 0.0;          // global-norm clip, 0 disables
  double final_lr_fraction = 1.0;  // cosine decay to lr * fraction, 1 keeps lr constant
  double ema_decay = 0.0;          // weight averaging, 0 returns raw weights

  void validate() const;
};

RealVec interpolate(const RealVec& x0, const RealVec& xT, double t);
FlowPathPoint make_path_point(const RealVec& x0, const RealVec& xT, double t);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// ||v(x_t, t) - (xT - x0)||^2 and its parameter gradient for one (x0, xT, t) draw.
LossAndGrad rf_loss_and_grad(const Mlp& field, const RealVec& x0, const RealVec& xT, double t);

/// Weighted batch of path endpoints. Column i contributes weight[i] * ||residual_i||^2.
struct FlowBatch {
  PointSet x0;
  PointSet xT;
  std::vector<double> t;
  std::vector<double> weight;
};

struct BatchLoss {
  double total = 0.0;
  Eigen::VectorXd per_sample;  // unweighted squared residual norms
  Eigen::VectorXd grad;
};

BatchLoss rf_batch_loss(const Mlp& field, const FlowBatch& batch);

/// Time at which Euler step k (0-based) evaluates the field: (N - k) / N.
double euler_time(int step, int total_steps);

/// All N + 1 states from t = 1 to t = 0; the last one is the generated sample.
std::vector<RealVec> euler_sample(const Mlp& field, const RealVec& xT, const SamplerConfig& cfg);

PointSet euler_sample_batch(const Mlp& field, const PointSet& xT, const SamplerConfig& cfg);
std::vector<PointSet> euler_trajectories(const Mlp& field, const PointSet& xT,
                                         const SamplerConfig& cfg);

/// CSV with columns chain_id, step, t, x_0 .. x_{d-1}.
void write_trajectory_csv(std::ostream& out, const std::vector<PointSet>& states,
                          const SamplerConfig& cfg);

/// One optimizer step's worth of work: total loss, its gradient and named parts.
struct StepOutcome {
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::vector<double> components;
};

using StepFunction = std::function<StepOutcome(const Mlp& field, SeededRng& rng)>;

struct TrainResult {
  Mlp field;
  std::vector<double> loss_history;
  std::vector<std::vector<double>> component_history;
};

/// Generic Adam loop shared by benign training and attacks. Throws DivergenceError
/// on the first non-finite loss.
TrainResult optimize_field(Mlp init, const TrainConfig& cfg, SeededRng& rng, const StepFunction& step);

/// Exponential moving average of a loss history (smoothing in (0, 1)).
std::vector<double> moving_average(const std::vector<double>& values, double smoothing);

/// Independent-coupling rectified-flow batch: x0 from data, xT ~ N(0, I), t ~ U(0, 1).
FlowBatch benign_flow_batch(const PointSampler& data, int count, SeededRng& rng);

/// Fresh network initialised from cfg.seed, trained on `data`.
TrainResult train_benign(const PointSampler& data, const TrainConfig& cfg);
/// Continue training an existing network.
TrainResult train_benign(Mlp init, const PointSampler& data, const TrainConfig& cfg);

MlpShape shape_for(int data_dim, const TrainConfig& cfg);
Mlp initial_field(int data_dim, const TrainConfig& cfg);

}  // namespace flowlab
