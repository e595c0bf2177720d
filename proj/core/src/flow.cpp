#include "flowlab/flow.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

namespace flowlab {

void TrainConfig::validate() const {
  if (steps < 0 || batch_size < 1 || !(learning_rate > 0.0)) {
    throw std::invalid_argument("TrainConfig: steps >= 0, batch_size >= 1 and learning_rate > 0 required");
  }
  if (grad_clip < 0.0 || !(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0) ||
      !(ema_decay >= 0.0 && ema_decay < 1.0)) {
    throw std::invalid_argument("TrainConfig: grad_clip >= 0, final_lr_fraction in (0, 1], ema_decay in [0, 1)");
  }
}

RealVec interpolate(const RealVec& x0, const RealVec& xT, double t) {
  require_same_dim(x0.size(), xT.size(), "interpolate");
  require_unit_time(t, "interpolate");
  return (1.0 - t) * x0 + t * xT;
}

FlowPathPoint make_path_point(const RealVec& x0, const RealVec& xT, double t) {
  return FlowPathPoint{x0, xT, t, interpolate(x0, xT, t)};
}

LossAndGrad rf_loss_and_grad(const Mlp& field, const RealVec& x0, const RealVec& xT, double t) {
  FlowBatch batch{x0, xT, {t}, {1.0}};
  BatchLoss bl = rf_batch_loss(field, batch);
  return LossAndGrad{bl.total, std::move(bl.grad)};
}

BatchLoss rf_batch_loss(const Mlp& field, const FlowBatch& batch) {
  require_same_dim(batch.x0.rows(), field.data_dim(), "rf_batch_loss");
  require_same_dim(batch.xT.rows(), batch.x0.rows(), "rf_batch_loss");
  require_same_dim(batch.xT.cols(), batch.x0.cols(), "rf_batch_loss");
  const Eigen::Index n = batch.x0.cols();
  if (static_cast<Eigen::Index>(batch.t.size()) != n || static_cast<Eigen::Index>(batch.weight.size()) != n) {
    throw ShapeError("rf_batch_loss: need one t and one weight per column");
  }
  PointSet xt(batch.x0.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    require_unit_time(batch.t[c], "rf_batch_loss");
    xt.col(c) = (1.0 - batch.t[c]) * batch.x0.col(c) + batch.t[c] * batch.xT.col(c);
  }
  const ForwardPass pass = forward_pass(field, xt, batch.t);
  PointSet residual = pass.output - (batch.xT - batch.x0);

  BatchLoss out;
  out.per_sample = residual.colwise().squaredNorm().transpose();
  PointSet upstream(residual.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    out.total += batch.weight[c] * out.per_sample[c];
    upstream.col(c) = 2.0 * batch.weight[c] * residual.col(c);
  }
  out.grad = mlp_backward(field, pass, upstream).params;
  return out;
}

double euler_time(int step, int total_steps) {
  return static_cast<double>(total_steps - step) / static_cast<double>(total_steps);
}

namespace {

void check_sampler(const Mlp& field, Eigen::Index rows, const SamplerConfig& cfg) {
  if (cfg.steps < 1) {
    throw std::invalid_argument("euler_sample: need at least one step");
  }
  require_same_dim(rows, field.data_dim(), "euler_sample");
}

template <typename Visitor>
PointSet integrate(const Mlp& field, PointSet x, const SamplerConfig& cfg, Visitor&& visit) {
  check_sampler(field, x.rows(), cfg);
  const double h = 1.0 / static_cast<double>(cfg.steps);
  std::vector<double> t(static_cast<std::size_t>(x.cols()));
  visit(x);
  for (int k = 0; k < cfg.steps; ++k) {
    std::fill(t.begin(), t.end(), euler_time(k, cfg.steps));
    x -= h * mlp_forward(field, x, t);
    visit(x);
  }
  return x;
}

}  // namespace

std::vector<RealVec> euler_sample(const Mlp& field, const RealVec& xT, const SamplerConfig& cfg) {
  std::vector<RealVec> states;
  states.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  integrate(field, PointSet(xT), cfg, [&](const PointSet& x) { states.push_back(x.col(0)); });
  return states;
}

PointSet euler_sample_batch(const Mlp& field, const PointSet& xT, const SamplerConfig& cfg) {
  return integrate(field, xT, cfg, [](const PointSet&) {});
}

std::vector<PointSet> euler_trajectories(const Mlp& field, const PointSet& xT, const SamplerConfig& cfg) {
  std::vector<PointSet> states;
  integrate(field, xT, cfg, [&](const PointSet& x) { states.push_back(x); });
  return states;
}

void write_trajectory_csv(std::ostream& out, const std::vector<PointSet>& states, const SamplerConfig& cfg) {
  if (states.empty()) {
    return;
  }
  const Eigen::Index dim = states.front().rows();
  out << "chain_id,step,t";
  for (Eigen::Index i = 0; i < dim; ++i) {
    out << ",x_" << i;
  }
  out << '\n';
  const auto old_precision = out.precision(17);
  for (Eigen::Index chain = 0; chain < states.front().cols(); ++chain) {
    for (std::size_t step = 0; step < states.size(); ++step) {
      out << chain << ',' << step << ',' << euler_time(static_cast<int>(step), cfg.steps);
      for (Eigen::Index i = 0; i < dim; ++i) {
        out << ',' << states[step](i, chain);
      }
      out << '\n';
    }
  }
  out.precision(old_precision);
}

TrainResult optimize_field(Mlp init, const TrainConfig& cfg, SeededRng& rng, const StepFunction& step) {
  cfg.validate();
  TrainResult result{std::move(init), {}, {}};
  result.loss_history.reserve(static_cast<std::size_t>(cfg.steps));
  AdamState adam(result.field.params().size(), AdamConfig{cfg.learning_rate});
  Eigen::VectorXd ema;
  if (cfg.ema_decay > 0.0) {
    ema = result.field.params();
  }

  for (int s = 0; s < cfg.steps; ++s) {
    StepOutcome outcome = step(result.field, rng);
    if (!std::isfinite(outcome.loss) || !outcome.grad.allFinite()) {
      throw DivergenceError("training diverged at step " + std::to_string(s) +
                            " (loss = " + std::to_string(outcome.loss) + ")");
    }
    if (cfg.grad_clip > 0.0) {
      const double norm = outcome.grad.norm();
      if (norm > cfg.grad_clip) {
        outcome.grad *= cfg.grad_clip / norm;
      }
    }
    if (cfg.final_lr_fraction < 1.0) {
      const double progress = static_cast<double>(s) / static_cast<double>(cfg.steps);
      const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      adam.set_learning_rate(cfg.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * cosine));
    }
    adam.step(result.field.params(), outcome.grad);
    if (cfg.ema_decay > 0.0) {
      ema = cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * result.field.params();
    }
    result.loss_history.push_back(outcome.loss);
    result.component_history.push_back(std::move(outcome.components));
  }
  if (cfg.ema_decay > 0.0 && cfg.steps > 0) {
    result.field.params() = ema;
  }
  return result;
}

std::vector<double> moving_average(const std::vector<double>& values, double smoothing) {
  std::vector<double> out;
  out.reserve(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc = i == 0 ? values[i] : smoothing * acc + (1.0 - smoothing) * values[i];
    out.push_back(acc);
  }
  return out;
}

FlowBatch benign_flow_batch(const PointSampler& data, int count, SeededRng& rng) {
  FlowBatch batch;
  batch.x0 = data.sample(rng, count);
  batch.xT = gaussian_batch(rng, data.dim(), count);
  batch.t.resize(static_cast<std::size_t>(count));
  for (double& t : batch.t) {
    t = rng.uniform();
  }
  batch.weight.assign(static_cast<std::size_t>(count), 1.0 / static_cast<double>(count));
  return batch;
}

MlpShape shape_for(int data_dim, const TrainConfig& cfg) {
  return MlpShape{data_dim, cfg.time_embed_dim, cfg.hidden, cfg.output, cfg.kappa};
}

Mlp initial_field(int data_dim, const TrainConfig& cfg) {
  SeededRng init_rng = SeededRng(cfg.seed).split(1);
  return Mlp::random(shape_for(data_dim, cfg), init_rng);
}

TrainResult train_benign(const PointSampler& data, const TrainConfig& cfg) {
  return train_benign(initial_field(data.dim(), cfg), data, cfg);
}

TrainResult train_benign(Mlp init, const PointSampler& data, const TrainConfig& cfg) {
  require_same_dim(init.data_dim(), data.dim(), "train_benign");
  SeededRng rng = SeededRng(cfg.seed).split(2);
  return optimize_field(std::move(init), cfg, rng, [&](const Mlp& field, SeededRng& r) {
    const BatchLoss bl = rf_batch_loss(field, benign_flow_batch(data, cfg.batch_size, r));
    return StepOutcome{bl.total, bl.grad, {bl.total}};
  });
}

}  // namespace flowlab
