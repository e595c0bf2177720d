#pragma once

#include "flowlab/mlp.hpp"

namespace flowlab {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector. Single writer.
class AdamState {
 public:
  AdamState(Eigen::Index size, AdamConfig config);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  long step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long steps_ = 0;
};

void adam_step(AdamState& state, Mlp& params, const MlpGrads& grads);

}  // namespace flowlab
