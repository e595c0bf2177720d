#include "flowlab/adam.hpp"

#include <cmath>

namespace flowlab {

AdamState::AdamState(Eigen::Index size, AdamConfig config)
    : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void AdamState::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  require_same_dim(params.size(), m_.size(), "adam_step");
  require_same_dim(grad.size(), m_.size(), "adam_step");
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
  }
}

void adam_step(AdamState& state, Mlp& params, const MlpGrads& grads) {
  state.step(params.params(), grads.params);
}

}  // namespace flowlab
