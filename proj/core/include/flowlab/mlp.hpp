#pragma once

#include "flowlab/rng.hpp"
#include "flowlab/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace flowlab {

/// How the last layer's output F becomes a velocity.
enum class FieldOutput {
  velocity,  // v = F
  data,      // v = (x - F) / (t + kappa): F predicts the clean end of the path
};

/// Layout of a velocity network: [x ; emb(t)] -> hidden... -> data_dim.
struct MlpShape {
  int data_dim = 0;
  int time_embed_dim = 0;
  std::vector<int> hidden;
  FieldOutput output = FieldOutput::velocity;
  double kappa = 0.1;  // only used by FieldOutput::data; keeps v finite at t = 0

  /// Full chain of layer widths, input first.
  std::vector<int> layer_sizes() const;
  std::size_t param_count() const;
  void validate() const;

  bool operator==(const MlpShape&) const = default;
};

/// Fixed sinusoidal embedding: pairs (sin(w_j t), cos(w_j t)) with w_j = 2^j * pi / 2.
RealVec time_embedding(double t, int dim);

/// Fully connected network with SiLU on hidden layers and a linear output layer.
///
/// Parameters live in one flat vector: for each layer the weight matrix in
/// row-major order followed by the bias. Gradients use the same layout.
class Mlp {
 public:
  using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using WeightMap = Eigen::Map<RowMajorMatrix>;
  using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
  using BiasMap = Eigen::Map<Eigen::VectorXd>;
  using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

  /// Empty network with no layers; only useful as a placeholder.
  Mlp() = default;

  /// All-zero network.
  explicit Mlp(MlpShape shape);

  /// Weights ~ N(0, 1/fan_in), zero biases.
  static Mlp random(MlpShape shape, SeededRng& rng);

  const MlpShape& shape() const { return shape_; }
  int data_dim() const { return shape_.data_dim; }
  int input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  std::size_t num_layers() const { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  WeightMap weight(std::size_t layer);
  ConstWeightMap weight(std::size_t layer) const;
  BiasMap bias(std::size_t layer);
  ConstBiasMap bias(std::size_t layer) const;

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

 private:
  MlpShape shape_;
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
};

/// Activations kept from a forward evaluation for the backward sweep.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> layer_inputs;
  std::vector<Eigen::MatrixXd> preactivations;
  std::vector<Eigen::MatrixXd> gates;  // sigmoid of each preactivation
  Eigen::RowVectorXd output_scale;     // 1 / (t + kappa) per column, data output only
  Eigen::MatrixXd output;              // the velocity
};

struct MlpGrads {
  Eigen::VectorXd params;  // d<upstream, out>/d theta, flat layout of Mlp::params()
  PointSet input;          // d<upstream, out>/d x, one column per sample
};

ForwardPass forward_pass(const Mlp& net, const PointSet& x, std::span<const double> t);

PointSet mlp_forward(const Mlp& net, const PointSet& x, std::span<const double> t);
RealVec mlp_forward(const Mlp& net, const RealVec& x, double t);

/// Gradients of sum_i <upstream_i, out_i> with respect to parameters and inputs.
MlpGrads mlp_backward(const Mlp& net, const ForwardPass& pass, const PointSet& upstream);
MlpGrads mlp_backward(const Mlp& net, const PointSet& x, std::span<const double> t,
                      const PointSet& upstream);
MlpGrads mlp_backward(const Mlp& net, const RealVec& x, double t, const RealVec& upstream);

}  // namespace flowlab
