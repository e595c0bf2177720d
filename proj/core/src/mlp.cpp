#include "flowlab/mlp.hpp"

#include <cmath>
#include <numbers>

namespace flowlab {
namespace {

// exp(-z) may overflow to +inf for very negative z, which still yields the right limit 0.
Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

Eigen::MatrixXd build_input(const Mlp& net, const PointSet& x, std::span<const double> t) {
  const int d = net.data_dim();
  const int e = net.shape().time_embed_dim;
  require_same_dim(x.rows(), d, "mlp_forward");
  if (static_cast<Eigen::Index>(t.size()) != x.cols()) {
    throw ShapeError("mlp_forward: need one time value per column");
  }
  Eigen::MatrixXd in(d + e, x.cols());
  in.topRows(d) = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    require_unit_time(t[c], "mlp_forward");
    if (e > 0) {
      in.col(c).tail(e) = time_embedding(t[c], e);
    }
  }
  return in;
}

}  // namespace

std::vector<int> MlpShape::layer_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(hidden.size() + 2);
  sizes.push_back(data_dim + time_embed_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(data_dim);
  return sizes;
}

std::size_t MlpShape::param_count() const {
  const auto sizes = layer_sizes();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    n += static_cast<std::size_t>(sizes[l + 1]) * (sizes[l] + 1);
  }
  return n;
}

void MlpShape::validate() const {
  if (data_dim < 1) {
    throw ShapeError("MlpShape: data_dim must be >= 1");
  }
  if (time_embed_dim < 0 || time_embed_dim % 2 != 0) {
    throw ShapeError("MlpShape: time_embed_dim must be a non-negative even number");
  }
  for (int h : hidden) {
    if (h < 1) {
      throw ShapeError("MlpShape: hidden widths must be >= 1");
    }
  }
  if (output == FieldOutput::data && !(kappa > 0.0)) {
    throw ShapeError("MlpShape: kappa must be positive for data output");
  }
}

RealVec time_embedding(double t, int dim) {
  RealVec emb(dim);
  for (int j = 0; j < dim / 2; ++j) {
    const double w = std::ldexp(std::numbers::pi / 2.0, j);
    emb[2 * j] = std::sin(w * t);
    emb[2 * j + 1] = std::cos(w * t);
  }
  return emb;
}

Mlp::Mlp(MlpShape shape) : shape_(std::move(shape)) {
  shape_.validate();
  sizes_ = shape_.layer_sizes();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

Mlp Mlp::random(MlpShape shape, SeededRng& rng) {
  Mlp net(std::move(shape));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto w = net.weight(l);
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = scale * rng.normal();
      }
    }
  }
  return net;
}

Mlp::WeightMap Mlp::weight(std::size_t layer) {
  return WeightMap(params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]);
}

Mlp::ConstWeightMap Mlp::weight(std::size_t layer) const {
  return ConstWeightMap(params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]);
}

Mlp::BiasMap Mlp::bias(std::size_t layer) {
  return BiasMap(params_.data() + offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer],
                 sizes_[layer + 1]);
}

Mlp::ConstBiasMap Mlp::bias(std::size_t layer) const {
  return ConstBiasMap(
      params_.data() + offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer],
      sizes_[layer + 1]);
}

ForwardPass forward_pass(const Mlp& net, const PointSet& x, std::span<const double> t) {
  if (net.num_layers() == 0) {
    throw ShapeError("mlp_forward: empty network");
  }
  ForwardPass pass;
  const std::size_t layers = net.num_layers();
  pass.layer_inputs.reserve(layers);
  pass.preactivations.reserve(layers - 1);
  pass.gates.reserve(layers - 1);
  pass.layer_inputs.push_back(build_input(net, x, t));
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = net.weight(l) * pass.layer_inputs.back();
    z.colwise() += net.bias(l);
    if (l + 1 == layers) {
      if (net.shape().output == FieldOutput::data) {
        pass.output_scale.resize(x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
          pass.output_scale[c] = 1.0 / (t[c] + net.shape().kappa);
        }
        pass.output = (x - z) * pass.output_scale.asDiagonal();
      } else {
        pass.output = std::move(z);
      }
      break;
    }
    Eigen::MatrixXd s = sigmoid(z);
    pass.layer_inputs.push_back(z.cwiseProduct(s));
    pass.preactivations.push_back(std::move(z));
    pass.gates.push_back(std::move(s));
  }
  return pass;
}

PointSet mlp_forward(const Mlp& net, const PointSet& x, std::span<const double> t) {
  return forward_pass(net, x, t).output;
}

RealVec mlp_forward(const Mlp& net, const RealVec& x, double t) {
  const double ts[1] = {t};
  return forward_pass(net, x, ts).output.col(0);
}

MlpGrads mlp_backward(const Mlp& net, const ForwardPass& pass, const PointSet& upstream) {
  require_same_dim(upstream.rows(), net.data_dim(), "mlp_backward");
  require_same_dim(upstream.cols(), pass.output.cols(), "mlp_backward");

  MlpGrads grads;
  grads.params = Eigen::VectorXd::Zero(net.params().size());
  const auto& sizes = net.layer_sizes();

  const bool data_output = net.shape().output == FieldOutput::data;
  // v = (x - F) s: dF receives -u s and x receives u s directly.
  Eigen::MatrixXd delta = data_output ? Eigen::MatrixXd(-(upstream * pass.output_scale.asDiagonal())) : upstream;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const Eigen::MatrixXd& a = pass.layer_inputs[l];
    double* base = grads.params.data() + net.weight_offset(l);
    Mlp::WeightMap(base, sizes[l + 1], sizes[l]).noalias() = delta * a.transpose();
    Mlp::BiasMap(base + static_cast<std::size_t>(sizes[l + 1]) * sizes[l], sizes[l + 1]) =
        delta.rowwise().sum();

    Eigen::MatrixXd back = net.weight(l).transpose() * delta;
    if (l == 0) {
      grads.input = back.topRows(net.data_dim());
      break;
    }
    // d/dz [z s(z)] = s (1 + z (1 - s))
    const auto z = pass.preactivations[l - 1].array();
    const auto s = pass.gates[l - 1].array();
    delta = (back.array() * s * (1.0 + z * (1.0 - s))).matrix();
  }
  if (data_output) {
    grads.input += upstream * pass.output_scale.asDiagonal();
  }
  return grads;
}

MlpGrads mlp_backward(const Mlp& net, const PointSet& x, std::span<const double> t,
                      const PointSet& upstream) {
  return mlp_backward(net, forward_pass(net, x, t), upstream);
}

MlpGrads mlp_backward(const Mlp& net, const RealVec& x, double t, const RealVec& upstream) {
  const double ts[1] = {t};
  return mlp_backward(net, forward_pass(net, x, ts), upstream);
}

}  // namespace flowlab
