#include "flowlab/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace flowlab {
namespace {

constexpr const char* kFormat = "flowlab.checkpoint";
constexpr int kVersion = 1;

}  // namespace

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  const Mlp& net = ckpt.field;
  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["data_dim"] = net.shape().data_dim;
  doc["time_embed_dim"] = net.shape().time_embed_dim;
  doc["hidden"] = net.shape().hidden;
  doc["layer_sizes"] = net.layer_sizes();
  doc["activation"] = "silu";
  doc["output"] = net.shape().output == FieldOutput::data ? "data" : "velocity";
  doc["kappa"] = net.shape().kappa;
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weight(l);
    const auto b = net.bias(l);
    nlohmann::json layer;
    layer["rows"] = w.rows();
    layer["cols"] = w.cols();
    layer["weight"] = std::vector<double>(w.data(), w.data() + w.size());
    layer["bias"] = std::vector<double>(b.data(), b.data() + b.size());
    layers.push_back(std::move(layer));
  }
  doc["layers"] = std::move(layers);
  doc["seed"] = ckpt.seed;
  doc["training"] = ckpt.training;
  if (!ckpt.attack.is_null()) {
    doc["attack"] = ckpt.attack;
  }
  return doc;
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  if (doc.value("format", std::string{}) != kFormat) {
    throw std::runtime_error("checkpoint: missing or unknown format tag");
  }
  if (doc.at("version").get<int>() != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version");
  }
  MlpShape shape;
  shape.data_dim = doc.at("data_dim").get<int>();
  shape.time_embed_dim = doc.at("time_embed_dim").get<int>();
  shape.hidden = doc.at("hidden").get<std::vector<int>>();
  const auto output = doc.value("output", std::string("velocity"));
  if (output != "velocity" && output != "data") {
    throw std::runtime_error("checkpoint: unknown output '" + output + "'");
  }
  shape.output = output == "data" ? FieldOutput::data : FieldOutput::velocity;
  shape.kappa = doc.value("kappa", shape.kappa);

  Checkpoint ckpt;
  ckpt.field = Mlp(shape);
  if (doc.at("layer_sizes").get<std::vector<int>>() != ckpt.field.layer_sizes()) {
    throw ShapeError("checkpoint: layer_sizes disagree with data_dim/time_embed_dim/hidden");
  }
  const auto& layers = doc.at("layers");
  if (layers.size() != ckpt.field.num_layers()) {
    throw ShapeError("checkpoint: wrong number of layers");
  }
  for (std::size_t l = 0; l < ckpt.field.num_layers(); ++l) {
    auto w = ckpt.field.weight(l);
    auto b = ckpt.field.bias(l);
    const auto weights = layers[l].at("weight").get<std::vector<double>>();
    const auto biases = layers[l].at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(weights.size()) != w.size() ||
        static_cast<Eigen::Index>(biases.size()) != b.size()) {
      throw ShapeError("checkpoint: layer " + std::to_string(l) + " has the wrong number of values");
    }
    std::copy(weights.begin(), weights.end(), w.data());
    std::copy(biases.begin(), biases.end(), b.data());
  }
  ckpt.seed = doc.at("seed").get<std::uint64_t>();
  ckpt.training = doc.value("training", nlohmann::json::object());
  if (doc.contains("attack")) {
    ckpt.attack = doc.at("attack");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  // nlohmann emits the shortest decimal form that parses back to the same double.
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read checkpoint " + path.string());
  }
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace flowlab
