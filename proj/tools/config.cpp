#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace flowlab::cli {
namespace {

using nlohmann::json;

/// View of one JSON object that remembers which keys were read, so that
/// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(where() + ": expected an object");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T req(const std::string& key) {
    if (!j_.contains(key)) {
      throw ConfigError(where(key) + ": missing required field");
    }
    return get<T>(key);
  }

  template <class T>
  T opt(const std::string& key, T fallback) {
    return j_.contains(key) ? get<T>(key) : fallback;
  }

  Section child(const std::string& key) {
    if (!j_.contains(key)) {
      throw ConfigError(where(key) + ": missing required section");
    }
    used_.insert(key);
    return Section(j_.at(key), where(key));
  }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) {
      throw ConfigError(where(key) + ": missing required field");
    }
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) {
        throw ConfigError(where(key) + ": unknown key");
      }
    }
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) {
      return path_.empty() ? "config" : path_;
    }
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <class T>
  T get(const std::string& key) {
    used_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

RealVec to_vec(const std::vector<double>& v) { return Eigen::Map<const RealVec>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<RealVec> parse_point_list(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(where + ": expected a non-empty list of points");
  }
  std::vector<RealVec> out;
  for (const auto& p : j) {
    try {
      out.push_back(to_vec(p.get<std::vector<double>>()));
    } catch (const json::exception&) {
      throw ConfigError(where + ": points must be lists of numbers");
    }
  }
  return out;
}

DatasetSpec parse_dataset(Section s) {
  DatasetSpec d;
  d.name = s.req<std::string>("name");
  if (d.name == "eight_gaussians") {
    d.params = {{"radius", s.req<double>("radius")}, {"std", s.req<double>("std")}};
    d.mixture = std::make_shared<GaussianMixture>(eight_gaussians(d.params["radius"], d.params["std"]));
  } else if (d.name == "glyphs") {
    const int side = s.req<int>("side");
    const int modes = s.req<int>("modes");
    const double amplitude = s.req<double>("amplitude");
    const double std_dev = s.req<double>("std");
    const auto seed = s.req<std::uint64_t>("seed");
    d.params = {{"side", side}, {"modes", modes}, {"amplitude", amplitude}, {"std", std_dev}, {"seed", seed}};
    d.mixture = std::make_shared<GaussianMixture>(glyph_mixture(side, modes, amplitude, std_dev, seed));
    d.image_side = side;
  } else if (d.name == "mixture") {
    auto centers = parse_point_list(s.raw("centers"), s.where("centers"));
    const double std_dev = s.req<double>("std");
    auto weights = s.opt<std::vector<double>>("weights", {});
    d.params = {{"centers", s.raw("centers")}, {"std", std_dev}};
    d.mixture = std::make_shared<GaussianMixture>(std::move(centers), std_dev, std::move(weights));
  } else {
    throw ConfigError(s.where("name") + ": unknown dataset '" + d.name + "' (eight_gaussians, glyphs, mixture)");
  }
  s.finish();
  return d;
}

TrainConfig parse_train(Section s, TrainConfig t) {
  t.steps = s.opt("steps", t.steps);
  t.batch_size = s.opt("batch_size", t.batch_size);
  t.learning_rate = s.opt("learning_rate", t.learning_rate);
  t.hidden = s.opt("hidden", t.hidden);
  t.time_embed_dim = s.opt("time_embed_dim", t.time_embed_dim);
  t.grad_clip = s.opt("grad_clip", t.grad_clip);
  t.final_lr_fraction = s.opt("final_lr_fraction", t.final_lr_fraction);
  t.ema_decay = s.opt("ema_decay", t.ema_decay);
  const auto output = s.opt<std::string>("output", t.output == FieldOutput::data ? "data" : "velocity");
  if (output == "velocity") {
    t.output = FieldOutput::velocity;
  } else if (output == "data") {
    t.output = FieldOutput::data;
  } else {
    throw ConfigError(s.where("output") + ": unknown output '" + output + "' (velocity, data)");
  }
  t.kappa = s.opt("kappa", t.kappa);
  if (!(t.kappa > 0.0)) {
    throw ConfigError(s.where("kappa") + ": must be > 0");
  }
  s.finish();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
  return t;
}

TriggerSpec parse_trigger(Section s, const DatasetSpec& data) {
  const int dim = data.mixture->dim();
  const auto kind = s.req<std::string>("kind");
  TriggerSpec trig;
  if (kind == "blend") {
    const double gamma = s.req<double>("gamma");
    RealVec delta;
    if (s.has("delta")) {
      delta = to_vec(s.req<std::vector<double>>("delta"));
    } else if (s.has("glyph_seed")) {
      delta = two_tone_glyphs(1, dim, s.opt("amplitude", 1.0), s.req<std::uint64_t>("glyph_seed"))[0];
    } else {
      delta = blend_pattern(dim, s.req<std::uint64_t>("pattern_seed"));
    }
    trig = make_blend_trigger(std::move(delta), gamma);
  } else if (kind == "patch") {
    int height = data.image_side, width = data.image_side;
    if (s.has("height") || s.has("width") || height == 0) {
      height = s.req<int>("height");
      width = s.req<int>("width");
    }
    trig = make_patch_trigger(height, width, s.opt("fraction", 0.1), s.opt("gamma", 0.1), s.opt("white", 1.0));
  } else if (kind == "invisible") {
    trig = make_invisible_trigger(s.req<std::uint64_t>("seed"), dim);
  } else {
    throw ConfigError(s.where("kind") + ": unknown trigger kind '" + kind + "' (blend, patch, invisible)");
  }
  s.finish();
  return trig;
}

std::vector<RealVec> parse_targets(const json& j, const std::string& where, const DatasetSpec& data) {
  if (j.is_array()) {
    return parse_point_list(j, where);
  }
  Section s(j, where);
  const int count = s.req<int>("count");
  const double amplitude = s.req<double>("amplitude");
  const auto seed = s.req<std::uint64_t>("seed");
  s.finish();
  // Targets are images the clean data never produces exactly, so they must not coincide with a mode.
  return two_tone_glyphs(count, data.mixture->dim(), amplitude, seed, data.mixture->centers());
}

AttackConfig parse_attack(Section s, const DatasetSpec& data, const TrainConfig& base_train) {
  AttackConfig a;
  const auto mode = s.req<std::string>("mode");
  if (mode == "d2i") {
    const auto trigger_seed = s.req<std::uint64_t>("trigger_seed");
    auto targets = parse_targets(s.raw("targets"), s.where("targets"), data);
    a.spec.mode = make_d2i_attack(trigger_seed, data.mixture->dim(), std::move(targets));
  } else if (mode == "din") {
    DinAttack din;
    din.target_label = s.req<int>("target_label");
    if (din.target_label < 0 || din.target_label >= data.mixture->num_modes()) {
      throw ConfigError(s.where("target_label") + ": no such mode in the dataset");
    }
    din.trigger = parse_trigger(s.child("trigger"), data);
    din.target = std::make_shared<MixtureModeSampler>(*data.mixture, din.target_label);
    a.spec.mode = std::move(din);
  } else {
    throw ConfigError(s.where("mode") + ": unknown attack mode '" + mode + "' (din, d2i)");
  }
  a.spec.trojan_ratio = s.opt("trojan_ratio", a.spec.trojan_ratio);
  a.spec.shared_time = s.opt("shared_time", a.spec.shared_time);
  if (s.has("pdt")) {
    Section p = s.child("pdt");
    a.spec.pdt.enabled = p.opt("enabled", true);
    a.spec.pdt.sigma = p.opt("sigma", a.spec.pdt.sigma);
    p.finish();
  }
  a.train = s.has("train") ? parse_train(s.child("train"), base_train) : base_train;
  s.finish();
  try {
    a.spec.validate(data.mixture->dim());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
  return a;
}

DetectConfig parse_detect(Section s, const SamplerConfig& sampler) {
  DetectConfig d;
  d.ufid.sampler = sampler;
  d.ufid.probes = s.opt("probes", d.ufid.probes);
  d.ufid.probe_sigma = s.opt("probe_sigma", d.ufid.probe_sigma);
  d.ufid.sampler.steps = s.opt("sampler_steps", d.ufid.sampler.steps);
  d.calibration_probes = s.opt("calibration_probes", d.calibration_probes);
  d.quantile = s.opt("quantile", d.quantile);
  d.bandwidth_samples = s.opt("bandwidth_samples", d.bandwidth_samples);
  s.finish();
  if (d.calibration_probes < 1 || d.bandwidth_samples < 2 || !(d.quantile >= 0.0 && d.quantile <= 1.0)) {
    throw ConfigError(s.where() + ": calibration_probes >= 1, bandwidth_samples >= 2, quantile in [0, 1]");
  }
  return d;
}

InversionConfig parse_invert(Section s) {
  InversionConfig c;
  c.lambda = s.opt("lambda", c.lambda);
  c.steps = s.opt("steps", c.steps);
  c.learning_rate = s.opt("learning_rate", c.learning_rate);
  c.batch_size = s.opt("batch_size", c.batch_size);
  c.t_min = s.opt("t_min", c.t_min);
  c.t_max = s.opt("t_max", c.t_max);
  c.gamma_floor = s.opt("gamma_floor", c.gamma_floor);
  c.reward_norm = s.opt("reward_norm", c.reward_norm);
  s.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
  return c;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
  Section root(doc, "");
  const int version = root.req<int>("schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                      std::to_string(version));
  }
  ExperimentConfig cfg;
  cfg.seed = root.req<std::uint64_t>("seed");
  if (root.has("output_dir")) {
    cfg.output_dir = root.req<std::string>("output_dir");
  }
  try {
    cfg.dataset = parse_dataset(root.child("dataset"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  if (root.has("train")) {
    cfg.train = parse_train(root.child("train"), cfg.train);
  }
  if (root.has("sampler")) {
    Section s = root.child("sampler");
    cfg.sampler.steps = s.opt("steps", cfg.sampler.steps);
    s.finish();
    if (cfg.sampler.steps < 1) {
      throw ConfigError("sampler.steps: must be >= 1");
    }
  }
  if (root.has("attack")) {
    try {
      cfg.attack = parse_attack(root.child("attack"), cfg.dataset, cfg.train);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("attack: ") + e.what());
    }
    cfg.attack->source = doc.at("attack");
  }
  cfg.detect = root.has("detect") ? parse_detect(root.child("detect"), cfg.sampler) : DetectConfig{};
  if (!root.has("detect")) {
    cfg.detect.ufid.sampler = cfg.sampler;
  }
  if (root.has("invert")) {
    cfg.invert = parse_invert(root.child("invert"));
  }
  if (root.has("eval")) {
    Section s = root.child("eval");
    cfg.eval.samples = s.opt("samples", cfg.eval.samples);
    s.finish();
    if (cfg.eval.samples < 2) {
      throw ConfigError("eval.samples: must be >= 2");
    }
  }
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config " + path.string());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<std::string>& flag) {
  if (flag) {
    return *flag;
  }
  if (const char* env = std::getenv("FLOWLAB_OUT_DIR"); env && *env) {
    return env;
  }
  return cfg.output_dir.value_or(".");
}

}  // namespace flowlab::cli
