#pragma once

#include "flowlab/datasets.hpp"
#include "flowlab/defense.hpp"
#include "flowlab/flow.hpp"
#include "flowlab/trojan.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace flowlab::cli {

inline constexpr int kSchemaVersion = 1;

/// Malformed configuration. The message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string name;  // eight_gaussians | glyphs | mixture
  nlohmann::json params;
  std::shared_ptr<const GaussianMixture> mixture;
  int image_side = 0;  // > 0 when points are side x side images
};

struct AttackConfig {
  AttackSpec spec;
  TrainConfig train;
  nlohmann::json source;  // the attack section as written, for provenance
};

struct DetectConfig {
  UfidConfig ufid;
  int calibration_probes = 200;
  double quantile = 0.99;
  int bandwidth_samples = 1000;
};

struct EvalConfig {
  int samples = 2000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output_dir;
  DatasetSpec dataset;
  TrainConfig train;
  std::optional<AttackConfig> attack;
  SamplerConfig sampler;
  DetectConfig detect;
  InversionConfig invert;
  EvalConfig eval;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// --out, then $FLOWLAB_OUT_DIR, then output_dir from the config, then ".".
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<std::string>& flag);

}  // namespace flowlab::cli
