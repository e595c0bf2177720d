#pragma once

#include "flowlab/mlp.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>

namespace flowlab {

/// A saved velocity field plus provenance. `attack` is null for benign models.
struct Checkpoint {
  Mlp field;
  std::uint64_t seed = 0;
  nlohmann::json training = nlohmann::json::object();
  nlohmann::json attack;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowlab
