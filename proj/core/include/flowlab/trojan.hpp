#pragma once

#include "flowlab/datasets.hpp"
#include "flowlab/flow.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace flowlab {

// ---------------------------------------------------------------------------
// Triggers
// ---------------------------------------------------------------------------

/// Trojan noise (1 - gamma) * delta + gamma * eps, i.e. N((1 - gamma) delta, gamma^2 I).
struct BlendTrigger {
  RealVec delta;  // pattern scaled to [-1, 1]
  double gamma = 0.6;
};

/// Per-coordinate blend against a white patch: x_i = (1 - mask_i) value_i + mask_i eps_i.
/// mask_i == 1 off the patch and lies in (0, 1) on it.
struct PatchTrigger {
  RealVec mask;
  RealVec value;
};

/// A fixed Gaussian draw identified by its seed.
struct InvisibleTrigger {
  std::uint64_t seed = 0;
  RealVec point;
};

using TriggerSpec = std::variant<BlendTrigger, PatchTrigger, InvisibleTrigger>;

BlendTrigger make_blend_trigger(RealVec delta, double gamma);
/// Deterministic blend pattern with entries uniform on [-1, 1].
RealVec blend_pattern(int dim, std::uint64_t seed);

/// White patch in the bottom-right corner of a height x width raster covering
/// round(fraction * height * width) pixels, filled from the last row upwards.
PatchTrigger make_patch_trigger(int height, int width, double fraction = 0.1, double on_patch_gamma = 0.1,
                                double white = 1.0);

InvisibleTrigger make_invisible_trigger(std::uint64_t seed, int dim);

void validate_trigger(const TriggerSpec& trigger);
int trigger_dim(const TriggerSpec& trigger);
std::string trigger_kind(const TriggerSpec& trigger);

RealVec make_blend_noise(const BlendTrigger& spec, const RealVec& eps);
RealVec make_patch_noise(const PatchTrigger& spec, const RealVec& eps);
/// Dispatches on the trigger kind; invisible triggers ignore `eps`.
RealVec trojan_noise(const TriggerSpec& trigger, const RealVec& eps);
/// Mean of the Trojan noise distribution, mu = (1 - gamma) * delta for blends.
RealVec trigger_mean(const TriggerSpec& trigger);

/// 64-bit FNV-1a over the IEEE-754 bytes, as 16 hex digits.
std::string fingerprint(const RealVec& v);

// ---------------------------------------------------------------------------
// Unified backdoor path x_t = a(x0, t) x0 + b(t) eps + c(t) r
// ---------------------------------------------------------------------------

struct UnifiedPathCoefficients {
  std::function<double(const RealVec& x0, double t)> a;
  std::function<double(double t)> b;
  std::function<double(double t)> c;

  /// a = 1, b(t) = t, c(t) = t, read literally: x_t = x0 + t eps + t r.
  static UnifiedPathCoefficients flow();
  /// a = 1 - t, b(t) = t, c(t) = t: the straight path that training actually uses,
  /// identical to interpolate(x0, eps + r, t).
  static UnifiedPathCoefficients rectified();
};

RealVec unified_path(const RealVec& x0, const RealVec& eps, const RealVec& r, double t,
                     const UnifiedPathCoefficients& coeffs);

// ---------------------------------------------------------------------------
// Attacks
// ---------------------------------------------------------------------------

/// Trigger distribution -> one class of the clean distribution.
struct DinAttack {
  TriggerSpec trigger;
  int target_label = 0;
  std::shared_ptr<const PointSampler> target;
};

struct D2IPair {
  InvisibleTrigger trigger;
  RealVec target;
};

/// n exact trigger -> target bijections.
struct D2IAttack {
  std::vector<D2IPair> pairs;
};

/// Extra term remapping the neighbourhood trigger + N(0, sigma^2 I) to clean data.
struct PdtConfig {
  bool enabled = false;
  double sigma = 0.3;
};

struct AttackSpec {
  std::variant<DinAttack, D2IAttack> mode;
  PdtConfig pdt;
  double trojan_ratio = 0.1;  // fraction of each batch spent on Trojan pairs
  bool shared_time = false;   // reuse the benign t for the Trojan/PDT columns

  bool is_d2i() const { return std::holds_alternative<D2IAttack>(mode); }
  void validate(int dim) const;
};

/// Pairs triggers drawn from seeds trigger_seed, trigger_seed + 1, ... with `targets`.
D2IAttack make_d2i_attack(std::uint64_t trigger_seed, int dim, std::vector<RealVec> targets);

struct TrojanStep {
  double benign_loss = 0.0;  // mean over benign columns
  double trojan_loss = 0.0;  // mean over Trojan columns, 0 if there are none
  double pdt_loss = 0.0;     // mean over PDT columns, 0 if disabled
  double total = 0.0;        // batch mean over all columns
  Eigen::VectorXd grad;
  int benign_count = 0;
  int trojan_count = 0;
  int pdt_count = 0;
};

/// Column counts for a batch of size `batch`: {benign, trojan, pdt}.
std::array<int, 3> trojan_batch_split(const AttackSpec& attack, int batch);

/// One joint benign + Trojan (+ PDT) step. `clean_batch` supplies the clean
/// points for the benign and PDT columns.
TrojanStep trojan_train_step(const Mlp& field, const PointSet& clean_batch, const AttackSpec& attack,
                             SeededRng& rng);

/// Rectified-flow loss with noise-side point trigger_noise + eps_prime and data-side clean_point.
LossAndGrad pdt_loss(const Mlp& field, const RealVec& clean_point, const RealVec& trigger_noise,
                     const RealVec& eps_prime, double t);

/// Fine-tunes `base` with the attack objective. Component history per step is
/// {benign, trojan, pdt}.
TrainResult attack_finetune(Mlp base, const AttackSpec& attack, const PointSampler& clean,
                            const TrainConfig& cfg, SeededRng& rng);

/// Checkpoint metadata. Raw trigger vectors are included only when `embed_triggers`.
nlohmann::json attack_metadata(const AttackSpec& attack, bool embed_triggers);

}  // namespace flowlab
