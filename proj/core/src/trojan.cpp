#include "flowlab/trojan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

namespace flowlab {

BlendTrigger make_blend_trigger(RealVec delta, double gamma) {
  BlendTrigger trig{std::move(delta), gamma};
  validate_trigger(trig);
  return trig;
}

RealVec blend_pattern(int dim, std::uint64_t seed) {
  if (dim < 1) {
    throw std::invalid_argument("blend_pattern: dim must be >= 1");
  }
  SeededRng rng(seed);
  RealVec delta(dim);
  for (int i = 0; i < dim; ++i) {
    delta[i] = rng.uniform(-1.0, 1.0);
  }
  return delta;
}

PatchTrigger make_patch_trigger(int height, int width, double fraction, double on_patch_gamma, double white) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("make_patch_trigger: raster must be at least 1x1");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("make_patch_trigger: fraction must lie in (0, 1]");
  }
  const int dim = height * width;
  const int pixels = std::max(1, static_cast<int>(std::lround(fraction * dim)));
  const int patch_width = std::min(width, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(pixels)))));

  PatchTrigger trig{RealVec::Ones(dim), RealVec::Constant(dim, white)};
  int placed = 0;
  for (int row = height - 1; row >= 0 && placed < pixels; --row) {
    for (int col = width - patch_width; col < width && placed < pixels; ++col) {
      trig.mask[row * width + col] = on_patch_gamma;
      ++placed;
    }
  }
  validate_trigger(trig);
  return trig;
}

InvisibleTrigger make_invisible_trigger(std::uint64_t seed, int dim) {
  SeededRng rng(seed);
  return InvisibleTrigger{seed, gaussian_sample(rng, dim)};
}

void validate_trigger(const TriggerSpec& trigger) {
  std::visit(
      [](const auto& trig) {
        using T = std::decay_t<decltype(trig)>;
        if constexpr (std::is_same_v<T, BlendTrigger>) {
          if (!(trig.gamma >= 0.0 && trig.gamma <= 1.0)) {
            throw std::invalid_argument("blend trigger: gamma must lie in [0, 1]");
          }
          if (trig.delta.size() < 1 || !trig.delta.allFinite() || trig.delta.cwiseAbs().maxCoeff() > 1.0) {
            throw std::invalid_argument("blend trigger: delta must be finite with entries in [-1, 1]");
          }
        } else if constexpr (std::is_same_v<T, PatchTrigger>) {
          require_same_dim(trig.mask.size(), trig.value.size(), "patch trigger");
          for (Eigen::Index i = 0; i < trig.mask.size(); ++i) {
            const double g = trig.mask[i];
            if (!(g > 0.0 && g <= 1.0)) {
              throw std::invalid_argument("patch trigger: mask entries must lie in (0, 1]");
            }
          }
        } else {
          SeededRng rng(trig.seed);
          if (trig.point.size() < 1 || gaussian_sample(rng, static_cast<int>(trig.point.size())) != trig.point) {
            throw std::invalid_argument("invisible trigger: point does not match its seed");
          }
        }
      },
      trigger);
}

int trigger_dim(const TriggerSpec& trigger) {
  return std::visit(
      [](const auto& trig) -> int {
        using T = std::decay_t<decltype(trig)>;
        if constexpr (std::is_same_v<T, BlendTrigger>) {
          return static_cast<int>(trig.delta.size());
        } else if constexpr (std::is_same_v<T, PatchTrigger>) {
          return static_cast<int>(trig.mask.size());
        } else {
          return static_cast<int>(trig.point.size());
        }
      },
      trigger);
}

std::string trigger_kind(const TriggerSpec& trigger) {
  static const char* names[] = {"blend", "patch", "invisible"};
  return names[trigger.index()];
}

RealVec make_blend_noise(const BlendTrigger& spec, const RealVec& eps) {
  require_same_dim(spec.delta.size(), eps.size(), "make_blend_noise");
  return (1.0 - spec.gamma) * spec.delta + spec.gamma * eps;
}

RealVec make_patch_noise(const PatchTrigger& spec, const RealVec& eps) {
  require_same_dim(spec.mask.size(), eps.size(), "make_patch_noise");
  return (RealVec::Ones(eps.size()) - spec.mask).cwiseProduct(spec.value) + spec.mask.cwiseProduct(eps);
}

RealVec trojan_noise(const TriggerSpec& trigger, const RealVec& eps) {
  return std::visit(
      [&](const auto& trig) -> RealVec {
        using T = std::decay_t<decltype(trig)>;
        if constexpr (std::is_same_v<T, BlendTrigger>) {
          return make_blend_noise(trig, eps);
        } else if constexpr (std::is_same_v<T, PatchTrigger>) {
          return make_patch_noise(trig, eps);
        } else {
          return trig.point;
        }
      },
      trigger);
}

RealVec trigger_mean(const TriggerSpec& trigger) {
  return trojan_noise(trigger, RealVec::Zero(trigger_dim(trigger)));
}

std::string fingerprint(const RealVec& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v[i], sizeof bits);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xfU];
    h >>= 4;
  }
  return out;
}

UnifiedPathCoefficients UnifiedPathCoefficients::flow() {
  return UnifiedPathCoefficients{[](const RealVec&, double) { return 1.0; }, [](double t) { return t; },
                                 [](double t) { return t; }};
}

UnifiedPathCoefficients UnifiedPathCoefficients::rectified() {
  return UnifiedPathCoefficients{[](const RealVec&, double t) { return 1.0 - t; }, [](double t) { return t; },
                                 [](double t) { return t; }};
}

RealVec unified_path(const RealVec& x0, const RealVec& eps, const RealVec& r, double t,
                     const UnifiedPathCoefficients& coeffs) {
  require_same_dim(x0.size(), eps.size(), "unified_path");
  require_same_dim(x0.size(), r.size(), "unified_path");
  require_unit_time(t, "unified_path");
  const double a = coeffs.a(x0, t);
  const double b = coeffs.b(t);
  const double c = coeffs.c(t);
  if (b == c) {
    // shared coefficient: the shifted noise eps + r is one endpoint
    const RealVec xT = eps + r;
    return a * x0 + b * xT;
  }
  return a * x0 + b * eps + c * r;
}

void AttackSpec::validate(int dim) const {
  if (!(trojan_ratio > 0.0 && trojan_ratio < 1.0)) {
    throw std::invalid_argument("attack: trojan_ratio must lie in (0, 1)");
  }
  if (pdt.enabled && !(pdt.sigma >= 0.0)) {
    throw std::invalid_argument("attack: PDT sigma must be >= 0");
  }
  if (const auto* din = std::get_if<DinAttack>(&mode)) {
    validate_trigger(din->trigger);
    require_same_dim(trigger_dim(din->trigger), dim, "din attack trigger");
    if (!din->target) {
      throw std::invalid_argument("din attack: missing target sampler");
    }
    require_same_dim(din->target->dim(), dim, "din attack target");
    return;
  }
  const auto& d2i = std::get<D2IAttack>(mode);
  if (d2i.pairs.empty()) {
    throw std::invalid_argument("d2i attack: need at least one pair");
  }
  for (std::size_t i = 0; i < d2i.pairs.size(); ++i) {
    const auto& p = d2i.pairs[i];
    require_same_dim(p.trigger.point.size(), dim, "d2i trigger");
    require_same_dim(p.target.size(), dim, "d2i target");
    for (std::size_t j = 0; j < i; ++j) {
      if (d2i.pairs[j].trigger.point == p.trigger.point) {
        throw std::invalid_argument("d2i attack: triggers must be distinct");
      }
      if (d2i.pairs[j].target == p.target) {
        throw std::invalid_argument("d2i attack: targets must be distinct");
      }
    }
  }
}

D2IAttack make_d2i_attack(std::uint64_t trigger_seed, int dim, std::vector<RealVec> targets) {
  D2IAttack attack;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    attack.pairs.push_back(D2IPair{make_invisible_trigger(trigger_seed + i, dim), std::move(targets[i])});
  }
  return attack;
}

std::array<int, 3> trojan_batch_split(const AttackSpec& attack, int batch) {
  const int trojan = static_cast<int>(std::lround(attack.trojan_ratio * batch));
  const int pdt = attack.pdt.enabled ? trojan : 0;
  const int benign = batch - trojan - pdt;
  if (benign < 1) {
    throw std::invalid_argument("trojan_train_step: batch too small for the requested Trojan ratio");
  }
  return {benign, trojan, pdt};
}

TrojanStep trojan_train_step(const Mlp& field, const PointSet& clean_batch, const AttackSpec& attack,
                             SeededRng& rng) {
  const int batch = static_cast<int>(clean_batch.cols());
  if (batch < 1) {
    throw std::invalid_argument("trojan_train_step: empty batch");
  }
  const int dim = field.data_dim();
  require_same_dim(clean_batch.rows(), dim, "trojan_train_step");
  const auto [n_benign, n_trojan, n_pdt] = trojan_batch_split(attack, batch);

  FlowBatch fb;
  fb.x0.resize(dim, batch);
  fb.xT.resize(dim, batch);
  fb.t.resize(static_cast<std::size_t>(batch));
  fb.weight.assign(static_cast<std::size_t>(batch), 1.0 / static_cast<double>(batch));

  for (int c = 0; c < n_benign; ++c) {
    fb.x0.col(c) = clean_batch.col(c);
    fb.xT.col(c) = gaussian_sample(rng, dim);
    fb.t[c] = rng.uniform();
  }

  const int trojan_begin = n_benign;
  if (const auto* din = std::get_if<DinAttack>(&attack.mode)) {
    if (n_trojan > 0) {
      fb.x0.middleCols(trojan_begin, n_trojan) = din->target->sample(rng, n_trojan);
    }
    for (int k = 0; k < n_trojan; ++k) {
      fb.xT.col(trojan_begin + k) = trojan_noise(din->trigger, gaussian_sample(rng, dim));
    }
  } else {
    const auto& pairs = std::get<D2IAttack>(attack.mode).pairs;
    const std::size_t offset = rng.next_u64() % pairs.size();
    for (int k = 0; k < n_trojan; ++k) {
      const auto& pair = pairs[(offset + static_cast<std::size_t>(k)) % pairs.size()];
      fb.x0.col(trojan_begin + k) = pair.target;
      fb.xT.col(trojan_begin + k) = pair.trigger.point;
    }
  }

  const int pdt_begin = n_benign + n_trojan;
  for (int k = 0; k < n_pdt; ++k) {
    // The clean column reserved for this PDT sample; the noise side is a perturbed trigger.
    const int c = pdt_begin + k;
    fb.x0.col(c) = clean_batch.col(c);
    const RealVec& trigger_point = fb.xT.col(trojan_begin + k);
    RealVec eps_prime = attack.pdt.sigma * gaussian_sample(rng, dim);
    if (const auto* din = std::get_if<DinAttack>(&attack.mode)) {
      fb.xT.col(c) = trojan_noise(din->trigger, gaussian_sample(rng, dim)) + eps_prime;
    } else {
      fb.xT.col(c) = trigger_point + eps_prime;
    }
  }

  for (int c = n_benign; c < batch; ++c) {
    fb.t[c] = attack.shared_time ? fb.t[(c - n_benign) % n_benign] : rng.uniform();
  }

  const BatchLoss bl = rf_batch_loss(field, fb);
  TrojanStep step;
  step.total = bl.total;
  step.grad = bl.grad;
  step.benign_count = n_benign;
  step.trojan_count = n_trojan;
  step.pdt_count = n_pdt;
  step.benign_loss = bl.per_sample.head(n_benign).mean();
  if (n_trojan > 0) {
    step.trojan_loss = bl.per_sample.segment(trojan_begin, n_trojan).mean();
  }
  if (n_pdt > 0) {
    step.pdt_loss = bl.per_sample.segment(pdt_begin, n_pdt).mean();
  }
  return step;
}

LossAndGrad pdt_loss(const Mlp& field, const RealVec& clean_point, const RealVec& trigger_noise,
                     const RealVec& eps_prime, double t) {
  require_same_dim(trigger_noise.size(), eps_prime.size(), "pdt_loss");
  return rf_loss_and_grad(field, clean_point, trigger_noise + eps_prime, t);
}

TrainResult attack_finetune(Mlp base, const AttackSpec& attack, const PointSampler& clean,
                            const TrainConfig& cfg, SeededRng& rng) {
  attack.validate(base.data_dim());
  require_same_dim(clean.dim(), base.data_dim(), "attack_finetune");
  return optimize_field(std::move(base), cfg, rng, [&](const Mlp& field, SeededRng& r) {
    const PointSet clean_batch = clean.sample(r, cfg.batch_size);
    TrojanStep step = trojan_train_step(field, clean_batch, attack, r);
    return StepOutcome{step.total, std::move(step.grad), {step.benign_loss, step.trojan_loss, step.pdt_loss}};
  });
}

namespace {

nlohmann::json vec_json(const RealVec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

nlohmann::json attack_metadata(const AttackSpec& attack, bool embed_triggers) {
  nlohmann::json meta;
  meta["trojan_ratio"] = attack.trojan_ratio;
  meta["shared_time"] = attack.shared_time;
  meta["pdt"] = {{"enabled", attack.pdt.enabled}};
  if (attack.pdt.enabled) {
    meta["pdt"]["sigma"] = attack.pdt.sigma;
  }
  meta["triggers_embedded"] = embed_triggers;
  if (const auto* din = std::get_if<DinAttack>(&attack.mode)) {
    meta["mode"] = "din";
    meta["target_label"] = din->target_label;
    nlohmann::json trig;
    trig["kind"] = trigger_kind(din->trigger);
    trig["hash"] = fingerprint(trojan_noise(din->trigger, RealVec::Zero(trigger_dim(din->trigger))));
    if (const auto* blend = std::get_if<BlendTrigger>(&din->trigger)) {
      trig["gamma"] = blend->gamma;
      if (embed_triggers) {
        trig["delta"] = vec_json(blend->delta);
      }
    } else if (const auto* patch = std::get_if<PatchTrigger>(&din->trigger)) {
      if (embed_triggers) {
        trig["mask"] = vec_json(patch->mask);
        trig["value"] = vec_json(patch->value);
      }
    }
    meta["trigger"] = std::move(trig);
  } else {
    const auto& d2i = std::get<D2IAttack>(attack.mode);
    meta["mode"] = "d2i";
    meta["pair_count"] = d2i.pairs.size();
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : d2i.pairs) {
      nlohmann::json entry;
      entry["trigger_hash"] = fingerprint(p.trigger.point);
      entry["target_hash"] = fingerprint(p.target);
      if (embed_triggers) {
        entry["trigger_seed"] = p.trigger.seed;
        entry["trigger"] = vec_json(p.trigger.point);
        entry["target"] = vec_json(p.target);
      }
      pairs.push_back(std::move(entry));
    }
    meta["pairs"] = std::move(pairs);
  }
  return meta;
}

}  // namespace flowlab
