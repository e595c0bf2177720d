#include "commands.hpp"

#include "flowlab/checkpoint.hpp"
#include "flowlab/evalkit.hpp"
#include "flowlab/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace flowlab::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Independent random streams per command, so that e.g. sampling never depends on
// how many draws the attack consumed.
enum Stream : std::uint64_t { kAttackStream = 1, kSampleStream, kDetectStream, kInvertStream, kEvalStream };

struct Setup {
  ExperimentConfig cfg;
  fs::path out;
};

Setup setup(const Options& opt) {
  Setup s{load_config(opt.config), {}};
  ExperimentConfig& cfg = s.cfg;
  if (opt.seed) {
    cfg.seed = *opt.seed;
  }
  cfg.train.seed = cfg.seed;
  if (cfg.attack) {
    cfg.attack->train.seed = cfg.seed;
  }
  if (opt.n_euler) {
    if (*opt.n_euler < 1) {
      throw std::invalid_argument("--n-euler must be >= 1");
    }
    cfg.sampler.steps = *opt.n_euler;
    cfg.detect.ufid.sampler.steps = *opt.n_euler;
  }
  if (opt.probes) {
    cfg.detect.ufid.probes = *opt.probes;
  }
  if (opt.probe_sigma) {
    cfg.detect.ufid.probe_sigma = *opt.probe_sigma;
  }
  if (opt.lambda) {
    cfg.invert.lambda = *opt.lambda;
  }
  s.out = resolve_output_dir(cfg, opt.out);
  fs::create_directories(s.out);
  return s;
}

SeededRng stream(const ExperimentConfig& cfg, Stream which) { return SeededRng(cfg.seed).split(which); }

Checkpoint load_model(const Options& opt, const ExperimentConfig& cfg) {
  if (!opt.checkpoint) {
    throw std::invalid_argument("--checkpoint is required");
  }
  Checkpoint ckpt = load_checkpoint(*opt.checkpoint);
  require_same_dim(ckpt.field.data_dim(), cfg.dataset.mixture->dim(), "checkpoint vs dataset");
  return ckpt;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << j.dump(2) << '\n';
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out.precision(17);
  return out;
}

json train_json(const TrainConfig& t) {
  return {{"steps", t.steps},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"hidden", t.hidden},
          {"time_embed_dim", t.time_embed_dim},
          {"grad_clip", t.grad_clip},
          {"final_lr_fraction", t.final_lr_fraction},
          {"ema_decay", t.ema_decay},
          {"seed", t.seed}};
}

int trigger_count(const AttackSpec& spec) {
  return spec.is_d2i() ? static_cast<int>(std::get<D2IAttack>(spec.mode).pairs.size()) : 1;
}

const AttackConfig& require_attack(const ExperimentConfig& cfg) {
  if (!cfg.attack) {
    throw std::invalid_argument("the config has no attack section");
  }
  return *cfg.attack;
}

void check_trigger_index(const AttackSpec& spec, int index) {
  if (index < 0 || index >= trigger_count(spec)) {
    throw std::out_of_range("unknown trigger index " + std::to_string(index) + " (attack has " +
                            std::to_string(trigger_count(spec)) + ")");
  }
}

/// Noise that activates trigger `index`: the D2I trigger point, or a fresh Din trigger draw.
RealVec trigger_input(const AttackSpec& spec, int index, SeededRng& rng, int dim) {
  check_trigger_index(spec, index);
  if (spec.is_d2i()) {
    return std::get<D2IAttack>(spec.mode).pairs[static_cast<std::size_t>(index)].trigger.point;
  }
  return trojan_noise(std::get<DinAttack>(spec.mode).trigger, gaussian_sample(rng, dim));
}

void write_loss_csv(const fs::path& path, const TrainResult& r, const std::vector<std::string>& parts) {
  std::ofstream out = open_csv(path);
  out << "step,loss,smoothed";
  for (const auto& p : parts) {
    out << ',' << p;
  }
  out << '\n';
  const auto smooth = moving_average(r.loss_history, 0.98);
  for (std::size_t i = 0; i < r.loss_history.size(); ++i) {
    out << i << ',' << r.loss_history[i] << ',' << smooth[i];
    if (i < r.component_history.size()) {
      for (double c : r.component_history[i]) {
        out << ',' << c;
      }
    }
    out << '\n';
  }
}

void dump_attack_artifacts(const fs::path& dir, const AttackSpec& spec, const DatasetSpec& data) {
  const int side = data.image_side;
  if (spec.is_d2i()) {
    const auto& pairs = std::get<D2IAttack>(spec.mode).pairs;
    PointSet triggers(data.mixture->dim(), static_cast<Eigen::Index>(pairs.size()));
    PointSet targets(triggers.rows(), triggers.cols());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      triggers.col(static_cast<Eigen::Index>(i)) = pairs[i].trigger.point;
      targets.col(static_cast<Eigen::Index>(i)) = pairs[i].target;
    }
    write_points_csv(dir / "triggers.csv", triggers);
    write_points_csv(dir / "targets.csv", targets);
    if (side > 0) {
      write_pgm_grid(dir / "targets.pgm", targets, side, side, 10);
    }
    return;
  }
  const RealVec mean = trigger_mean(std::get<DinAttack>(spec.mode).trigger);
  write_points_csv(dir / "trigger_mean.csv", PointSet(mean));
  if (side > 0) {
    write_pgm(dir / "trigger_mean.pgm", mean, side, side);
  }
}

}  // namespace

int cmd_train(const Options& opt, std::ostream& log) {
  Setup s = setup(opt);
  TrainConfig tc = s.cfg.train;
  if (opt.steps) {
    tc.steps = *opt.steps;
  }
  const TrainResult r = train_benign(*s.cfg.dataset.mixture, tc);
  Checkpoint ckpt{r.field, s.cfg.seed, {{"dataset", s.cfg.dataset.params}, {"train", train_json(tc)}}, {}};
  ckpt.training["dataset"]["name"] = s.cfg.dataset.name;
  save_checkpoint(ckpt, s.out / "model.json");
  write_loss_csv(s.out / "train_loss.csv", r, {});
  log << "trained " << tc.steps << " steps, final loss "
      << (r.loss_history.empty() ? 0.0 : r.loss_history.back()) << " -> " << (s.out / "model.json").string() << '\n';
  return kOk;
}

int cmd_attack(const Options& opt, std::ostream& log) {
  Setup s = setup(opt);
  const AttackConfig& attack = require_attack(s.cfg);
  const Checkpoint base = load_model(opt, s.cfg);
  TrainConfig tc = attack.train;
  if (opt.steps) {
    tc.steps = *opt.steps;
  }
  SeededRng rng = stream(s.cfg, kAttackStream);
  const TrainResult r = attack_finetune(base.field, attack.spec, *s.cfg.dataset.mixture, tc, rng);

  Checkpoint ckpt{r.field, s.cfg.seed, base.training, attack_metadata(attack.spec, opt.embed_trigger)};
  ckpt.training["attack_train"] = train_json(tc);
  save_checkpoint(ckpt, s.out / "trojan.json");
  write_loss_csv(s.out / "attack_loss.csv", r, {"benign", "trojan", "pdt"});
  dump_attack_artifacts(s.out, attack.spec, s.cfg.dataset);
  log << "attack fine-tuned " << tc.steps << " steps -> " << (s.out / "trojan.json").string() << '\n';
  return kOk;
}

int cmd_sample(const Options& opt, std::ostream& log) {
  Setup s = setup(opt);
  const Checkpoint ckpt = load_model(opt, s.cfg);
  const int dim = ckpt.field.data_dim();
  SeededRng rng = stream(s.cfg, kSampleStream);

  std::string source = opt.source;
  if (opt.trigger_index && source == "gaussian") {
    source = "trigger";
  }
  PointSet noise;
  if (source == "gaussian") {
    if (opt.count < 1) {
      throw std::invalid_argument("--count must be >= 1");
    }
    noise = gaussian_batch(rng, dim, opt.count);
  } else if (source == "trigger") {
    const AttackSpec& spec = require_attack(s.cfg).spec;
    const int index = opt.trigger_index.value_or(0);
    check_trigger_index(spec, index);
    noise.resize(dim, opt.count);
    for (int i = 0; i < opt.count; ++i) {
      noise.col(i) = trigger_input(spec, index, rng, dim);
    }
  } else if (source == "file") {
    if (!opt.noise_file) {
      throw std::invalid_argument("--source file needs --noise-file");
    }
    noise = read_points_csv(fs::path(*opt.noise_file));
    require_same_dim(noise.rows(), dim, "noise file");
  } else {
    throw std::invalid_argument("unknown noise source '" + source + "' (gaussian, trigger, file)");
  }

  const auto states = euler_trajectories(ckpt.field, noise, s.cfg.sampler);
  const PointSet& samples = states.back();
  write_points_csv(s.out / "samples.csv", samples);
  if (opt.trajectories) {
    std::ofstream out = open_csv(s.out / "trajectories.csv");
    write_trajectory_csv(out, states, s.cfg.sampler);
  }
  if (opt.svg && dim >= 2) {
    write_svg_scatter(s.out / "samples.svg", {noise, samples});
  }
  if (opt.pgm && s.cfg.dataset.image_side > 0) {
    const int side = s.cfg.dataset.image_side;
    write_pgm_grid(s.out / "samples.pgm", samples.leftCols(std::min<Eigen::Index>(samples.cols(), 64)), side, side, 8);
  }
  log << "wrote " << samples.cols() << " samples (" << source << ", N=" << s.cfg.sampler.steps << ") to "
      << (s.out / "samples.csv").string() << '\n';
  return kOk;
}

int cmd_detect(const Options& opt, std::ostream& log) {
  Setup s = setup(opt);
  const Checkpoint ckpt = load_model(opt, s.cfg);
  const int dim = ckpt.field.data_dim();
  SeededRng rng = stream(s.cfg, kDetectStream);
  SeededRng cal_rng = rng.split(0);
  SeededRng probe_rng = rng.split(1);

  UfidConfig ufid = s.cfg.detect.ufid;
  const UfidCalibration cal = calibrate_ufid(ckpt.field, ufid, s.cfg.detect.calibration_probes, s.cfg.detect.quantile,
                                             s.cfg.detect.bandwidth_samples, cal_rng);
  ufid.bandwidth = cal.bandwidth;
  ufid.threshold = cal.threshold;

  RealVec input;
  std::string probe_id;
  if (opt.trigger_index) {
    input = trigger_input(require_attack(s.cfg).spec, *opt.trigger_index, probe_rng, dim);
    probe_id = "trigger:" + std::to_string(*opt.trigger_index);
  } else {
    input = gaussian_sample(probe_rng, dim);
    probe_id = "gaussian";
  }
  const DetectionReport report = ufid_detect(ckpt.field, input, ufid, probe_rng, probe_id);
  json j = to_json(report);
  j["calibration"] = {{"benign_probes", s.cfg.detect.calibration_probes},
                      {"quantile", s.cfg.detect.quantile},
                      {"bandwidth_samples", s.cfg.detect.bandwidth_samples}};
  j["seed"] = s.cfg.seed;
  write_json(s.out / "detect.json", j);
  log << (report.backdoor ? "backdoor" : "benign") << " statistic=" << report.statistic
      << " threshold=" << report.threshold << '\n';
  return report.backdoor ? kBackdoor : kOk;
}

int cmd_invert(const Options& opt, std::ostream& log) {
  Setup s = setup(opt);
  const Checkpoint ckpt = load_model(opt, s.cfg);
  const int dim = ckpt.field.data_dim();
  InversionConfig ic = s.cfg.invert;
  if (opt.steps) {
    ic.steps = *opt.steps;
  }
  std::optional<RealVec> truth;
  if (s.cfg.attack && !s.cfg.attack->spec.is_d2i()) {
    truth = trigger_mean(std::get<DinAttack>(s.cfg.attack->spec.mode).trigger);
  }
  SeededRng rng = stream(s.cfg, kInvertStream);
  const InversionResult r = terd_invert(ckpt.field, dim, ic, rng, truth);
  json j = to_json(r);
  j["mu_norm"] = r.mu.norm();
  j["benign_bound"] = 0.1 * std::sqrt(static_cast<double>(dim));
  j["lambda"] = ic.lambda;
  j["seed"] = s.cfg.seed;
  write_json(s.out / "invert.json", j);
  log << "inverted trigger: |mu|=" << r.mu.norm() << " gamma=" << r.gamma;
  if (r.cosine_to_truth) {
    log << " cosine_to_truth=" << *r.cosine_to_truth;
  }
  log << '\n';
  return kOk;
}

int cmd_eval(const Options& opt, std::ostream& log) {
  Setup s = setup(opt);
  const GaussianMixture& data = *s.cfg.dataset.mixture;
  SeededRng rng = stream(s.cfg, kEvalStream);

  MetricsReport report;
  report.seed = s.cfg.seed;
  report.experiment_id = opt.experiment_id.value_or(fs::path(opt.config).stem().string());
  PointSet samples, reference;
  if (opt.samples_file || opt.reference_file) {
    if (!opt.samples_file || !opt.reference_file) {
      throw std::invalid_argument("--samples and --reference go together");
    }
    samples = read_points_csv(fs::path(*opt.samples_file));
    reference = read_points_csv(fs::path(*opt.reference_file));
  } else {
    const Checkpoint ckpt = load_model(opt, s.cfg);
    const int dim = ckpt.field.data_dim();
    const int n = s.cfg.eval.samples;
    samples = euler_sample_batch(ckpt.field, gaussian_batch(rng, dim, n), s.cfg.sampler);
    reference = data.sample(rng, n);

    const ModeClassifier clf(data.centers());
    report.classifier_accuracy = clf.accuracy(data.sample_labeled(rng, n));
    if (s.cfg.attack) {
      const AttackSpec& spec = s.cfg.attack->spec;
      if (spec.is_d2i()) {
        const auto& pairs = std::get<D2IAttack>(spec.mode).pairs;
        double worst = 0.0;
        for (const auto& p : pairs) {
          worst = std::max(worst, mse(euler_sample(ckpt.field, p.trigger.point, s.cfg.sampler).back(), p.target));
        }
        report.mse = worst;
      } else {
        const auto& din = std::get<DinAttack>(spec.mode);
        PointSet noise(dim, n);
        for (int i = 0; i < n; ++i) {
          noise.col(i) = trojan_noise(din.trigger, gaussian_sample(rng, dim));
        }
        report.asr = asr(euler_sample_batch(ckpt.field, noise, s.cfg.sampler), clf, din.target_label);
      }
    }
  }
  require_same_dim(samples.rows(), reference.rows(), "samples vs reference");
  report.bandwidth = median_pairwise_distance(reference);
  report.mmd_raw = mmd_unbiased(samples, reference, report.bandwidth);
  report.mmd = std::max(0.0, report.mmd_raw);
  report.mmd_biased = mmd_biased(samples, reference, report.bandwidth);
  report.sample_count = static_cast<int>(samples.cols());
  report.reference_count = static_cast<int>(reference.cols());

  write_json(s.out / "eval.json", to_json(report));
  append_results_csv(s.out / "results.csv", report);
  log << "mmd=" << report.mmd << " (raw " << report.mmd_raw << ", h=" << report.bandwidth << ")";
  if (report.asr) {
    log << " asr=" << *report.asr;
  }
  if (report.mse) {
    log << " worst_pair_mse=" << *report.mse;
  }
  log << '\n';
  return kOk;
}

}  // namespace flowlab::cli
