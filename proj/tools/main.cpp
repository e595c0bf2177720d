#include "commands.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>

using namespace flowlab::cli;

int main(int argc, char** argv) {
  CLI::App app{"flowlab: rectified-flow backdoor experiments"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--out", opt.out, "output directory (else $FLOWLAB_OUT_DIR, else config output_dir)");
  };
  auto model = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", opt.checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  };
  auto euler = [&](CLI::App* sub) { sub->add_option("--n-euler", opt.n_euler, "Euler steps N"); };

  auto* train = app.add_subcommand("train", "train a benign model");
  common(train);
  train->add_option("--steps", opt.steps, "override training steps");

  auto* attack = app.add_subcommand("attack", "fine-tune a benign checkpoint with the configured attack");
  common(attack);
  model(attack);
  attack->add_option("--steps", opt.steps, "override fine-tuning steps");
  attack->add_flag("--embed-trigger", opt.embed_trigger, "store raw trigger vectors in the checkpoint");

  auto* sample = app.add_subcommand("sample", "generate samples");
  common(sample);
  model(sample);
  euler(sample);
  sample->add_option("--source", opt.source, "noise source")->check(CLI::IsMember({"gaussian", "trigger", "file"}));
  sample->add_option("--trigger-index", opt.trigger_index, "trigger to sample from (implies --source trigger)");
  sample->add_option("--noise-file", opt.noise_file, "CSV of noise points for --source file");
  sample->add_option("--count", opt.count, "number of samples");
  sample->add_flag("--trajectories", opt.trajectories, "also write every Euler state");
  sample->add_flag("--svg", opt.svg, "write an SVG scatter of noise and samples");
  sample->add_flag("--pgm", opt.pgm, "write a PGM grid (image datasets)");

  auto* detect = app.add_subcommand("detect", "perturbation-similarity backdoor detection (exit 2 = backdoor)");
  common(detect);
  model(detect);
  euler(detect);
  detect->add_option("--trigger-index", opt.trigger_index, "probe this trigger instead of Gaussian noise");
  detect->add_option("--probes", opt.probes, "perturbed copies K");
  detect->add_option("--probe-sigma", opt.probe_sigma, "perturbation scale");

  auto* invert = app.add_subcommand("invert", "trigger inversion");
  common(invert);
  model(invert);
  invert->add_option("--lambda", opt.lambda, "norm weight");
  invert->add_option("--steps", opt.steps, "optimisation steps");

  auto* eval = app.add_subcommand("eval", "metrics for a checkpoint or two sample files");
  common(eval);
  eval->add_option("--checkpoint", opt.checkpoint, "model checkpoint")->check(CLI::ExistingFile);
  euler(eval);
  eval->add_option("--samples", opt.samples_file, "CSV of samples")->check(CLI::ExistingFile);
  eval->add_option("--reference", opt.reference_file, "CSV of reference points")->check(CLI::ExistingFile);
  eval->add_option("--id", opt.experiment_id, "experiment id in the results ledger");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kError;
  }

  const std::vector<std::pair<CLI::App*, std::function<int(const Options&, std::ostream&)>>> table = {
      {train, cmd_train}, {attack, cmd_attack}, {sample, cmd_sample},
      {detect, cmd_detect}, {invert, cmd_invert}, {eval, cmd_eval}};
  try {
    for (const auto& [sub, run] : table) {
      if (sub->parsed()) {
        return run(opt, std::cout);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}
