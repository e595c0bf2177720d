#pragma once

#include "config.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace flowlab::cli {

enum ExitCode : int { kOk = 0, kError = 1, kBackdoor = 2 };

/// Union of the flags accepted by the subcommands; each command reads the ones it needs.
struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
  std::optional<int> steps;
  std::optional<int> n_euler;
  std::optional<int> trigger_index;
  bool embed_trigger = false;
  std::optional<int> probes;
  std::optional<double> probe_sigma;
  std::optional<double> lambda;

  // sample
  std::string source = "gaussian";  // gaussian | trigger | file
  std::optional<std::string> noise_file;
  int count = 256;
  bool trajectories = false;
  bool svg = false;
  bool pgm = false;

  // eval
  std::optional<std::string> samples_file;
  std::optional<std::string> reference_file;
  std::optional<std::string> experiment_id;
};

int cmd_train(const Options& opt, std::ostream& log);
int cmd_attack(const Options& opt, std::ostream& log);
int cmd_sample(const Options& opt, std::ostream& log);
int cmd_detect(const Options& opt, std::ostream& log);
int cmd_invert(const Options& opt, std::ostream& log);
int cmd_eval(const Options& opt, std::ostream& log);

}  // namespace flowlab::cli
