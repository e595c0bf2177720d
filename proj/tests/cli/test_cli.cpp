#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "commands.hpp"
#include "flowlab/checkpoint.hpp"
#include "flowlab/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace flowlab;
using namespace flowlab::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("flowlab_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string write(const std::string& file, const json& j) const {
    std::ofstream(dir / file) << j.dump(2);
    return (dir / file).string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json minimal_1d() {
  return {{"schema_version", 1},
          {"seed", 11},
          {"dataset", {{"name", "mixture"}, {"centers", {{-1.0}, {1.0}}}, {"std", 0.1}}},
          {"train", {{"steps", 150}, {"batch_size", 64}, {"hidden", {16}}}},
          {"sampler", {{"steps", 20}}},
          {"detect", {{"calibration_probes", 50}, {"bandwidth_samples", 100}}},
          {"invert", {{"steps", 100}}},
          {"eval", {{"samples", 200}}}};
}

json ring_with(json attack) {
  json c = {{"schema_version", 1},
            {"seed", 5},
            {"dataset", {{"name", "eight_gaussians"}, {"radius", 2.0}, {"std", 0.1}}},
            {"train", {{"steps", 40}, {"batch_size", 32}, {"hidden", {16}}}},
            {"sampler", {{"steps", 10}}}};
  if (!attack.is_null()) {
    c["attack"] = std::move(attack);
  }
  return c;
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

Options opts(const std::string& config, const fs::path& out) {
  Options o;
  o.config = config;
  o.out = out.string();
  return o;
}

}  // namespace

TEST_CASE("minimal 1-D train writes a checkpoint that reloads bit-exactly") {
  Workspace ws("train");
  const std::string cfg = ws.write("c.json", minimal_1d());
  std::ostringstream log;
  REQUIRE(cmd_train(opts(cfg, ws.dir / "a"), log) == kOk);
  REQUIRE(cmd_train(opts(cfg, ws.dir / "b"), log) == kOk);
  CHECK(slurp(ws.dir / "a/model.json") == slurp(ws.dir / "b/model.json"));
  CHECK(slurp(ws.dir / "a/train_loss.csv") == slurp(ws.dir / "b/train_loss.csv"));

  const Checkpoint c = load_checkpoint(ws.dir / "a/model.json");
  CHECK(c.field.data_dim() == 1);
  save_checkpoint(c, ws.dir / "again.json");
  CHECK(slurp(ws.dir / "again.json") == slurp(ws.dir / "a/model.json"));

  Options other = opts(cfg, ws.dir / "c");
  other.seed = 12;
  cmd_train(other, log);
  CHECK(slurp(ws.dir / "c/model.json") != slurp(ws.dir / "a/model.json"));
}

TEST_CASE("config errors name the offending field") {
  json c = minimal_1d();
  c["dataset"].erase("std");
  CHECK(config_error(c).find("dataset.std") != std::string::npos);

  c = minimal_1d();
  c.erase("dataset");
  CHECK(config_error(c).find("dataset") != std::string::npos);

  c = minimal_1d();
  c.erase("seed");
  CHECK(config_error(c).find("seed") != std::string::npos);

  c = minimal_1d();
  c["train"]["stepz"] = 3;
  CHECK(config_error(c).find("train.stepz: unknown key") != std::string::npos);

  c = minimal_1d();
  c["schema_version"] = 2;
  CHECK(config_error(c).find("schema_version") != std::string::npos);

  c = minimal_1d();
  c["train"]["steps"] = "many";
  CHECK(config_error(c).find("train.steps: wrong type") != std::string::npos);

  c = minimal_1d();
  c["train"]["learning_rate"] = -1.0;
  CHECK(config_error(c).find("train") != std::string::npos);

  c = ring_with({{"mode", "din"}, {"target_label", 8}, {"trigger", {{"kind", "invisible"}, {"seed", 1}}}});
  CHECK(config_error(c).find("attack.target_label") != std::string::npos);

  c = ring_with({{"mode", "d2i"}, {"trigger_seed", 1}, {"targets", {{0.0, 0.0}}}, {"pdt", {{"sigma", 0.2}, {"x", 1}}}});
  CHECK(config_error(c).find("attack.pdt.x") != std::string::npos);

  c = minimal_1d();
  c["train"]["output"] = "score";
  CHECK(config_error(c).find("train.output") != std::string::npos);

  c = minimal_1d();
  c["train"]["output"] = "data";
  c["train"]["kappa"] = 0.0;
  CHECK(config_error(c).find("train.kappa") != std::string::npos);

  CHECK(config_error(minimal_1d()).empty());
}

TEST_CASE("train.output selects the network head") {
  json c = minimal_1d();
  CHECK(parse_config(c).train.output == FieldOutput::velocity);
  c["train"]["output"] = "data";
  c["train"]["kappa"] = 0.2;
  const ExperimentConfig cfg = parse_config(c);
  CHECK(cfg.train.output == FieldOutput::data);
  CHECK(cfg.train.kappa == 0.2);
}

TEST_CASE("attack metadata records pairs, gamma and the PDT scale") {
  Workspace ws("attack");
  std::ostringstream log;
  const std::string base_cfg = ws.write("base.json", ring_with(nullptr));
  REQUIRE(cmd_train(opts(base_cfg, ws.dir / "base"), log) == kOk);
  const std::string base = (ws.dir / "base/model.json").string();

  const json d2i = {{"mode", "d2i"},
                    {"trigger_seed", 100},
                    {"targets", {{0.5, 0.5}}},
                    {"pdt", {{"enabled", true}, {"sigma", 0.4}}},
                    {"train", {{"steps", 10}}}};
  Options o = opts(ws.write("d2i.json", ring_with(d2i)), ws.dir / "d2i");
  o.checkpoint = base;
  REQUIRE(cmd_attack(o, log) == kOk);
  Checkpoint t = load_checkpoint(ws.dir / "d2i/trojan.json");
  CHECK(t.attack["pair_count"] == 1);
  CHECK(t.attack["pdt"]["sigma"] == 0.4);
  CHECK_FALSE(t.attack["pairs"][0].contains("trigger"));
  CHECK(fs::exists(ws.dir / "d2i/attack_loss.csv"));
  CHECK(fs::exists(ws.dir / "d2i/targets.csv"));

  o.embed_trigger = true;
  o.out = (ws.dir / "d2i_embed").string();
  REQUIRE(cmd_attack(o, log) == kOk);
  CHECK(load_checkpoint(ws.dir / "d2i_embed/trojan.json").attack["pairs"][0].contains("trigger"));

  const json din = {{"mode", "din"},
                    {"target_label", 2},
                    {"trigger", {{"kind", "blend"}, {"gamma", 0.6}, {"delta", {1.0, -1.0}}}},
                    {"train", {{"steps", 10}}}};
  o = opts(ws.write("din.json", ring_with(din)), ws.dir / "din");
  o.checkpoint = base;
  REQUIRE(cmd_attack(o, log) == kOk);
  t = load_checkpoint(ws.dir / "din/trojan.json");
  CHECK(t.attack["trigger"]["gamma"] == 0.6);
  CHECK(t.attack["target_label"] == 2);

  // a 1-D checkpoint against a 2-D config
  const std::string one_d = ws.write("one.json", minimal_1d());
  REQUIRE(cmd_train(opts(one_d, ws.dir / "one"), log) == kOk);
  o.checkpoint = (ws.dir / "one/model.json").string();
  CHECK_THROWS_AS(cmd_attack(o, log), ShapeError);
}

TEST_CASE("sample sources and trigger indices") {
  Workspace ws("sample");
  std::ostringstream log;
  const json d2i = {{"mode", "d2i"}, {"trigger_seed", 100}, {"targets", {{0.5, 0.5}, {-0.5, 0.5}}}};
  const std::string cfg = ws.write("c.json", ring_with(d2i));
  REQUIRE(cmd_train(opts(cfg, ws.dir), log) == kOk);
  Options o = opts(cfg, ws.dir / "s");
  o.checkpoint = (ws.dir / "model.json").string();
  o.count = 7;
  o.svg = true;
  o.trajectories = true;
  REQUIRE(cmd_sample(o, log) == kOk);
  const PointSet s = read_points_csv(ws.dir / "s/samples.csv");
  CHECK(s.cols() == 7);
  CHECK(fs::exists(ws.dir / "s/samples.svg"));
  CHECK(fs::exists(ws.dir / "s/trajectories.csv"));

  o.trigger_index = 1;
  o.out = (ws.dir / "t").string();
  REQUIRE(cmd_sample(o, log) == kOk);
  const PointSet t = read_points_csv(ws.dir / "t/samples.csv");
  CHECK((t.col(0) - t.col(6)).norm() < 1e-12);

  o.trigger_index = 2;
  CHECK_THROWS_AS(cmd_sample(o, log), std::out_of_range);

  write_points_csv(ws.dir / "noise.csv", PointSet::Zero(2, 3));
  o.trigger_index.reset();
  o.source = "file";
  o.noise_file = (ws.dir / "noise.csv").string();
  o.out = (ws.dir / "f").string();
  REQUIRE(cmd_sample(o, log) == kOk);
  CHECK(read_points_csv(ws.dir / "f/samples.csv").cols() == 3);
}

TEST_CASE("eval of identical sample files reports zero mmd") {
  Workspace ws("eval");
  std::ostringstream log;
  SeededRng rng(1);
  write_points_csv(ws.dir / "a.csv", gaussian_batch(rng, 1, 300));
  Options o = opts(ws.write("c.json", minimal_1d()), ws.dir);
  o.samples_file = (ws.dir / "a.csv").string();
  o.reference_file = o.samples_file;
  REQUIRE(cmd_eval(o, log) == kOk);
  const json r = json::parse(slurp(ws.dir / "eval.json"));
  CHECK(r["mmd"] == 0.0);
  CHECK(std::abs(r["mmd_biased"].get<double>()) < 1e-12);
  CHECK(fs::exists(ws.dir / "results.csv"));
}

TEST_CASE("benign model: detect exits 0 and inversion stays small") {
  Workspace ws("defend");
  std::ostringstream log;
  const std::string cfg = ws.write("c.json", minimal_1d());
  REQUIRE(cmd_train(opts(cfg, ws.dir), log) == kOk);
  Options o = opts(cfg, ws.dir);
  o.checkpoint = (ws.dir / "model.json").string();
  CHECK(cmd_detect(o, log) == kOk);
  const std::string first = slurp(ws.dir / "detect.json");
  cmd_detect(o, log);
  CHECK(slurp(ws.dir / "detect.json") == first);

  REQUIRE(cmd_invert(o, log) == kOk);
  const json inv = json::parse(slurp(ws.dir / "invert.json"));
  CHECK(inv["mu_norm"].get<double>() < 0.1);

  REQUIRE(cmd_eval(o, log) == kOk);
  const json ev = json::parse(slurp(ws.dir / "eval.json"));
  CHECK(ev["classifier_accuracy"].get<double>() > 0.99);
}

TEST_CASE("output directory precedence") {
  const ExperimentConfig cfg = parse_config(ring_with(nullptr));
  ::unsetenv("FLOWLAB_OUT_DIR");
  CHECK(resolve_output_dir(cfg, std::nullopt) == ".");
  ::setenv("FLOWLAB_OUT_DIR", "/tmp/from_env", 1);
  CHECK(resolve_output_dir(cfg, std::nullopt) == "/tmp/from_env");
  CHECK(resolve_output_dir(cfg, std::string("flag")) == "flag");
  ::unsetenv("FLOWLAB_OUT_DIR");
  json with_dir = ring_with(nullptr);
  with_dir["output_dir"] = "cfgdir";
  CHECK(resolve_output_dir(parse_config(with_dir), std::nullopt) == "cfgdir");
}

TEST_CASE("every shipped config parses") {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(FLOWLAB_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") {
      continue;
    }
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++seen;
  }
  CHECK(seen >= 6);
}
