#include "doctest.h"

#include "flowlab/checkpoint.hpp"
#include "flowlab/datasets.hpp"
#include "flowlab/io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace flowlab;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  TempDir dir("flowlab_ckpt_test");
  SeededRng rng(21);
  Checkpoint c;
  c.field = Mlp::random(MlpShape{3, 4, {7, 5}, FieldOutput::data, 0.2}, rng);
  c.field.params() += 1e-3 * gaussian_sample(rng, static_cast<int>(c.field.params().size()));
  c.seed = 99;
  c.training = {{"steps", 10}};
  c.attack = {{"mode", "d2i"}};
  save_checkpoint(c, dir.path / "m.json");
  const Checkpoint back = load_checkpoint(dir.path / "m.json");
  CHECK(back.field.shape() == c.field.shape());
  CHECK(back.field.params() == c.field.params());
  CHECK(back.seed == 99);
  CHECK(back.attack["mode"] == "d2i");
  save_checkpoint(back, dir.path / "m2.json");
  CHECK(slurp(dir.path / "m.json") == slurp(dir.path / "m2.json"));

  Checkpoint benign;
  benign.field = Mlp(MlpShape{2, 2, {4}});
  CHECK_FALSE(checkpoint_to_json(benign).contains("attack"));
  CHECK(checkpoint_from_json(checkpoint_to_json(benign)).attack.is_null());
}

TEST_CASE("checkpoint validation") {
  Checkpoint c;
  c.field = Mlp(MlpShape{2, 2, {4}});
  auto doc = checkpoint_to_json(c);

  auto bad_format = doc;
  bad_format["format"] = "other";
  CHECK_THROWS_AS(checkpoint_from_json(bad_format), std::runtime_error);

  auto bad_version = doc;
  bad_version["version"] = 2;
  CHECK_THROWS_AS(checkpoint_from_json(bad_version), std::runtime_error);

  auto bad_sizes = doc;
  bad_sizes["layer_sizes"] = {2, 5, 2};
  CHECK_THROWS_AS(checkpoint_from_json(bad_sizes), ShapeError);

  auto short_layer = doc;
  short_layer["layers"][0]["bias"].erase(0);
  CHECK_THROWS_AS(checkpoint_from_json(short_layer), ShapeError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/flowlab/model.json"), std::runtime_error);
}

TEST_CASE("points csv round trip") {
  SeededRng rng(22);
  const PointSet p = gaussian_batch(rng, 3, 5);
  std::stringstream ss;
  write_points_csv(ss, p);
  CHECK(ss.str().rfind("x_0,x_1,x_2\n", 0) == 0);
  CHECK(read_points_csv(ss) == p);

  std::stringstream ragged("x_0,x_1\n1,2\n3\n");
  CHECK_THROWS_AS(read_points_csv(ragged), ShapeError);
  std::stringstream empty;
  CHECK_THROWS_AS(read_points_csv(empty), std::runtime_error);
}

TEST_CASE("pgm and svg writers") {
  TempDir dir("flowlab_img_test");
  RealVec img(4);
  img << -1.0, 0.0, 1.0, 5.0;
  write_pgm(dir.path / "a.pgm", img, 2, 2);
  const std::string pgm = slurp(dir.path / "a.pgm");
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 4);
  CHECK(pgm.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(pgm[header.size()]) == 0);
  CHECK(static_cast<unsigned char>(pgm[header.size() + 2]) == 255);
  CHECK(static_cast<unsigned char>(pgm[header.size() + 3]) == 255);

  PointSet tiles = PointSet::Zero(4, 3);
  write_pgm_grid(dir.path / "g.pgm", tiles, 2, 2, 2);
  CHECK(slurp(dir.path / "g.pgm").rfind("P5\n", 0) == 0);
  CHECK_THROWS_AS(write_pgm_grid(dir.path / "g.pgm", tiles, 2, 2, 0), std::invalid_argument);

  write_svg_scatter(dir.path / "s.svg", {PointSet::Zero(2, 3), PointSet::Ones(2, 2)});
  const std::string svg = slurp(dir.path / "s.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK_THROWS_AS(write_svg_scatter(dir.path / "s.svg", {PointSet::Zero(1, 3)}), ShapeError);
}

TEST_CASE("gaussian mixture sampling") {
  const auto ring = eight_gaussians(2.0, 0.0);
  CHECK(ring.num_modes() == 8);
  for (const auto& c : ring.centers()) {
    CHECK(c.norm() == doctest::Approx(2.0));
  }
  SeededRng rng(23);
  const LabeledPoints lp = ring.sample_labeled(rng, 50);
  for (int i = 0; i < 50; ++i) {
    CHECK(lp.points.col(i) == ring.centers()[lp.labels[i]]);
  }
  CHECK(point_mass(RealVec::Ones(3)).sample(rng, 4) == PointSet::Ones(3, 4));
  CHECK_THROWS_AS(GaussianMixture({RealVec::Ones(2)}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture({RealVec::Ones(2)}, 1.0, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(MixtureModeSampler(ring, 8), std::out_of_range);

  const GaussianMixture weighted({RealVec::Zero(1), RealVec::Ones(1)}, 0.0, {0.0, 1.0});
  CHECK(weighted.sample(rng, 20) == PointSet::Ones(1, 20));
}

TEST_CASE("glyph helpers") {
  const auto glyphs = two_tone_glyphs(10, 16, 0.5, 3);
  REQUIRE(glyphs.size() == 10);
  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    CHECK(glyphs[i].cwiseAbs() == RealVec::Constant(16, 0.5));
    for (std::size_t j = 0; j < i; ++j) {
      CHECK(glyphs[i] != glyphs[j]);
    }
  }
  const auto other = two_tone_glyphs(3, 16, 0.5, 3, glyphs);
  for (const auto& g : other) {
    CHECK(std::find(glyphs.begin(), glyphs.end(), g) == glyphs.end());
  }
  CHECK_THROWS_AS(two_tone_glyphs(5, 2, 1.0, 1), std::invalid_argument);

  const auto mix = glyph_mixture(4, 3, 1.0, 0.2, 7);
  CHECK(mix.dim() == 16);
  CHECK(mix.num_modes() == 3);
  CHECK(mix.std_dev() == 0.2);
}
