#include "doctest.h"

#include "flowlab/datasets.hpp"
#include "flowlab/defense.hpp"
#include "flowlab/evalkit.hpp"

#include <cmath>

using namespace flowlab;

TEST_CASE("pairwise similarity is symmetric with a unit diagonal") {
  SeededRng rng(11);
  const PointSet s = gaussian_batch(rng, 3, 6);
  const Eigen::MatrixXd m = pairwise_similarity(s, 0.8);
  CHECK(m == m.transpose());
  CHECK(m.diagonal() == Eigen::VectorXd::Ones(6));
  CHECK(m(1, 4) == doctest::Approx(std::exp(-(s.col(1) - s.col(4)).squaredNorm() / (2 * 0.64))));
}

TEST_CASE("ufid statistic is the mean off-diagonal similarity") {
  SeededRng rng(12);
  const Mlp zero(MlpShape{2, 4, {8}});
  UfidConfig cfg;
  cfg.probes = 5;
  cfg.threshold = 0.5;
  const DetectionReport r = ufid_detect(zero, RealVec::Zero(2), cfg, rng, "p");
  double off = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      off += i == j ? 0.0 : r.similarity(i, j);
    }
  }
  CHECK(r.statistic == doctest::Approx(off / 20.0));
  CHECK(r.backdoor == (r.statistic > 0.5));
  CHECK(to_json(r)["probe_id"] == "p");

  cfg.probes = 1;
  CHECK_THROWS_AS(ufid_detect(zero, RealVec::Zero(2), cfg, rng), std::invalid_argument);
}

TEST_CASE("ufid on the identity map matches the gaussian closed form") {
  // With v = 0 the sampler returns its input, so pair differences are N(0, 2 sigma^2 I)
  // and E exp(-||d||^2 / 2h^2) = (1 + 2 sigma^2 / h^2)^(-dim / 2).
  const Mlp zero(MlpShape{2, 4, {8}});
  UfidConfig cfg;
  cfg.probes = 8;
  cfg.probe_sigma = 0.1;
  cfg.bandwidth = 0.1;
  cfg.sampler.steps = 2;
  SeededRng rng(13);
  double mean = 0.0;
  const int reps = 2000;
  for (int i = 0; i < reps; ++i) {
    mean += ufid_detect(zero, gaussian_sample(rng, 2), cfg, rng).statistic / reps;
  }
  CHECK(mean == doctest::Approx(1.0 / 3.0).epsilon(0.03));

  cfg.probe_sigma = 0.0;
  CHECK(ufid_detect(zero, RealVec::Ones(2), cfg, rng).statistic == 1.0);
}

TEST_CASE("empirical quantile interpolates") {
  CHECK(empirical_quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(empirical_quantile({0.0, 10.0}, 0.25) == 2.5);
  CHECK(empirical_quantile({4.0}, 0.99) == 4.0);
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(empirical_quantile({1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("benign ring model stays below its calibrated threshold") {
  TrainConfig tc;
  tc.steps = 800;
  tc.hidden = {32, 32};
  tc.learning_rate = 3e-3;
  tc.seed = 4;
  const auto ring = eight_gaussians(2.0, 0.1);
  const Mlp field = train_benign(ring, tc).field;
  UfidConfig cfg;
  cfg.sampler.steps = 20;
  SeededRng rng(14);
  const UfidCalibration cal = calibrate_ufid(field, cfg, 100, 0.99, 200, rng);
  CHECK(cal.bandwidth > 0.0);
  CHECK(cal.benign_statistics.size() == 100);
  cfg.bandwidth = cal.bandwidth;
  cfg.threshold = cal.threshold;
  int flagged = 0;
  for (int i = 0; i < 50; ++i) {
    flagged += ufid_detect(field, gaussian_sample(rng, 2), cfg, rng).backdoor;
  }
  CHECK(flagged <= 5);
}

TEST_CASE("inversion with zero steps returns the starting point") {
  SeededRng rng(15);
  const Mlp net = Mlp::random(MlpShape{3, 4, {8}}, rng);
  InversionConfig cfg;
  cfg.steps = 0;
  const InversionResult r = terd_invert(net, 3, cfg, rng);
  CHECK(r.mu == RealVec::Zero(3));
  CHECK(r.gamma == 1.0);
  CHECK(r.iterations == 0);
  cfg.t_min = 1.5;
  CHECK_THROWS_AS(terd_invert(net, 3, cfg, rng), std::invalid_argument);
}

TEST_CASE("inversion gradient matches finite differences") {
  SeededRng rng(16);
  const Mlp net = Mlp::random(MlpShape{3, 4, {16, 16}}, rng);
  for (bool reward : {false, true}) {
    InversionConfig cfg;
    cfg.reward_norm = reward;
    cfg.t_min = 0.3;
    const InversionDraws draws = draw_inversion_batch(3, 7, cfg, rng);
    const RealVec mu = gaussian_sample(rng, 3);
    const double gamma = 0.7;
    const InversionLoss l = inversion_loss(net, mu, gamma, draws, cfg);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      RealVec up = mu, dn = mu;
      up[i] += h;
      dn[i] -= h;
      const double fd = (inversion_loss(net, up, gamma, draws, cfg).loss - inversion_loss(net, dn, gamma, draws, cfg).loss) / (2 * h);
      CHECK(l.grad_mu[i] == doctest::Approx(fd).epsilon(1e-5));
    }
    const double fd_gamma =
        (inversion_loss(net, mu, gamma + h, draws, cfg).loss - inversion_loss(net, mu, gamma - h, draws, cfg).loss) / (2 * h);
    CHECK(l.grad_gamma == doctest::Approx(fd_gamma).epsilon(1e-5));
  }
}

TEST_CASE("inversion is deterministic") {
  SeededRng init(17);
  const Mlp net = Mlp::random(MlpShape{4, 4, {8}}, init);
  InversionConfig cfg;
  cfg.steps = 30;
  SeededRng a(18), b(18);
  const InversionResult ra = terd_invert(net, 4, cfg, a, RealVec::Ones(4));
  const InversionResult rb = terd_invert(net, 4, cfg, b, RealVec::Ones(4));
  CHECK(ra.mu == rb.mu);
  CHECK(ra.loss_history == rb.loss_history);
  CHECK(ra.cosine_to_truth.has_value());
  CHECK(to_json(ra)["iterations"] == 30);
}

TEST_CASE("cosine similarity edge cases") {
  CHECK(cosine_similarity(RealVec::Zero(2), RealVec::Ones(2)) == 0.0);
  CHECK(cosine_similarity(RealVec::Ones(2), 3.0 * RealVec::Ones(2)) == doctest::Approx(1.0));
  CHECK(cosine_similarity(RealVec::Ones(2), -RealVec::Ones(2)) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine_similarity(RealVec::Ones(2), RealVec::Ones(3)), ShapeError);
}

TEST_CASE("inversion on a benign model finds no large trigger") {
  TrainConfig tc;
  tc.steps = 600;
  tc.hidden = {32, 32};
  tc.learning_rate = 3e-3;
  tc.seed = 5;
  const Mlp field = train_benign(eight_gaussians(2.0, 0.1), tc).field;
  InversionConfig cfg;
  cfg.steps = 200;
  SeededRng rng(19);
  const InversionResult r = terd_invert(field, 2, cfg, rng);
  CHECK(r.mu.norm() < 0.1 * std::sqrt(2.0));
}
