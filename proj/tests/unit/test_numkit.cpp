#include "doctest.h"

#include "flowlab/adam.hpp"
#include "flowlab/mlp.hpp"
#include "flowlab/rng.hpp"

#include <cmath>
#include <numbers>

using namespace flowlab;

namespace {

// Central differences of <upstream, forward(x, t)> with respect to every parameter and input.
struct FiniteDiff {
  Eigen::VectorXd params;
  RealVec input;
};

double probe(const Mlp& net, const RealVec& x, double t, const RealVec& upstream) {
  return upstream.dot(mlp_forward(net, x, t));
}

FiniteDiff finite_diff(Mlp net, const RealVec& x, double t, const RealVec& upstream, double h) {
  FiniteDiff fd;
  fd.params.resize(net.params().size());
  for (Eigen::Index i = 0; i < net.params().size(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + h;
    const double up = probe(net, x, t, upstream);
    net.params()[i] = keep - h;
    const double down = probe(net, x, t, upstream);
    net.params()[i] = keep;
    fd.params[i] = (up - down) / (2.0 * h);
  }
  fd.input.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    RealVec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    fd.input[i] = (probe(net, xp, t, upstream) - probe(net, xm, t, upstream)) / (2.0 * h);
  }
  return fd;
}

// |a - b| / max(|a|, |b|), with a floor on the scale so entries that are both ~0 compare absolutely.
double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("rng is reproducible and seed dependent") {
  SeededRng a(17), b(17), c(18);
  const RealVec va = gaussian_sample(a, 4);
  CHECK(va == gaussian_sample(b, 4));
  CHECK(va != gaussian_sample(c, 4));
  CHECK(a.draws() == b.draws());
  CHECK_THROWS_AS(gaussian_sample(a, 0), std::invalid_argument);
}

TEST_CASE("rng split streams are independent of the parent position") {
  SeededRng parent(5);
  const SeededRng child = parent.split(3);
  parent.next_u64();
  SeededRng c1 = child;
  SeededRng c2 = SeededRng(5).split(3);
  CHECK(c1.next_u64() == c2.next_u64());
  CHECK(SeededRng(5).split(3).next_u64() != SeededRng(5).split(4).next_u64());
}

TEST_CASE("uniform draws stay in [0, 1)") {
  SeededRng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("gaussian moments over 1e5 draws") {
  SeededRng rng(2024);
  const int dim = 4, n = 100000;
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(dim), sum2 = Eigen::ArrayXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    const Eigen::ArrayXd v = gaussian_sample(rng, dim).array();
    sum += v;
    sum2 += v * v;
  }
  const Eigen::ArrayXd mean = sum / n;
  const Eigen::ArrayXd var = sum2 / n - mean * mean;
  for (int k = 0; k < dim; ++k) {
    CHECK(std::abs(mean[k]) < 0.02);
    CHECK(std::abs(var[k] - 1.0) < 0.05);
  }
}

TEST_CASE("zero network outputs zero") {
  Mlp net(MlpShape{3, 4, {5, 5}});
  const RealVec out = mlp_forward(net, RealVec::Constant(3, 2.5), 0.3);
  CHECK(out.size() == 3);
  CHECK(out.isZero(0.0));
}

TEST_CASE("single linear layer is a matrix product") {
  Mlp net(MlpShape{2, 0, {}});
  net.weight(0) << 1.0, 2.0, 3.0, 4.0;
  net.bias(0) << 0.5, -1.0;
  RealVec x(2);
  x << 1.0, -1.0;
  const RealVec out = mlp_forward(net, x, 0.7);
  CHECK(out[0] == doctest::Approx(-0.5));
  CHECK(out[1] == doctest::Approx(-2.0));

  RealVec up(2);
  up << 1.0, 2.0;
  const MlpGrads g = mlp_backward(net, x, 0.7, up);
  // W^T up = (1 + 6, 2 + 8)
  CHECK(g.input(0, 0) == doctest::Approx(7.0));
  CHECK(g.input(1, 0) == doctest::Approx(10.0));
}

TEST_CASE("time embedding enters as extra inputs") {
  Mlp net(MlpShape{1, 2, {}});
  net.weight(0) << 0.0, 1.0, 1.0;  // sin + cos of (pi/2) t
  const double t = 0.25;
  const double expect = std::sin(std::numbers::pi / 2 * t) + std::cos(std::numbers::pi / 2 * t);
  CHECK(mlp_forward(net, RealVec::Zero(1), t)[0] == doctest::Approx(expect));
}

TEST_CASE("mlp rejects bad shapes and times") {
  SeededRng rng(3);
  Mlp net = Mlp::random(MlpShape{2, 4, {8}}, rng);
  CHECK_THROWS_AS(mlp_forward(net, RealVec::Zero(3), 0.5), ShapeError);
  CHECK_THROWS_AS(mlp_forward(net, RealVec::Zero(2), 1.5), std::invalid_argument);
  CHECK_THROWS_AS(mlp_backward(net, RealVec::Zero(2), 0.5, RealVec::Zero(3)), ShapeError);
  CHECK_THROWS_AS(Mlp(MlpShape{2, 3, {8}}), ShapeError);
}

TEST_CASE("zero upstream gives zero gradients") {
  SeededRng rng(4);
  Mlp net = Mlp::random(MlpShape{2, 4, {16, 16}}, rng);
  const MlpGrads g = mlp_backward(net, gaussian_sample(rng, 2), 0.4, RealVec::Zero(2));
  CHECK(g.params.isZero(0.0));
  CHECK(g.input.isZero(0.0));
}

TEST_CASE("analytic gradients match central differences on 100 random draws") {
  SeededRng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    // every other draw uses the clean-endpoint output head
    const FieldOutput head = trial % 2 ? FieldOutput::data : FieldOutput::velocity;
    Mlp net = Mlp::random(MlpShape{2, 8, {16, 16}, head, 0.1 + 0.5 * rng.uniform()}, rng);
    for (Eigen::Index i = 0; i < net.params().size(); ++i) {
      net.params()[i] += 0.1 * rng.normal();  // non-zero biases too
    }
    const RealVec x = 1.5 * gaussian_sample(rng, 2);
    const double t = rng.uniform();
    const RealVec up = gaussian_sample(rng, 2);
    const MlpGrads g = mlp_backward(net, x, t, up);
    const FiniteDiff fd = finite_diff(net, x, t, up, 1e-5);
    worst = std::max({worst, max_rel_error(g.params, fd.params), max_rel_error(g.input.col(0), fd.input)});
  }
  MESSAGE("max relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("batched forward and backward equal per-column calls") {
  SeededRng rng(7);
  Mlp net = Mlp::random(MlpShape{3, 4, {8, 8}}, rng);
  const PointSet x = gaussian_batch(rng, 3, 5);
  const std::vector<double> t = {0.0, 0.2, 0.5, 0.9, 1.0};
  const PointSet up = gaussian_batch(rng, 3, 5);
  const PointSet out = mlp_forward(net, x, t);
  const MlpGrads g = mlp_backward(net, x, t, up);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(net.params().size());
  for (int c = 0; c < 5; ++c) {
    CHECK((out.col(c) - mlp_forward(net, RealVec(x.col(c)), t[c])).norm() < 1e-12);
    const MlpGrads gc = mlp_backward(net, RealVec(x.col(c)), t[c], RealVec(up.col(c)));
    sum += gc.params;
    CHECK((g.input.col(c) - gc.input.col(0)).norm() < 1e-12);
  }
  CHECK((g.params - sum).norm() < 1e-10 * (1.0 + sum.norm()));
}

TEST_CASE("data output head turns a clean-point prediction into a velocity") {
  // F = b constant, so v = (x - b) / (t + kappa)
  Mlp net(MlpShape{2, 2, {}, FieldOutput::data, 0.25});
  net.bias(0) << 1.0, -1.0;
  RealVec x(2);
  x << 3.0, 0.0;
  const RealVec v = mlp_forward(net, x, 0.75);
  CHECK(v[0] == doctest::Approx(2.0));
  CHECK(v[1] == doctest::Approx(1.0));
  const MlpGrads g = mlp_backward(net, x, 0.75, RealVec::Ones(2));
  CHECK(g.input.col(0) == RealVec::Ones(2));
  CHECK_THROWS_AS(Mlp(MlpShape{2, 2, {}, FieldOutput::data, 0.0}), ShapeError);
}

TEST_CASE("parameter count follows the layer sizes") {
  const MlpShape shape{2, 8, {16, 16}};
  CHECK(shape.layer_sizes() == std::vector<int>{10, 16, 16, 2});
  CHECK(shape.param_count() == 10 * 16 + 16 + 16 * 16 + 16 + 16 * 2 + 2);
  CHECK(Mlp(shape).params().size() == static_cast<Eigen::Index>(shape.param_count()));
}

TEST_CASE("adam leaves params alone for zero gradient or zero learning rate") {
  Eigen::VectorXd p(3);
  p << 1.0, -2.0, 3.0;
  const Eigen::VectorXd start = p;
  AdamState zero_grad(3, AdamConfig{});
  zero_grad.step(p, Eigen::VectorXd::Zero(3));
  CHECK(p == start);

  AdamState zero_lr(3, AdamConfig{0.0});
  zero_lr.step(p, Eigen::VectorXd::Constant(3, 5.0));
  CHECK(p == start);
  CHECK(zero_lr.step_count() == 1);
  CHECK_THROWS_AS(zero_lr.step(p, Eigen::VectorXd::Zero(2)), ShapeError);
}

TEST_CASE("adam matches a scalar reference and moves against a constant gradient") {
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 0.5);
  AdamState state(1, cfg);
  double ref = 0.5, m = 0.0, v = 0.0;
  const double g = 0.3;
  double previous = p[0];
  for (int k = 1; k <= 50; ++k) {
    state.step(p, Eigen::VectorXd::Constant(1, g));
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, k));
    const double vh = v / (1 - std::pow(cfg.beta2, k));
    ref -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-12));
    CHECK(p[0] < previous);
    previous = p[0];
  }
  CHECK(state.step_count() == 50);
}

TEST_CASE("adam_step updates an mlp in place") {
  SeededRng rng(8);
  Mlp net = Mlp::random(MlpShape{2, 2, {4}}, rng);
  const Eigen::VectorXd before = net.params();
  AdamState state(net.params().size(), AdamConfig{0.1});
  const MlpGrads g = mlp_backward(net, gaussian_sample(rng, 2), 0.5, RealVec::Ones(2));
  adam_step(state, net, g);
  CHECK((net.params() - before).norm() > 0.0);
}
