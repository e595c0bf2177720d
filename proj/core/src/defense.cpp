#include "flowlab/defense.hpp"

#include "flowlab/adam.hpp"
#include "flowlab/evalkit.hpp"

#include <algorithm>
#include <cmath>

namespace flowlab {

void UfidConfig::validate() const {
  if (probes < 2) {
    throw std::invalid_argument("ufid: need at least two probes");
  }
  if (!(probe_sigma >= 0.0) || !(bandwidth > 0.0) || sampler.steps < 1) {
    throw std::invalid_argument("ufid: probe_sigma >= 0, bandwidth > 0 and sampler steps >= 1 required");
  }
}

Eigen::MatrixXd pairwise_similarity(const PointSet& samples, double bandwidth) {
  const Eigen::Index k = samples.cols();
  Eigen::MatrixXd sim = Eigen::MatrixXd::Identity(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double s = rbf_kernel(samples.col(i), samples.col(j), bandwidth);
      sim(i, j) = s;
      sim(j, i) = s;
    }
  }
  return sim;
}

DetectionReport ufid_detect(const Mlp& field, const RealVec& input_noise, const UfidConfig& cfg, SeededRng& rng,
                            std::string probe_id) {
  cfg.validate();
  require_same_dim(input_noise.size(), field.data_dim(), "ufid_detect");
  const int dim = field.data_dim();
  PointSet noise(dim, cfg.probes);
  for (int k = 0; k < cfg.probes; ++k) {
    noise.col(k) = input_noise + cfg.probe_sigma * gaussian_sample(rng, dim);
  }
  const PointSet outputs = euler_sample_batch(field, noise, cfg.sampler);

  DetectionReport report;
  report.probe_id = std::move(probe_id);
  report.probes = cfg.probes;
  report.probe_sigma = cfg.probe_sigma;
  report.bandwidth = cfg.bandwidth;
  report.similarity = pairwise_similarity(outputs, cfg.bandwidth);
  const double k = cfg.probes;
  report.statistic = (report.similarity.sum() - k) / (k * (k - 1.0));
  report.threshold = cfg.threshold;
  report.backdoor = report.statistic > cfg.threshold;
  return report;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty() || !(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("empirical_quantile: need values and q in [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

UfidCalibration calibrate_ufid(const Mlp& field, const UfidConfig& cfg, int benign_probes, double quantile,
                               int bandwidth_samples, SeededRng& rng) {
  if (benign_probes < 1 || bandwidth_samples < 2) {
    throw std::invalid_argument("calibrate_ufid: need benign probes and at least two bandwidth samples");
  }
  const int dim = field.data_dim();
  UfidCalibration cal;
  const PointSet generated = euler_sample_batch(field, gaussian_batch(rng, dim, bandwidth_samples), cfg.sampler);
  cal.bandwidth = median_pairwise_distance(generated, bandwidth_samples);

  UfidConfig probe_cfg = cfg;
  probe_cfg.bandwidth = cal.bandwidth;
  probe_cfg.validate();
  // All probes are integrated in one batch; per-probe statistics are computed afterwards.
  PointSet noise(dim, static_cast<Eigen::Index>(benign_probes) * cfg.probes);
  for (int p = 0; p < benign_probes; ++p) {
    const RealVec base = gaussian_sample(rng, dim);
    for (int k = 0; k < cfg.probes; ++k) {
      noise.col(static_cast<Eigen::Index>(p) * cfg.probes + k) = base + cfg.probe_sigma * gaussian_sample(rng, dim);
    }
  }
  const PointSet outputs = euler_sample_batch(field, noise, cfg.sampler);
  const double k = cfg.probes;
  for (int p = 0; p < benign_probes; ++p) {
    const Eigen::MatrixXd sim =
        pairwise_similarity(outputs.middleCols(static_cast<Eigen::Index>(p) * cfg.probes, cfg.probes), cal.bandwidth);
    cal.benign_statistics.push_back((sim.sum() - k) / (k * (k - 1.0)));
  }
  cal.threshold = empirical_quantile(cal.benign_statistics, quantile);
  return cal;
}

nlohmann::json to_json(const DetectionReport& r) {
  nlohmann::json j;
  j["probe_id"] = r.probe_id;
  j["probes"] = r.probes;
  j["probe_sigma"] = r.probe_sigma;
  j["bandwidth"] = r.bandwidth;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.similarity.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(r.similarity.cols()));
    for (Eigen::Index c = 0; c < r.similarity.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = r.similarity(i, c);
    }
    rows.push_back(std::move(row));
  }
  j["similarity"] = std::move(rows);
  j["statistic"] = r.statistic;
  j["threshold"] = r.threshold;
  j["verdict"] = r.backdoor ? "backdoor" : "benign";
  return j;
}

void InversionConfig::validate() const {
  if (steps < 0 || batch_size < 1 || !(learning_rate >= 0.0) || !(lambda >= 0.0)) {
    throw std::invalid_argument("inversion: steps >= 0, batch_size >= 1, learning_rate >= 0, lambda >= 0");
  }
  if (!(t_min >= 0.0 && t_min <= t_max && t_max <= 1.0)) {
    throw std::invalid_argument("inversion: need 0 <= t_min <= t_max <= 1");
  }
  if (!(gamma_floor > 0.0 && gamma_floor <= 1.0)) {
    throw std::invalid_argument("inversion: gamma_floor must lie in (0, 1]");
  }
}

InversionDraws draw_inversion_batch(int dim, int count, const InversionConfig& cfg, SeededRng& rng) {
  InversionDraws d;
  d.x0 = gaussian_batch(rng, dim, count);
  d.eps = gaussian_batch(rng, dim, count);
  d.eps_hat = gaussian_batch(rng, dim, count);
  d.t.resize(static_cast<std::size_t>(count));
  for (double& t : d.t) {
    t = rng.uniform(cfg.t_min, cfg.t_max);
  }
  return d;
}

InversionLoss inversion_loss(const Mlp& field, const RealVec& mu, double gamma, const InversionDraws& draws,
                             const InversionConfig& cfg) {
  const int dim = field.data_dim();
  require_same_dim(mu.size(), dim, "inversion_loss");
  require_same_dim(draws.x0.rows(), dim, "inversion_loss");
  const Eigen::Index n = draws.x0.cols();

  // Both branches go through the network as one batch: columns [0, n) are x_t, [n, 2n) are xh_t.
  PointSet inputs(dim, 2 * n);
  std::vector<double> times(static_cast<std::size_t>(2 * n));
  for (Eigen::Index c = 0; c < n; ++c) {
    const double t = draws.t[c];
    inputs.col(c) = draws.x0.col(c) + gamma * t * draws.eps.col(c) + mu;
    inputs.col(n + c) = draws.x0.col(c) + gamma * t * draws.eps_hat.col(c) + mu;
    times[c] = t;
    times[n + c] = t;
  }
  const ForwardPass pass = forward_pass(field, inputs, times);
  // residual = v(x) - (x0 - x)
  PointSet residual = pass.output + inputs;
  residual.leftCols(n) -= draws.x0;
  residual.rightCols(n) -= draws.x0;
  const PointSet diff = residual.leftCols(n) - residual.rightCols(n);

  const double scale = 1.0 / (static_cast<double>(n) * dim);
  InversionLoss out;
  out.mse = diff.squaredNorm() * scale;
  const double norm = mu.norm();
  out.loss = out.mse + (cfg.reward_norm ? -cfg.lambda : cfg.lambda) * norm;

  // d mse / d residual_1 = g, d mse / d residual_2 = -g
  const PointSet g = 2.0 * scale * diff;
  PointSet upstream(dim, 2 * n);
  upstream.leftCols(n) = g;
  upstream.rightCols(n) = -g;
  // d residual / d input = J + I
  const PointSet through = mlp_backward(field, pass, upstream).input + upstream;

  out.grad_mu = through.rowwise().sum();
  if (norm > 0.0) {
    out.grad_mu += (cfg.reward_norm ? -cfg.lambda : cfg.lambda) * mu / norm;
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    out.grad_gamma += draws.t[c] * (through.col(c).dot(draws.eps.col(c)) + through.col(n + c).dot(draws.eps_hat.col(c)));
  }
  return out;
}

double cosine_similarity(const RealVec& a, const RealVec& b) {
  require_same_dim(a.size(), b.size(), "cosine_similarity");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

InversionResult terd_invert(const Mlp& field, int dim, const InversionConfig& cfg, SeededRng& rng,
                            const std::optional<RealVec>& true_mu) {
  cfg.validate();
  require_same_dim(dim, field.data_dim(), "terd_invert");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim + 1);
  theta[dim] = 1.0;
  AdamState adam(dim + 1, AdamConfig{cfg.learning_rate});

  InversionResult result;
  for (int s = 0; s < cfg.steps; ++s) {
    const InversionDraws draws = draw_inversion_batch(dim, cfg.batch_size, cfg, rng);
    const InversionLoss l = inversion_loss(field, theta.head(dim), theta[dim], draws, cfg);
    if (!std::isfinite(l.loss)) {
      throw DivergenceError("trigger inversion diverged at step " + std::to_string(s));
    }
    Eigen::VectorXd grad(dim + 1);
    grad.head(dim) = l.grad_mu;
    grad[dim] = l.grad_gamma;
    adam.step(theta, grad);
    theta[dim] = std::clamp(theta[dim], cfg.gamma_floor, 1.0);
    result.loss_history.push_back(l.loss);
    result.final_loss = l.loss;
    ++result.iterations;
  }
  result.mu = theta.head(dim);
  result.gamma = theta[dim];
  if (true_mu) {
    result.cosine_to_truth = cosine_similarity(result.mu, *true_mu);
  }
  return result;
}

nlohmann::json to_json(const InversionResult& r) {
  nlohmann::json j;
  j["mu"] = std::vector<double>(r.mu.data(), r.mu.data() + r.mu.size());
  j["mu_norm"] = r.mu.norm();
  j["gamma"] = r.gamma;
  j["final_loss"] = r.final_loss;
  j["iterations"] = r.iterations;
  j["cosine_to_truth"] = r.cosine_to_truth ? nlohmann::json(*r.cosine_to_truth) : nlohmann::json();
  return j;
}

}  // namespace flowlab
