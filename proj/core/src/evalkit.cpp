#include "flowlab/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace flowlab {

ModeClassifier::ModeClassifier(std::vector<RealVec> centers) : centers_(std::move(centers)) {
  if (centers_.empty()) {
    throw std::invalid_argument("ModeClassifier: need at least one center");
  }
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    require_same_dim(centers_[i].size(), centers_.front().size(), "ModeClassifier");
    for (std::size_t j = 0; j < i; ++j) {
      if (centers_[i] == centers_[j]) {
        throw std::invalid_argument("ModeClassifier: centers must be distinct");
      }
    }
  }
}

int ModeClassifier::classify(const RealVec& x) const {
  require_same_dim(x.size(), centers_.front().size(), "ModeClassifier::classify");
  int best = 0;
  double best_dist = (x - centers_[0]).squaredNorm();
  for (std::size_t k = 1; k < centers_.size(); ++k) {
    const double d = (x - centers_[k]).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

std::vector<int> ModeClassifier::classify(const PointSet& xs) const {
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(xs.cols()));
  for (Eigen::Index c = 0; c < xs.cols(); ++c) {
    labels.push_back(classify(RealVec(xs.col(c))));
  }
  return labels;
}

double ModeClassifier::accuracy(const LabeledPoints& data) const {
  if (data.points.cols() == 0) {
    throw std::invalid_argument("ModeClassifier::accuracy: empty data");
  }
  const auto labels = classify(data.points);
  long hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += labels[i] == data.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double asr(const PointSet& samples, const ModeClassifier& clf, int target_label) {
  if (samples.cols() == 0) {
    throw std::invalid_argument("asr: empty sample list");
  }
  const auto labels = clf.classify(samples);
  const auto hits = std::count(labels.begin(), labels.end(), target_label);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double mse(const RealVec& sample, const RealVec& target) {
  require_same_dim(sample.size(), target.size(), "mse");
  if (sample.size() == 0) {
    throw ShapeError("mse: empty vectors");
  }
  return (sample - target).squaredNorm() / static_cast<double>(sample.size());
}

double rbf_kernel(const RealVec& a, const RealVec& b, double bandwidth) {
  require_same_dim(a.size(), b.size(), "rbf_kernel");
  return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
}

namespace {

struct KernelSums {
  double aa_all = 0.0;  // includes the diagonal
  double aa_diag = 0.0;
  double bb_all = 0.0;
  double bb_diag = 0.0;
  double ab = 0.0;
};

Eigen::MatrixXd kernel_matrix(const PointSet& a, const PointSet& b, double bandwidth) {
  const Eigen::VectorXd na = a.colwise().squaredNorm().transpose();
  const Eigen::VectorXd nb = b.colwise().squaredNorm().transpose();
  Eigen::MatrixXd d2 = -2.0 * (a.transpose() * b);
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  return d2.unaryExpr([scale](double v) { return std::exp(scale * std::max(v, 0.0)); });
}

// Order the pair canonically so swapping the arguments cannot change any rounding.
bool canonical_less(const PointSet& a, const PointSet& b) {
  if (a.cols() != b.cols()) {
    return a.cols() < b.cols();
  }
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

KernelSums kernel_sums(const PointSet& a_in, const PointSet& b_in, double bandwidth) {
  if (a_in.cols() == 0 || b_in.cols() == 0) {
    throw std::invalid_argument("mmd: both sample sets must be non-empty");
  }
  require_same_dim(a_in.rows(), b_in.rows(), "mmd");
  if (!(bandwidth > 0.0)) {
    throw std::invalid_argument("mmd: bandwidth must be positive");
  }
  const bool swap = canonical_less(b_in, a_in);
  const PointSet& a = swap ? b_in : a_in;
  const PointSet& b = swap ? a_in : b_in;
  KernelSums s;
  const Eigen::MatrixXd kaa = kernel_matrix(a, a, bandwidth);
  const Eigen::MatrixXd kbb = kernel_matrix(b, b, bandwidth);
  s.aa_all = kaa.sum();
  s.aa_diag = kaa.diagonal().sum();
  s.bb_all = kbb.sum();
  s.bb_diag = kbb.diagonal().sum();
  s.ab = kernel_matrix(a, b, bandwidth).sum();
  if (swap) {
    std::swap(s.aa_all, s.bb_all);
    std::swap(s.aa_diag, s.bb_diag);
  }
  return s;
}

}  // namespace

double mmd_unbiased(const PointSet& a, const PointSet& b, double bandwidth) {
  const KernelSums s = kernel_sums(a, b, bandwidth);
  const double m = static_cast<double>(a.cols());
  const double n = static_cast<double>(b.cols());
  if (m < 2 || n < 2) {
    throw std::invalid_argument("mmd_unbiased: need at least two points per set");
  }
  const double taa = (s.aa_all - s.aa_diag) / (m * (m - 1.0));
  const double tbb = (s.bb_all - s.bb_diag) / (n * (n - 1.0));
  return (taa + tbb) - 2.0 * s.ab / (m * n);
}

double mmd_biased(const PointSet& a, const PointSet& b, double bandwidth) {
  const KernelSums s = kernel_sums(a, b, bandwidth);
  const double m = static_cast<double>(a.cols());
  const double n = static_cast<double>(b.cols());
  return (s.aa_all / (m * m) + s.bb_all / (n * n)) - 2.0 * s.ab / (m * n);
}

double mmd(const PointSet& a, const PointSet& b, double bandwidth) {
  return std::max(0.0, mmd_unbiased(a, b, bandwidth));
}

double median_pairwise_distance(const PointSet& points, int max_points) {
  const Eigen::Index n = std::min<Eigen::Index>(points.cols(), max_points);
  if (n < 2) {
    throw std::invalid_argument("median_pairwise_distance: need at least two points");
  }
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      dists.push_back((points.col(i) - points.col(j)).norm());
    }
  }
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

void MetricsReport::validate() const {
  if (sample_count <= 0 || reference_count < 0) {
    throw std::invalid_argument("MetricsReport: sample counts must be positive");
  }
  auto finite = [](const std::optional<double>& v) { return !v || std::isfinite(*v); };
  if (!finite(asr) || !finite(mse) || !finite(classifier_accuracy) || !std::isfinite(mmd) ||
      !std::isfinite(mmd_raw) || !std::isfinite(mmd_biased)) {
    throw std::invalid_argument("MetricsReport: non-finite metric");
  }
  if (asr && (*asr < 0.0 || *asr > 1.0)) {
    throw std::invalid_argument("MetricsReport: asr outside [0, 1]");
  }
}

nlohmann::json to_json(const MetricsReport& r) {
  r.validate();
  nlohmann::json j;
  j["experiment_id"] = r.experiment_id;
  j["seed"] = r.seed;
  j["asr"] = r.asr ? nlohmann::json(*r.asr) : nlohmann::json();
  j["mse"] = r.mse ? nlohmann::json(*r.mse) : nlohmann::json();
  j["classifier_accuracy"] = r.classifier_accuracy ? nlohmann::json(*r.classifier_accuracy) : nlohmann::json();
  j["mmd"] = r.mmd;
  j["mmd_raw"] = r.mmd_raw;
  j["mmd_biased"] = r.mmd_biased;
  j["bandwidth"] = r.bandwidth;
  j["sample_count"] = r.sample_count;
  j["reference_count"] = r.reference_count;
  return j;
}

namespace {

constexpr const char* kLedgerHeader =
    "experiment_id,seed,asr,mse,classifier_accuracy,mmd,mmd_raw,mmd_biased,bandwidth,sample_count,reference_count";

std::string ledger_row(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(17);
  auto opt = [&](const std::optional<double>& v) {
    if (v) {
      os << *v;
    }
  };
  os << r.experiment_id << ',' << r.seed << ',';
  opt(r.asr);
  os << ',';
  opt(r.mse);
  os << ',';
  opt(r.classifier_accuracy);
  os << ',' << r.mmd << ',' << r.mmd_raw << ',' << r.mmd_biased << ',' << r.bandwidth << ',' << r.sample_count
     << ',' << r.reference_count;
  return os.str();
}

}  // namespace

void append_results_csv(const std::filesystem::path& path, const MetricsReport& report) {
  report.validate();
  if (report.experiment_id.find(',') != std::string::npos) {
    throw std::invalid_argument("append_results_csv: experiment id may not contain commas");
  }
  std::vector<std::string> rows;
  const std::string key = report.experiment_id + ',' + std::to_string(report.seed) + ',';
  if (std::ifstream in(path); in) {
    std::string line;
    std::getline(in, line);
    if (line != kLedgerHeader) {
      throw std::runtime_error("append_results_csv: " + path.string() + " is not a results ledger");
    }
    while (std::getline(in, line)) {
      if (!line.empty() && line.rfind(key, 0) != 0) {
        rows.push_back(line);
      }
    }
  }
  rows.push_back(ledger_row(report));
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("append_results_csv: cannot write " + path.string());
  }
  out << kLedgerHeader << '\n';
  for (const auto& row : rows) {
    out << row << '\n';
  }
}

}  // namespace flowlab
