#pragma once

#include "flowlab/datasets.hpp"
#include "flowlab/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace flowlab {

/// Nearest-center classifier over the known mixture modes. Ties go to the lower index.
class ModeClassifier {
 public:
  explicit ModeClassifier(std::vector<RealVec> centers);

  int classify(const RealVec& x) const;
  std::vector<int> classify(const PointSet& xs) const;
  /// Fraction of labelled points assigned their own label.
  double accuracy(const LabeledPoints& data) const;

  const std::vector<RealVec>& centers() const { return centers_; }

 private:
  std::vector<RealVec> centers_;
};

/// Fraction of samples labelled `target_label`.
double asr(const PointSet& samples, const ModeClassifier& clf, int target_label);

/// Mean over coordinates of the squared difference.
double mse(const RealVec& sample, const RealVec& target);

double rbf_kernel(const RealVec& a, const RealVec& b, double bandwidth);

/// Squared MMD, U-statistic (can be slightly negative).
double mmd_unbiased(const PointSet& a, const PointSet& b, double bandwidth);
/// Squared MMD, V-statistic (diagonals included, never negative up to rounding).
double mmd_biased(const PointSet& a, const PointSet& b, double bandwidth);
/// Reported MMD: the unbiased estimate clamped at zero.
double mmd(const PointSet& a, const PointSet& b, double bandwidth);

/// Median of pairwise Euclidean distances among the first `max_points` columns.
double median_pairwise_distance(const PointSet& points, int max_points = 1000);

struct MetricsReport {
  std::string experiment_id;
  std::uint64_t seed = 0;
  std::optional<double> asr;
  std::optional<double> mse;
  std::optional<double> classifier_accuracy;
  double mmd = 0.0;
  double mmd_raw = 0.0;
  double mmd_biased = 0.0;
  double bandwidth = 0.0;
  int sample_count = 0;
  int reference_count = 0;

  void validate() const;
};

nlohmann::json to_json(const MetricsReport& report);

/// Appends one row to a CSV ledger, writing the header when the file is new.
/// An existing row with the same (experiment_id, seed) is replaced.
void append_results_csv(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace flowlab
