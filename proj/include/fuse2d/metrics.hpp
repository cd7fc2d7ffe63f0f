#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fuse2d {

/// Binary confusion counts relative to `positive` (a class index; 0 is
/// NoStress, the default positive class).
struct ConfusionMatrix {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  int positive = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_counts(std::span<const int> pred, std::span<const int> truth, int positive = 0);

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// Zero denominators yield 0 (and a warning on stderr unless `quiet`).
ClassificationMetrics classification_metrics(const ConfusionMatrix& cm, bool quiet = false);

/// Mann-Whitney AUC of positive-class scores; ties count 1/2.
double roc_auc(std::span<const double> scores, std::span<const int> truth, int positive = 0);

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

/// One point per distinct score (descending), plus the (0,0) start.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> truth, int positive = 0);
std::string roc_to_csv(std::span<const RocPoint> points);

struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  ConfusionMatrix confusion;
  // Run metadata: model id, dataset id, arrangements, seed, per-class
  // precision/recall.
  nlohmann::json meta = nlohmann::json::object();

  bool operator==(const EvalReport&) const = default;
};

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(std::string_view text);
void write_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

/// Builds a report from predictions and positive-class scores.
EvalReport evaluate(std::span<const int> pred, std::span<const double> positive_scores, std::span<const int> truth,
                    int positive = 0);

}  // namespace fuse2d
