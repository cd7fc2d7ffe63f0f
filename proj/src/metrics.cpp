#include "fuse2d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fuse2d/error.hpp"
#include "text_io.hpp"

namespace fuse2d {

ConfusionMatrix confusion_counts(std::span<const int> pred, std::span<const int> truth, int positive) {
  if (pred.size() != truth.size()) throw std::invalid_argument("prediction and truth lengths differ");
  if (pred.empty()) throw std::invalid_argument("no predictions to evaluate");
  ConfusionMatrix cm;
  cm.positive = positive;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive;
    const bool t = truth[i] == positive;
    if (p && t) ++cm.tp;
    else if (!p && !t) ++cm.tn;
    else if (p) ++cm.fp;
    else ++cm.fn;
  }
  return cm;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den, const char* name, bool quiet) {
  if (den == 0) {
    if (!quiet) std::cerr << "warning: " << name << " has a zero denominator; reporting 0\n";
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm, bool quiet) {
  if (cm.total() == 0) throw std::invalid_argument("confusion matrix is empty");
  ClassificationMetrics m;
  m.precision = ratio(cm.tp, cm.tp + cm.fp, "precision", quiet);
  m.recall = ratio(cm.tp, cm.tp + cm.fn, "recall", quiet);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const int> truth, int positive) {
  if (scores.size() != truth.size()) throw std::invalid_argument("score and truth lengths differ");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  std::uint64_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (truth[idx[k]] == positive) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("AUC needs both classes in the truth labels");
  const double u = rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> truth, int positive) {
  if (scores.size() != truth.size()) throw std::invalid_argument("score and truth lengths differ");
  const std::size_t n = scores.size();
  std::uint64_t n_pos = 0;
  for (int t : truth) n_pos += t == positive ? 1 : 0;
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("ROC needs both classes in the truth labels");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) {
      (truth[idx[j]] == positive ? tp : fp) += 1;
      ++j;
    }
    out.push_back({scores[idx[i]], static_cast<double>(tp) / static_cast<double>(n_pos),
                   static_cast<double>(fp) / static_cast<double>(n_neg)});
    i = j;
  }
  return out;
}

std::string roc_to_csv(std::span<const RocPoint> points) {
  std::string out = "threshold,tpr,fpr\n";
  for (const auto& p : points) {
    if (std::isinf(p.threshold)) out += "inf";
    else detail::append_fixed(out, p.threshold, 8);
    out.push_back(',');
    detail::append_fixed(out, p.tpr, 8);
    out.push_back(',');
    detail::append_fixed(out, p.fpr, 8);
    out.push_back('\n');
  }
  return out;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["auc"] = r.auc;
  j["confusion"] = {{"tp", r.confusion.tp}, {"tn", r.confusion.tn}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}};
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.meta.items()) meta[k] = v;
  meta["positive_class"] = r.confusion.positive;
  j["meta"] = std::move(meta);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.auc = j.at("auc").get<double>();
    const auto& c = j.at("confusion");
    r.confusion.tp = c.at("tp").get<std::uint64_t>();
    r.confusion.tn = c.at("tn").get<std::uint64_t>();
    r.confusion.fp = c.at("fp").get<std::uint64_t>();
    r.confusion.fn = c.at("fn").get<std::uint64_t>();
    r.meta = j.value("meta", nlohmann::json::object());
    if (r.meta.contains("positive_class")) {
      r.confusion.positive = r.meta.at("positive_class").get<int>();
      r.meta.erase("positive_class");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

void write_report(const EvalReport& r, const std::filesystem::path& path) {
  detail::write_file(path, report_to_json(r));
}

EvalReport read_report(const std::filesystem::path& path) { return report_from_json(detail::read_file(path)); }

EvalReport evaluate(std::span<const int> pred, std::span<const double> positive_scores, std::span<const int> truth,
                    int positive) {
  EvalReport r;
  r.confusion = confusion_counts(pred, truth, positive);
  const auto m = classification_metrics(r.confusion);
  r.accuracy = m.accuracy;
  r.precision = m.precision;
  r.recall = m.recall;
  r.f1 = m.f1;

  bool both = false;
  for (int t : truth) both = both || t != truth.front();
  if (both) {
    r.auc = roc_auc(positive_scores, truth, positive);
  } else {
    std::cerr << "warning: evaluation set holds a single class; AUC reported as 0.5\n";
    r.auc = 0.5;
  }

  // Both classes' precision/recall, since single numbers hide the choice of
  // positive class.
  const int negative = 1 - positive;
  const auto other = classification_metrics(confusion_counts(pred, truth, negative), true);
  r.meta["per_class"] = {
      {std::to_string(positive), {{"precision", m.precision}, {"recall", m.recall}}},
      {std::to_string(negative), {{"precision", other.precision}, {"recall", other.recall}}},
  };
  return r;
}

}  // namespace fuse2d
