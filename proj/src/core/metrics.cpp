#include "fsad/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "fsad/corpus.hpp"
#include "fsad/error.hpp"

namespace fsad {

namespace {

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kInvalidArgument, "scores and labels differ in length");
  }
}

std::pair<std::size_t, std::size_t> class_totals(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += y == kAnomaly ? 1 : 0;
  return {pos, labels.size() - pos};
}

// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  const auto [n_pos, n_neg] = class_totals(labels);
  if (n_pos == 0 || n_neg == 0) {
    fail(ErrorCode::kData, "ROC-AUC is undefined without both anomalies and normals");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Count, in integer halves, the pairs won by positives: for each tie group,
  // positives beat every negative below the group and split the tied ones.
  std::uint64_t twice_wins = 0;
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos = 0;
    std::size_t neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == kAnomaly ? pos : neg) += 1;
      ++j;
    }
    twice_wins += 2 * static_cast<std::uint64_t>(pos) * negatives_below +
                  static_cast<std::uint64_t>(pos) * neg;
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  const auto [n_pos, n_neg] = class_totals(labels);
  (void)n_neg;
  if (n_pos == 0) fail(ErrorCode::kData, "average precision is undefined without anomalies");

  const auto order = descending(scores);
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t prev_tp = 0;
  double ap = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]] == kAnomaly ? 1 : 0;
      ++j;
    }
    seen = j;
    if (tp != prev_tp) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += static_cast<double>(tp - prev_tp) / static_cast<double>(n_pos) * precision;
      prev_tp = tp;
    }
    i = j;
  }
  return ap;
}

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold) {
  check_sizes(scores, labels);
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == kAnomaly;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
  }
  Confusion c;
  c.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  c.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  c.f1 = f1_from_counts(tp, fp, fn);
  return c;
}

double select_threshold_max_f1(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  const auto [n_pos, n_neg] = class_totals(labels);
  if (n_pos == 0 || n_neg == 0) {
    fail(ErrorCode::kData, "threshold selection needs both anomalies and normals");
  }
  // Sweep the distinct scores from high to low: predicting every score of the
  // current group and above. >= keeps moving to lower thresholds on ties.
  const auto order = descending(scores);
  std::size_t tp = 0;
  std::size_t fp = 0;
  double best_f1 = -1.0;
  double best_threshold = scores[order.front()];
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == kAnomaly ? tp : fp) += 1;
      ++j;
    }
    const double f1 = f1_from_counts(tp, fp, n_pos - tp);
    if (f1 >= best_f1) {
      best_f1 = f1;
      best_threshold = scores[order[i]];
    }
    i = j;
  }
  return best_threshold;
}

MetricsReport evaluate_detection(std::span<const double> val_scores, std::span<const int> val_labels,
                                 std::span<const double> test_scores,
                                 std::span<const int> test_labels) {
  MetricsReport r;
  const auto [n_pos, n_neg] = class_totals(test_labels);
  r.n_pos = n_pos;
  r.n_neg = n_neg;
  r.auc = roc_auc(test_scores, test_labels);
  r.ap = average_precision(test_scores, test_labels);
  r.threshold = select_threshold_max_f1(val_scores, val_labels);
  const Confusion c = confusion_at(test_scores, test_labels, r.threshold);
  r.precision = c.precision;
  r.recall = c.recall;
  r.f1 = c.f1;
  return r;
}

}  // namespace fsad
