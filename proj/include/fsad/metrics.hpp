#pragma once

#include <cstddef>
#include <span>

namespace fsad {

struct MetricsReport {
  double auc = 0.0;
  double ap = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Mann-Whitney statistic: fraction of (anomaly, normal) pairs ranked
// correctly, ties credited 0.5. Needs both classes.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Step-wise area under the precision-recall curve; tied scores form a single
// cut. Needs at least one anomaly.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct Confusion {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Predict anomaly iff score >= threshold; 0/0 ratios are 0.
Confusion confusion_at(std::span<const double> scores, std::span<const int> labels,
                       double threshold);

// The distinct score maximizing F1 as a threshold; ties go to the lowest
// such threshold.
double select_threshold_max_f1(std::span<const double> scores, std::span<const int> labels);

// AUC/AP on the test scores plus precision/recall/F1 at a threshold chosen on
// the validation scores.
MetricsReport evaluate_detection(std::span<const double> val_scores, std::span<const int> val_labels,
                                 std::span<const double> test_scores,
                                 std::span<const int> test_labels);

}  // namespace fsad
