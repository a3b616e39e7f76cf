#include "fsad/detector.hpp"

#include "fsad/error.hpp"

namespace fsad {

Detector Detector::fit(const Checkpoint& checkpoint, std::span<const TextRecord> labeled,
                       const DetectorFitOptions& options) {
  Detector d;
  d.method_ = checkpoint.method;
  d.features_ = checkpoint.features;
  switch (checkpoint.method) {
    case Method::kPrototypical:
      d.params_ = checkpoint.params;
      d.prototypes_ = fit_full_prototypes(labeled, d.params_, d.features_, options.seed,
                                          options.normal_cap);
      break;
    case Method::kMaml: {
      ClassifierTraining adapt = options.adapt;
      adapt.seed = options.seed;
      d.params_ = adapt_to_domain(checkpoint, labeled, adapt);
      break;
    }
    case Method::kOneClass:
      d.oneclass_ = oneclass_from_checkpoint(checkpoint);
      break;
    case Method::kFineTune:
      d.params_ = checkpoint.params;
      break;
  }
  return d;
}

Detector Detector::unadapted(const Checkpoint& checkpoint, Prototypes prototypes) {
  Detector d;
  d.method_ = checkpoint.method;
  d.features_ = checkpoint.features;
  if (checkpoint.method == Method::kOneClass) {
    d.oneclass_ = oneclass_from_checkpoint(checkpoint);
  } else {
    d.params_ = checkpoint.params;
  }
  if (checkpoint.method == Method::kPrototypical) {
    if (prototypes.normal.empty() || prototypes.anomaly.empty()) {
      fail(ErrorCode::kInvalidArgument, "prototypical scoring needs prototypes");
    }
    d.prototypes_ = std::move(prototypes);
  }
  return d;
}

double Detector::score(std::string_view text) const {
  switch (method_) {
    case Method::kPrototypical:
      return score_protonet(text, prototypes_, params_, features_);
    case Method::kMaml:
    case Method::kFineTune:
      return classifier_probability(text, params_, features_);
    case Method::kOneClass:
      return score_oneclass(text, oneclass_);
  }
  fail(ErrorCode::kInternal, "unknown method");
}

std::vector<double> Detector::score(std::span<const TextRecord> records) const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(score(r.text));
  return out;
}

std::vector<int> labels_of(std::span<const TextRecord> records) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

MetricsReport evaluate_on_domain(const Detector& detector, const DomainDataset& dataset) {
  for (const auto* split : {&dataset.val, &dataset.test}) {
    const ClassCounts c = count_classes(*split);
    if (c.normal == 0 || c.anomaly == 0) {
      fail(ErrorCode::kData, "domain '" + dataset.domain + "': " +
                                 (split == &dataset.val ? "val" : "test") +
                                 " split has a single class, metrics are undefined");
    }
  }
  const auto val_scores = detector.score(dataset.val);
  const auto test_scores = detector.score(dataset.test);
  return evaluate_detection(val_scores, labels_of(dataset.val), test_scores,
                            labels_of(dataset.test));
}

}  // namespace fsad
