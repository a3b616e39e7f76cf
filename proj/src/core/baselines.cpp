#include "fsad/baselines.hpp"

#include <algorithm>

#include "fsad/error.hpp"
#include "fsad/rng.hpp"

namespace fsad {

OneClassModel fit_oneclass(std::span<const std::string> normal_texts, const FeatureConfig& features,
                           std::uint32_t k_nn, std::uint64_t seed, std::size_t cap) {
  if (k_nn == 0) fail(ErrorCode::kConfig, "oneclass: k_nn must be >= 1");
  if (normal_texts.size() < k_nn) {
    fail(ErrorCode::kData, "oneclass: need at least k_nn = " + std::to_string(k_nn) +
                               " normal examples, got " + std::to_string(normal_texts.size()));
  }
  std::vector<std::size_t> chosen(normal_texts.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (cap > 0 && chosen.size() > cap) {
    Rng rng(seed);
    chosen = rng.sample_indices(normal_texts.size(), cap);
    std::sort(chosen.begin(), chosen.end());
  }

  OneClassModel model;
  model.features = features;
  model.k_nn = k_nn;
  model.references.reserve(chosen.size());
  for (std::size_t i : chosen) {
    SparseFeatures x = featurize(normal_texts[i], features);
    l2_normalize(x);
    model.references.push_back(std::move(x));
  }
  return model;
}

double score_oneclass(const SparseFeatures& x, const OneClassModel& model) {
  if (model.references.size() < model.k_nn || model.k_nn == 0) {
    fail(ErrorCode::kInvalidArgument, "oneclass model is not fitted");
  }
  std::vector<double> d;
  d.reserve(model.references.size());
  for (const auto& r : model.references) d.push_back(squared_distance(x, r));
  const auto k = static_cast<std::ptrdiff_t>(model.k_nn);
  std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
  std::sort(d.begin(), d.begin() + k);
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < k; ++i) s += d[static_cast<std::size_t>(i)];
  return s / static_cast<double>(k);
}

double score_oneclass(std::string_view text, const OneClassModel& model) {
  SparseFeatures x = featurize(text, model.features);
  l2_normalize(x);
  return score_oneclass(x, model);
}

Checkpoint to_checkpoint(const OneClassModel& model) {
  Checkpoint c;
  c.method = Method::kOneClass;
  c.features = model.features;
  c.oneclass.k_nn = model.k_nn;
  c.oneclass.references = model.references;
  return c;
}

OneClassModel oneclass_from_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.method != Method::kOneClass) {
    fail(ErrorCode::kInvalidArgument, "checkpoint does not hold a one-class model");
  }
  return {checkpoint.features, checkpoint.oneclass.k_nn, checkpoint.oneclass.references};
}

TrainOutcome train_supervised_finetune(std::span<const TextRecord> train, const ModelSpec& model,
                                       const FineTuneConfig& config, std::uint64_t seed) {
  const ClassCounts counts = count_classes(train);
  if (counts.normal == 0 || counts.anomaly == 0) {
    fail(ErrorCode::kData, "supervised fine-tuning needs both classes in the training split");
  }
  TrainOutcome out;
  out.checkpoint.method = Method::kFineTune;
  out.checkpoint.features = model.features;
  out.checkpoint.seed = seed;
  out.checkpoint.params = init_params(model.shape(true), mix_seed(seed, 31));

  const auto features = featurize_all(train, model.features);
  const auto refs = make_refs(train, features);
  ClassifierTraining training;
  training.epochs = config.epochs;
  training.batch_size = config.batch_size;
  training.rates = {config.lr_encoder, config.lr_head};
  training.seed = mix_seed(seed, 32);
  out.log.losses = train_weighted_classifier(out.checkpoint.params, refs,
                                             balancing_weight(refs), training);
  out.log.cross_domain.assign(out.log.losses.size(), 0);
  return out;
}

}  // namespace fsad
