#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fsad/checkpoint.hpp"
#include "fsad/corpus.hpp"
#include "fsad/features.hpp"
#include "fsad/maml.hpp"
#include "fsad/training.hpp"

namespace fsad {

// Label-free detector: mean squared distance from a text's L2-normalized
// hashed features to its k nearest stored normals.
struct OneClassModel {
  FeatureConfig features;
  std::uint32_t k_nn = 5;
  std::vector<SparseFeatures> references;
};

OneClassModel fit_oneclass(std::span<const std::string> normal_texts, const FeatureConfig& features,
                           std::uint32_t k_nn, std::uint64_t seed, std::size_t cap = 5000);

double score_oneclass(const SparseFeatures& x, const OneClassModel& model);
double score_oneclass(std::string_view text, const OneClassModel& model);

Checkpoint to_checkpoint(const OneClassModel& model);
OneClassModel oneclass_from_checkpoint(const Checkpoint& checkpoint);

struct FineTuneConfig {
  std::uint32_t epochs = 5;
  std::uint32_t batch_size = 32;
  double lr_encoder = 1e-4;
  double lr_head = 1e-3;
};

// Fresh encoder + head trained on one domain's training split with
// anomaly weight n_normal / n_anomaly. The log holds one loss per epoch.
TrainOutcome train_supervised_finetune(std::span<const TextRecord> train, const ModelSpec& model,
                                       const FineTuneConfig& config, std::uint64_t seed);

}  // namespace fsad
