#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fsad/corpus.hpp"
#include "fsad/encoder.hpp"
#include "fsad/episodes.hpp"
#include "fsad/training.hpp"

namespace fsad {

struct Prototypes {
  std::vector<double> normal;
  std::vector<double> anomaly;
  std::size_t n_normal = 0;
  std::size_t n_anomaly = 0;
};

// Per-class mean of the embeddings. Both classes must be present.
Prototypes compute_prototypes(std::span<const std::vector<double>> embeddings,
                              std::span<const int> labels);

double squared_distance(std::span<const double> z, std::span<const double> c);

// Mean cross-entropy over the query set of the two-class softmax over
// negative squared distances to the support prototypes (temperature 1).
// grads is zeroed, then receives the exact gradient, which flows through the
// query embeddings and, via the prototype means, through every support
// embedding.
double episode_loss_and_grads(const Episode& episode, const EncoderParams& params,
                              Gradients& grads);

struct ProtoNetConfig {
  std::uint32_t episodes = 2000;
  double lr = 1e-5;
  std::uint32_t normal_cap = 5000;
};

TrainOutcome train_protonet(std::span<const DomainDataset> domains, const ModelSpec& model,
                            const ProtoNetConfig& config, const EpisodeConfig& episodes,
                            std::uint64_t seed);

// Prototypes from a whole training split: every anomaly and at most
// normal_cap normals (uniform subsample when there are more).
Prototypes fit_full_prototypes(std::span<const TextRecord> train, const EncoderParams& params,
                               const FeatureConfig& features, std::uint64_t seed,
                               std::size_t normal_cap = 5000);

// d(z, c_normal) - d(z, c_anomaly); higher is more anomalous and
// sigmoid(score) is the anomaly probability.
double protonet_score(std::span<const double> z, const Prototypes& prototypes);
double score_protonet(std::string_view text, const Prototypes& prototypes,
                      const EncoderParams& params, const FeatureConfig& features);

}  // namespace fsad
