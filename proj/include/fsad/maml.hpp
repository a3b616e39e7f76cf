#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fsad/checkpoint.hpp"
#include "fsad/corpus.hpp"
#include "fsad/encoder.hpp"
#include "fsad/episodes.hpp"
#include "fsad/training.hpp"

namespace fsad {

struct MamlConfig {
  std::uint32_t inner_steps = 1;
  double alpha_encoder = 5e-5;
  double alpha_head = 5e-4;
  double beta = 1e-5;
  double clip_norm = 5.0;
  std::uint32_t episodes = 3000;

  void validate() const;
};

// Class-weighted binary cross-entropy on the head's anomaly logit:
//   loss = sum_i w_i * BCE(sigmoid(logit_i), y_i) / sum_i w_i
// with w_i = anomaly_weight for anomalies and 1 for normals. grads is zeroed
// and then filled with the exact gradient.
double weighted_bce_loss_and_grads(std::span<const ExampleRef> examples,
                                   const EncoderParams& params, double anomaly_weight,
                                   Gradients& grads);

// n_normal / n_anomaly of the given examples (1 when either class is absent).
double balancing_weight(std::span<const ExampleRef> examples);

// Scratch buffers reused across meta steps. After meta_step, `adapted` holds
// the support-adapted parameters of the last episode.
struct MamlWorkspace {
  explicit MamlWorkspace(const EncoderShape& shape) : adapted(shape), grads(shape) {}

  EncoderParams adapted;
  Gradients grads;
};

struct MetaStepResult {
  double support_loss = 0.0;  // before the first inner step
  double query_loss = 0.0;    // at the adapted parameters
  double query_grad_norm = 0.0;
};

// One first-order MAML update: adapt a copy of params with inner_steps SGD
// steps on the support loss (per-group alpha), take the query loss gradient
// at the adapted point, clip it, and apply it to the original params with
// Adam at rate beta. beta == 0 leaves params and Adam state untouched.
MetaStepResult meta_step(const Episode& episode, EncoderParams& params, AdamState& adam,
                         const MamlConfig& config, MamlWorkspace& workspace);

TrainOutcome train_maml(std::span<const DomainDataset> domains, const ModelSpec& model,
                        const MamlConfig& config, const EpisodeConfig& episodes,
                        std::uint64_t seed);

// Minibatch weighted-BCE training with Adam, shuffled per epoch.
struct ClassifierTraining {
  std::uint32_t epochs = 5;
  std::uint32_t batch_size = 32;
  GroupRates rates{5e-5, 5e-4};
  std::uint64_t seed = 0;
};

// Trains params in place; returns the mean example-weighted loss of each
// epoch (computed on the fly, before each batch's update).
std::vector<double> train_weighted_classifier(EncoderParams& params,
                                              std::span<const ExampleRef> examples,
                                              double anomaly_weight,
                                              const ClassifierTraining& training);

// Fine-tunes a copy of the checkpoint's parameters on a whole target training
// split (anomaly weight n_normal/n_anomaly of the split).
EncoderParams adapt_to_domain(const Checkpoint& checkpoint, std::span<const TextRecord> train,
                              const ClassifierTraining& training);

double classifier_probability(std::string_view text, const EncoderParams& params,
                              const FeatureConfig& features);

// adapt_to_domain followed by sigmoid(head_logit(embed(text))) per text.
std::vector<double> adapt_and_score(const Checkpoint& checkpoint, std::span<const TextRecord> train,
                                    std::span<const std::string> texts,
                                    const ClassifierTraining& training);

}  // namespace fsad
