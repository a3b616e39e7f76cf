#include "fsad/maml.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsad/error.hpp"
#include "fsad/rng.hpp"

namespace fsad {

void MamlConfig::validate() const {
  if (inner_steps == 0) fail(ErrorCode::kConfig, "maml: inner_steps must be >= 1");
  if (alpha_encoder < 0.0 || alpha_head < 0.0 || beta < 0.0) {
    fail(ErrorCode::kConfig, "maml: learning rates must be non-negative");
  }
  if (!(clip_norm > 0.0)) fail(ErrorCode::kConfig, "maml: clip_norm must be > 0");
}

double weighted_bce_loss_and_grads(std::span<const ExampleRef> examples,
                                   const EncoderParams& params, double anomaly_weight,
                                   Gradients& grads) {
  if (examples.empty()) fail(ErrorCode::kData, "weighted BCE needs at least one example");
  if (!(anomaly_weight > 0.0)) fail(ErrorCode::kInvalidArgument, "anomaly weight must be > 0");
  grads.zero();

  double total_weight = 0.0;
  for (const auto& ex : examples) total_weight += ex.label == kAnomaly ? anomaly_weight : 1.0;

  ForwardCache cache;
  std::vector<double> dz(params.shape().embed_dim);
  double loss = 0.0;
  for (const auto& ex : examples) {
    embed(*ex.features, params, cache);
    const double logit = head_logit(cache.z, params);
    const bool anomalous = ex.label == kAnomaly;
    const double w = (anomalous ? anomaly_weight : 1.0) / total_weight;
    loss += w * (anomalous ? softplus(-logit) : softplus(logit));
    const double dlogit = w * (sigmoid(logit) - (anomalous ? 1.0 : 0.0));
    backward_head(cache.z, dlogit, params, grads, dz);
    backward_embed(*ex.features, params, cache, dz, grads);
  }
  if (!std::isfinite(loss)) fail(ErrorCode::kNumeric, "weighted BCE loss is not finite");
  return loss;
}

double balancing_weight(std::span<const ExampleRef> examples) {
  double normals = 0.0;
  double anomalies = 0.0;
  for (const auto& ex : examples) (ex.label == kAnomaly ? anomalies : normals) += 1.0;
  if (normals == 0.0 || anomalies == 0.0) return 1.0;
  return normals / anomalies;
}

MetaStepResult meta_step(const Episode& episode, EncoderParams& params, AdamState& adam,
                         const MamlConfig& config, MamlWorkspace& workspace) {
  if (!params.shape().has_head) fail(ErrorCode::kInvalidArgument, "maml needs a classifier head");
  MetaStepResult result;
  const GroupRates alpha{config.alpha_encoder, config.alpha_head};

  // The inner loop only ever sees the support set.
  workspace.adapted = params;
  const double support_weight = balancing_weight(episode.support);
  for (std::uint32_t k = 0; k < config.inner_steps; ++k) {
    const double loss = weighted_bce_loss_and_grads(episode.support, workspace.adapted,
                                                    support_weight, workspace.grads);
    if (k == 0) result.support_loss = loss;
    sgd_step(workspace.adapted, workspace.grads, alpha);
  }

  result.query_loss = weighted_bce_loss_and_grads(episode.query, workspace.adapted,
                                                  balancing_weight(episode.query), workspace.grads);
  result.query_grad_norm = clip_gradients(workspace.grads, config.clip_norm);
  if (config.beta > 0.0) adam_step(params, workspace.grads, adam, config.beta);
  return result;
}

TrainOutcome train_maml(std::span<const DomainDataset> domains, const ModelSpec& model,
                        const MamlConfig& config, const EpisodeConfig& episodes,
                        std::uint64_t seed) {
  config.validate();
  const EncoderShape shape = model.shape(true);
  TrainOutcome out;
  out.checkpoint.method = Method::kMaml;
  out.checkpoint.features = model.features;
  out.checkpoint.seed = seed;
  out.checkpoint.params = init_params(shape, mix_seed(seed, 21));
  if (config.episodes == 0) return out;

  episodes.validate();
  const ExampleBank bank(domains, model.features);
  Rng rng(mix_seed(seed, 22));
  PairCursor cursor;
  AdamState adam(shape);
  MamlWorkspace workspace(shape);

  for (std::uint32_t e = 0; e < config.episodes; ++e) {
    const Episode ep = sample_episode(bank.pools(), episodes, rng, cursor);
    const MetaStepResult r = meta_step(ep, out.checkpoint.params, adam, config, workspace);
    out.log.losses.push_back(r.query_loss);
    out.log.cross_domain.push_back(ep.is_cross_domain ? 1 : 0);
  }
  return out;
}

std::vector<double> train_weighted_classifier(EncoderParams& params,
                                              std::span<const ExampleRef> examples,
                                              double anomaly_weight,
                                              const ClassifierTraining& training) {
  if (training.batch_size == 0) fail(ErrorCode::kConfig, "batch size must be >= 1");
  std::vector<double> epoch_losses;
  if (training.epochs == 0 || examples.empty()) return epoch_losses;

  Rng rng(training.seed);
  AdamState adam(params.shape());
  Gradients grads(params.shape());
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<ExampleRef> batch;

  for (std::uint32_t epoch = 0; epoch < training.epochs; ++epoch) {
    rng.shuffle(order);
    double weighted_loss = 0.0;
    double weight_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += training.batch_size) {
      const std::size_t end = std::min(order.size(), start + training.batch_size);
      batch.clear();
      double batch_weight = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(examples[order[i]]);
        batch_weight += examples[order[i]].label == kAnomaly ? anomaly_weight : 1.0;
      }
      const double loss = weighted_bce_loss_and_grads(batch, params, anomaly_weight, grads);
      adam_step(params, grads, adam, training.rates);
      weighted_loss += loss * batch_weight;
      weight_sum += batch_weight;
    }
    epoch_losses.push_back(weighted_loss / weight_sum);
  }
  return epoch_losses;
}

EncoderParams adapt_to_domain(const Checkpoint& checkpoint, std::span<const TextRecord> train,
                              const ClassifierTraining& training) {
  if (!checkpoint.params.shape().has_head) {
    fail(ErrorCode::kInvalidArgument, "adaptation needs a checkpoint with a classifier head");
  }
  const ClassCounts counts = count_classes(train);
  if (counts.normal == 0 || counts.anomaly == 0) {
    fail(ErrorCode::kData, "adaptation needs both classes in the training split");
  }
  const auto features = featurize_all(train, checkpoint.features);
  const auto refs = make_refs(train, features);
  EncoderParams params = checkpoint.params;
  train_weighted_classifier(params, refs, balancing_weight(refs), training);
  return params;
}

double classifier_probability(std::string_view text, const EncoderParams& params,
                              const FeatureConfig& features) {
  return sigmoid(head_logit(embed(featurize(text, features), params), params));
}

std::vector<double> adapt_and_score(const Checkpoint& checkpoint, std::span<const TextRecord> train,
                                    std::span<const std::string> texts,
                                    const ClassifierTraining& training) {
  const EncoderParams adapted = adapt_to_domain(checkpoint, train, training);
  std::vector<double> scores;
  scores.reserve(texts.size());
  for (const auto& t : texts) scores.push_back(classifier_probability(t, adapted, checkpoint.features));
  return scores;
}

}  // namespace fsad
