#include "fsad/protonet.hpp"

#include <cmath>

#include "fsad/error.hpp"
#include "fsad/rng.hpp"

namespace fsad {

double TrainingLog::mean_loss(std::size_t begin, std::size_t end) const {
  end = std::min(end, losses.size());
  if (begin >= end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += losses[i];
  return s / static_cast<double>(end - begin);
}

Prototypes compute_prototypes(std::span<const std::vector<double>> embeddings,
                              std::span<const int> labels) {
  if (embeddings.size() != labels.size()) {
    fail(ErrorCode::kInvalidArgument, "compute_prototypes: embeddings and labels differ in length");
  }
  Prototypes p;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    auto& target = labels[i] == kAnomaly ? p.anomaly : p.normal;
    auto& count = labels[i] == kAnomaly ? p.n_anomaly : p.n_normal;
    if (target.empty()) target.assign(embeddings[i].size(), 0.0);
    if (target.size() != embeddings[i].size()) {
      fail(ErrorCode::kInvalidArgument, "compute_prototypes: embedding dimension mismatch");
    }
    for (std::size_t e = 0; e < target.size(); ++e) target[e] += embeddings[i][e];
    count += 1;
  }
  if (p.n_normal == 0 || p.n_anomaly == 0) {
    fail(ErrorCode::kData, "prototypes need at least one normal and one anomaly example");
  }
  if (p.normal.size() != p.anomaly.size()) {
    fail(ErrorCode::kInvalidArgument, "compute_prototypes: embedding dimension mismatch");
  }
  for (double& x : p.normal) x /= static_cast<double>(p.n_normal);
  for (double& x : p.anomaly) x /= static_cast<double>(p.n_anomaly);
  return p;
}

double squared_distance(std::span<const double> z, std::span<const double> c) {
  if (z.size() != c.size()) fail(ErrorCode::kInvalidArgument, "squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - c[i];
    s += d * d;
  }
  return s;
}

double episode_loss_and_grads(const Episode& episode, const EncoderParams& params,
                              Gradients& grads) {
  if (episode.query.empty()) fail(ErrorCode::kData, "episode has an empty query set");
  grads.zero();
  const std::size_t dim = params.shape().embed_dim;

  std::vector<ForwardCache> support(episode.support.size());
  std::vector<std::vector<double>> support_z;
  std::vector<int> support_labels;
  support_z.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    embed(*episode.support[i].features, params, support[i]);
    support_z.push_back(support[i].z);
    support_labels.push_back(episode.support[i].label);
  }
  const Prototypes protos = compute_prototypes(support_z, support_labels);

  std::vector<double> d_normal(dim, 0.0);  // dL / d c_normal
  std::vector<double> d_anomaly(dim, 0.0);
  std::vector<double> dz(dim);
  const double inv_q = 1.0 / static_cast<double>(episode.query.size());
  ForwardCache cache;
  double loss = 0.0;

  for (const auto& q : episode.query) {
    embed(*q.features, params, cache);
    const double dist_n = squared_distance(cache.z, protos.normal);
    const double dist_a = squared_distance(cache.z, protos.anomaly);
    // Two-class softmax over (-dist_n, -dist_a) is a sigmoid of s.
    const double s = dist_n - dist_a;
    const double y = q.label == kAnomaly ? 1.0 : 0.0;
    loss += q.label == kAnomaly ? softplus(-s) : softplus(s);

    const double g = (sigmoid(s) - y) * inv_q;  // dL/ds; dL/d dist_n = g, dL/d dist_a = -g
    for (std::size_t e = 0; e < dim; ++e) {
      const double to_n = 2.0 * (cache.z[e] - protos.normal[e]);
      const double to_a = 2.0 * (cache.z[e] - protos.anomaly[e]);
      dz[e] = g * to_n - g * to_a;
      d_normal[e] -= g * to_n;
      d_anomaly[e] += g * to_a;
    }
    backward_embed(*q.features, params, cache, dz, grads);
  }

  const double inv_n = 1.0 / static_cast<double>(protos.n_normal);
  const double inv_a = 1.0 / static_cast<double>(protos.n_anomaly);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const bool anomalous = episode.support[i].label == kAnomaly;
    const auto& upstream = anomalous ? d_anomaly : d_normal;
    const double share = anomalous ? inv_a : inv_n;
    for (std::size_t e = 0; e < dim; ++e) dz[e] = upstream[e] * share;
    backward_embed(*episode.support[i].features, params, support[i], dz, grads);
  }

  loss *= inv_q;
  if (!std::isfinite(loss)) {
    fail(ErrorCode::kNumeric, "prototypical episode loss is not finite (parameters diverged?)");
  }
  return loss;
}

TrainOutcome train_protonet(std::span<const DomainDataset> domains, const ModelSpec& model,
                            const ProtoNetConfig& config, const EpisodeConfig& episodes,
                            std::uint64_t seed) {
  const EncoderShape shape = model.shape(false);
  TrainOutcome out;
  out.checkpoint.method = Method::kPrototypical;
  out.checkpoint.features = model.features;
  out.checkpoint.seed = seed;
  out.checkpoint.params = init_params(shape, mix_seed(seed, 11));
  if (config.episodes == 0) return out;

  episodes.validate();
  const ExampleBank bank(domains, model.features);
  Rng rng(mix_seed(seed, 12));
  PairCursor cursor;
  AdamState adam(shape);
  Gradients grads(shape);
  EncoderParams& params = out.checkpoint.params;

  for (std::uint32_t e = 0; e < config.episodes; ++e) {
    const Episode ep = sample_episode(bank.pools(), episodes, rng, cursor);
    const double loss = episode_loss_and_grads(ep, params, grads);
    adam_step(params, grads, adam, config.lr);
    out.log.losses.push_back(loss);
    out.log.cross_domain.push_back(ep.is_cross_domain ? 1 : 0);
  }
  return out;
}

Prototypes fit_full_prototypes(std::span<const TextRecord> train, const EncoderParams& params,
                               const FeatureConfig& features, std::uint64_t seed,
                               std::size_t normal_cap) {
  std::vector<std::size_t> normals;
  std::vector<std::size_t> anomalies;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (train[i].label == kAnomaly ? anomalies : normals).push_back(i);
  }
  if (normals.empty() || anomalies.empty()) {
    fail(ErrorCode::kData, "fitting prototypes needs both classes in the training split");
  }
  if (normal_cap > 0 && normals.size() > normal_cap) {
    Rng rng(seed);
    std::vector<std::size_t> kept;
    for (std::size_t pick : rng.sample_indices(normals.size(), normal_cap)) kept.push_back(normals[pick]);
    normals = std::move(kept);
  }

  std::vector<std::vector<double>> z;
  std::vector<int> labels;
  for (std::size_t i : normals) {
    z.push_back(embed(featurize(train[i].text, features), params));
    labels.push_back(kNormal);
  }
  for (std::size_t i : anomalies) {
    z.push_back(embed(featurize(train[i].text, features), params));
    labels.push_back(kAnomaly);
  }
  return compute_prototypes(z, labels);
}

double protonet_score(std::span<const double> z, const Prototypes& prototypes) {
  return squared_distance(z, prototypes.normal) - squared_distance(z, prototypes.anomaly);
}

double score_protonet(std::string_view text, const Prototypes& prototypes,
                      const EncoderParams& params, const FeatureConfig& features) {
  return protonet_score(embed(featurize(text, features), params), prototypes);
}

}  // namespace fsad
