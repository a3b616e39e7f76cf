#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsad/corpus.hpp"
#include "fsad/features.hpp"
#include "fsad/method.hpp"
#include "fsad/rng.hpp"

namespace fsad {

struct EpisodeConfig {
  double p_cross = 0.25;
  std::uint32_t n_support_anom = 5;
  std::uint32_t n_support_norm = 5;
  std::uint32_t n_query_anom = 15;
  std::uint32_t n_query_norm = 15;

  void validate() const;
  bool operator==(const EpisodeConfig&) const = default;
};

// Paper defaults: prototypical (5 anomalies, 5 normals) support with a
// (15, 15) query; maml (5, 50) for both. Non-episodic methods are rejected.
EpisodeConfig method_episode_shapes(Method method);
EpisodeConfig method_episode_shapes(std::string_view method_name);

// A record together with its cached features.
struct ExampleRef {
  const TextRecord* record = nullptr;
  const SparseFeatures* features = nullptr;
  int label = kNormal;
};

struct DomainPool {
  std::string domain;
  std::vector<ExampleRef> normals;
  std::vector<ExampleRef> anomalies;
};

struct Episode {
  std::vector<ExampleRef> support;
  std::vector<ExampleRef> query;
  std::string normal_domain;
  std::string anomaly_domain;
  bool is_cross_domain = false;
  // Set when some pool was smaller than the demand placed on it.
  bool sampled_with_replacement = false;
};

// Round-robin position over the ordered domain pairs (A, B), A != B, in
// lexicographic order of pool index.
struct PairCursor {
  std::size_t next = 0;
};

std::vector<std::pair<std::size_t, std::size_t>> ordered_domain_pairs(std::size_t n_domains);

// One meta-training episode. A uniform draw u decides the episode type:
// u < p_cross takes the next ordered pair from the cursor, otherwise a single
// domain is picked uniformly. Normals come from the normal domain, anomalies
// from the anomaly domain, support and query are disjoint whenever the pools
// allow it, and both sets are shuffled.
Episode sample_episode(std::span<const DomainPool> pools, const EpisodeConfig& config, Rng& rng,
                       PairCursor& cursor);

// Owns the featurized train splits of a set of domains and exposes them as
// sampling pools. Pools are ordered as the input datasets.
class ExampleBank {
 public:
  ExampleBank(std::span<const DomainDataset> domains, const FeatureConfig& features);

  ExampleBank(const ExampleBank&) = delete;
  ExampleBank& operator=(const ExampleBank&) = delete;

  std::span<const DomainPool> pools() const { return pools_; }

 private:
  std::deque<TextRecord> records_;
  std::deque<SparseFeatures> features_;
  std::vector<DomainPool> pools_;
};

// Features for a list of records, in order.
std::vector<SparseFeatures> featurize_all(std::span<const TextRecord> records,
                                          const FeatureConfig& features);

std::vector<ExampleRef> make_refs(std::span<const TextRecord> records,
                                  std::span<const SparseFeatures> features);

}  // namespace fsad
