#include "fsad/episodes.hpp"

#include "fsad/error.hpp"

namespace fsad {

namespace {

struct Draw {
  std::vector<ExampleRef> support;
  std::vector<ExampleRef> query;
};

Draw draw_class(const std::vector<ExampleRef>& pool, std::size_t n_support, std::size_t n_query,
                Rng& rng, bool& with_replacement) {
  Draw out;
  const std::size_t n = pool.size();
  if (n >= n_support + n_query) {
    const auto picks = rng.sample_indices(n, n_support + n_query);
    for (std::size_t i = 0; i < picks.size(); ++i) {
      (i < n_support ? out.support : out.query).push_back(pool[picks[i]]);
    }
    return out;
  }

  with_replacement = true;
  if (n >= n_support) {
    // Distinct support; query resampled from whatever support left over.
    auto order = rng.sample_indices(n, n);
    for (std::size_t i = 0; i < n_support; ++i) out.support.push_back(pool[order[i]]);
    const std::size_t rest = n - n_support;
    for (std::size_t i = 0; i < n_query; ++i) {
      const std::size_t pick = rest > 0 ? order[n_support + rng.below(rest)] : rng.below(n);
      out.query.push_back(pool[pick]);
    }
    return out;
  }
  for (std::size_t i = 0; i < n_support; ++i) out.support.push_back(pool[rng.below(n)]);
  for (std::size_t i = 0; i < n_query; ++i) out.query.push_back(pool[rng.below(n)]);
  return out;
}

}  // namespace

void EpisodeConfig::validate() const {
  if (!(p_cross >= 0.0 && p_cross <= 1.0)) fail(ErrorCode::kConfig, "p_cross must be in [0, 1]");
  if (n_support_anom == 0 || n_support_norm == 0 || n_query_anom == 0 || n_query_norm == 0) {
    fail(ErrorCode::kConfig, "episode support and query counts must be >= 1");
  }
}

EpisodeConfig method_episode_shapes(Method method) {
  EpisodeConfig c;
  switch (method) {
    case Method::kPrototypical:
      c.n_support_anom = 5;
      c.n_support_norm = 5;
      c.n_query_anom = 15;
      c.n_query_norm = 15;
      return c;
    case Method::kMaml:
      c.n_support_anom = 5;
      c.n_support_norm = 50;
      c.n_query_anom = 5;
      c.n_query_norm = 50;
      return c;
    case Method::kOneClass:
    case Method::kFineTune:
      break;
  }
  fail(ErrorCode::kConfig, std::string("method '") + std::string(to_string(method)) +
                               "' is not trained episodically");
}

EpisodeConfig method_episode_shapes(std::string_view method_name) {
  return method_episode_shapes(parse_method(method_name));
}

std::vector<std::pair<std::size_t, std::size_t>> ordered_domain_pairs(std::size_t n_domains) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n_domains; ++a) {
    for (std::size_t b = 0; b < n_domains; ++b) {
      if (a != b) pairs.emplace_back(a, b);
    }
  }
  return pairs;
}

Episode sample_episode(std::span<const DomainPool> pools, const EpisodeConfig& config, Rng& rng,
                       PairCursor& cursor) {
  config.validate();
  if (pools.empty()) fail(ErrorCode::kData, "episode sampling needs at least one domain");
  if (config.p_cross > 0.0 && pools.size() < 2) {
    fail(ErrorCode::kData, "cross-domain sampling (p_cross > 0) needs at least two domains");
  }

  std::size_t normal_domain;
  std::size_t anomaly_domain;
  const double u = rng.uniform();
  if (u < config.p_cross) {
    const auto pairs = ordered_domain_pairs(pools.size());
    const auto& pair = pairs[cursor.next % pairs.size()];
    cursor.next += 1;
    normal_domain = pair.first;
    anomaly_domain = pair.second;
  } else {
    normal_domain = anomaly_domain = static_cast<std::size_t>(rng.below(pools.size()));
  }

  const DomainPool& normals = pools[normal_domain];
  const DomainPool& anomalies = pools[anomaly_domain];
  if (normals.normals.empty()) {
    fail(ErrorCode::kData, "domain '" + normals.domain + "' has no normal examples");
  }
  if (anomalies.anomalies.empty()) {
    fail(ErrorCode::kData, "domain '" + anomalies.domain + "' has no anomaly examples");
  }

  Episode ep;
  ep.normal_domain = normals.domain;
  ep.anomaly_domain = anomalies.domain;
  ep.is_cross_domain = normal_domain != anomaly_domain;

  Draw n = draw_class(normals.normals, config.n_support_norm, config.n_query_norm, rng,
                      ep.sampled_with_replacement);
  Draw a = draw_class(anomalies.anomalies, config.n_support_anom, config.n_query_anom, rng,
                      ep.sampled_with_replacement);

  ep.support = std::move(n.support);
  ep.support.insert(ep.support.end(), a.support.begin(), a.support.end());
  ep.query = std::move(n.query);
  ep.query.insert(ep.query.end(), a.query.begin(), a.query.end());
  rng.shuffle(ep.support);
  rng.shuffle(ep.query);
  return ep;
}

std::vector<SparseFeatures> featurize_all(std::span<const TextRecord> records,
                                          const FeatureConfig& features) {
  std::vector<SparseFeatures> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(featurize(r.text, features));
  return out;
}

std::vector<ExampleRef> make_refs(std::span<const TextRecord> records,
                                  std::span<const SparseFeatures> features) {
  if (records.size() != features.size()) fail(ErrorCode::kInternal, "make_refs: size mismatch");
  std::vector<ExampleRef> refs;
  refs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    refs.push_back({&records[i], &features[i], records[i].label});
  }
  return refs;
}

ExampleBank::ExampleBank(std::span<const DomainDataset> domains, const FeatureConfig& features) {
  for (const auto& d : domains) {
    DomainPool pool;
    pool.domain = d.domain;
    for (const auto& r : d.train) {
      records_.push_back(r);
      features_.push_back(featurize(r.text, features));
      const ExampleRef ref{&records_.back(), &features_.back(), r.label};
      (r.label == kAnomaly ? pool.anomalies : pool.normals).push_back(ref);
    }
    pools_.push_back(std::move(pool));
  }
}

}  // namespace fsad
