#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "fsad/corpus.hpp"
#include "fsad/encoder.hpp"
#include "fsad/episodes.hpp"
#include "fsad/features.hpp"
#include "fsad/rng.hpp"

namespace fsad::testing {

inline SparseFeatures random_sparse(std::uint32_t dim, std::size_t nnz, Rng& rng) {
  SparseFeatures x;
  x.dimension = dim;
  auto picks = rng.sample_indices(dim, std::min<std::size_t>(nnz, dim));
  std::sort(picks.begin(), picks.end());
  for (auto i : picks) {
    x.indices.push_back(static_cast<std::uint32_t>(i));
    x.values.push_back(0.1 + rng.uniform());
  }
  return x;
}

inline void randomize(EncoderParams& p, Rng& rng, double scale = 1.0) {
  for (double& v : p.values()) v = scale * (2.0 * rng.uniform() - 1.0);
}

// Smallest |pre-activation| over the given inputs; finite differences are
// only trusted away from the ReLU kink.
inline double kink_margin(std::span<const SparseFeatures> xs, const EncoderParams& p) {
  double margin = INFINITY;
  ForwardCache cache;
  for (const auto& x : xs) {
    embed(x, p, cache);
    for (double v : cache.pre) margin = std::min(margin, std::abs(v));
  }
  return margin;
}

// Max relative error of analytic vs central-difference gradient, with the
// relative error taken against max(|a|, |n|) and entries where both are below
// 1e-7 compared in absolute terms.
inline double max_fd_error(EncoderParams params, const Gradients& analytic,
                           const std::function<double(const EncoderParams&)>& loss,
                           double step = 1e-4) {
  double worst = 0.0;
  auto values = params.values();
  const auto a = analytic.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + step;
    const double up = loss(params);
    values[i] = keep - step;
    const double down = loss(params);
    values[i] = keep;
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max(std::abs(a[i]), std::abs(numeric));
    const double err = scale < 1e-7 ? std::abs(a[i] - numeric) : std::abs(a[i] - numeric) / scale;
    worst = std::max(worst, err);
  }
  return worst;
}

// Owns records and features so ExampleRefs stay valid.
struct ExampleStore {
  std::deque<TextRecord> records;
  std::deque<SparseFeatures> features;

  ExampleRef add(SparseFeatures x, int label, const std::string& domain = "d") {
    records.push_back({"", label, domain});
    features.push_back(std::move(x));
    return {&records.back(), &features.back(), label};
  }
};

inline std::vector<TextRecord> make_records(std::size_t normals, std::size_t anomalies,
                                            const std::string& domain = "d") {
  std::vector<TextRecord> out;
  for (std::size_t i = 0; i < normals; ++i) out.push_back({"normal " + std::to_string(i), kNormal, domain});
  for (std::size_t i = 0; i < anomalies; ++i) out.push_back({"anomaly " + std::to_string(i), kAnomaly, domain});
  return out;
}

// Small, fast synthetic corpus for end-to-end tests.
inline SynthConfig tiny_synth(std::uint64_t seed = 7) {
  SynthConfig c;
  c.n_domains = 3;
  c.normal_vocab_size = 200;
  c.shared_filler_size = 100;
  c.anomaly_vocab_size = 40;
  c.shared_anomaly_pool_size = 30;
  c.docs_per_domain = 300;
  c.anomaly_rate = 0.1;
  c.seed = seed;
  c.test_anomaly_rate = 0.2;
  return c;
}

}  // namespace fsad::testing
