#pragma once

#include <cstdint>
#include <vector>

#include "fsad/checkpoint.hpp"
#include "fsad/encoder.hpp"
#include "fsad/features.hpp"

namespace fsad {

// Featurizer plus encoder widths; the encoder input dimension always equals
// the featurizer's bucket count.
struct ModelSpec {
  FeatureConfig features;
  std::uint32_t hidden_dim = 128;
  std::uint32_t embed_dim = 64;

  EncoderShape shape(bool with_head) const {
    return EncoderShape{features.n_buckets, hidden_dim, embed_dim, with_head};
  }
};

// Per-episode (or per-epoch for the supervised baselines) training trace.
struct TrainingLog {
  std::vector<double> losses;
  std::vector<std::uint8_t> cross_domain;

  double mean_loss(std::size_t begin, std::size_t end) const;
};

struct TrainOutcome {
  Checkpoint checkpoint;
  TrainingLog log;
};

}  // namespace fsad
