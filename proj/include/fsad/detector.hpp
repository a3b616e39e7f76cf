#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fsad/baselines.hpp"
#include "fsad/checkpoint.hpp"
#include "fsad/corpus.hpp"
#include "fsad/maml.hpp"
#include "fsad/metrics.hpp"
#include "fsad/protonet.hpp"

namespace fsad {

// Options for the per-domain fitting step that precedes scoring.
struct DetectorFitOptions {
  ClassifierTraining adapt;  // maml test-time fine-tuning
  std::uint32_t normal_cap = 5000;
  std::uint64_t seed = 0;
};

// A checkpoint made ready to score one target domain: prototypes from the
// domain's labeled examples (prototypical), a fine-tuned copy of the
// parameters (maml), or the checkpoint as stored (oneclass, finetune).
class Detector {
 public:
  static Detector fit(const Checkpoint& checkpoint, std::span<const TextRecord> labeled,
                      const DetectorFitOptions& options);
  // Scores with the checkpoint as stored; prototypical needs prototypes
  // supplied by the caller.
  static Detector unadapted(const Checkpoint& checkpoint, Prototypes prototypes = {});

  Method method() const { return method_; }
  double score(std::string_view text) const;
  std::vector<double> score(std::span<const TextRecord> records) const;

 private:
  Method method_ = Method::kPrototypical;
  FeatureConfig features_;
  EncoderParams params_;
  Prototypes prototypes_;
  OneClassModel oneclass_;
};

std::vector<int> labels_of(std::span<const TextRecord> records);

// Threshold on the val split, AUC/AP/P/R/F1 on the test split. Fails with
// kData when either split lacks a class.
MetricsReport evaluate_on_domain(const Detector& detector, const DomainDataset& dataset);

}  // namespace fsad
