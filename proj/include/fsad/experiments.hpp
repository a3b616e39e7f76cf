#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fsad/detector.hpp"
#include "fsad/run_config.hpp"

namespace fsad {

// Output of one CLI command: a JSON report (also written to out_dir where
// the command defines a report file), a human-readable table, and the files
// written.
struct CommandResult {
  std::string report_json;
  std::string table;
  std::vector<std::filesystem::path> files;
};

// Synthetic corpus or the processed splits under data_dir, restricted to
// settings.domains when given.
std::vector<DomainDataset> load_domains(const RunSettings& settings);

// Meta-training of the prototypical or maml method over all given domains.
TrainOutcome train_meta(const RunSettings& settings, std::span<const DomainDataset> domains,
                        std::uint64_t seed);

// Per-domain training of the oneclass or finetune baseline.
TrainOutcome train_baseline(const RunSettings& settings, const DomainDataset& domain,
                            std::uint64_t seed);

// Fitting options used by evaluation (prototype subsampling, maml adaptation).
DetectorFitOptions fit_options(const RunSettings& settings, std::uint64_t seed);

// "episode=<i> loss=<window mean> cross_fraction=<so far>" every log_every
// episodes (and at the last one); per-epoch lines for the baselines.
std::string format_training_log(const TrainingLog& log, Method method, std::uint32_t log_every);

struct DomainMetrics {
  std::string domain;
  MetricsReport metrics;
};

// In-memory train + eval of settings.method on every domain.
std::vector<DomainMetrics> train_and_evaluate(const RunSettings& settings,
                                              std::span<const DomainDataset> domains,
                                              std::uint64_t seed);

struct LeaveOneOutResult {
  std::string held_out;
  std::vector<std::string> train_domains;
  std::size_t support_anomalies = 0;
  std::size_t support_normals = 0;
  MetricsReport adapted;
  MetricsReport unadapted;
};

// Meta-trains on every domain but held_out, then scores the held-out test
// split after adapting on a support of `shots` anomalies and
// normals_per_shot * shots normals from its train split, and without
// adaptation (maml: the meta-learned classifier; prototypical: prototypes
// from the meta-training domains' train splits).
LeaveOneOutResult leave_one_out(const RunSettings& settings, std::span<const DomainDataset> domains,
                                const std::string& held_out, std::uint32_t shots,
                                std::uint64_t seed);

std::string metrics_table(const std::string& method, std::span<const DomainMetrics> rows);
std::string split_table(std::span<const DomainDataset> domains);

CommandResult cmd_synth(const RunConfig& config);
CommandResult cmd_preprocess(const RunConfig& config);
CommandResult cmd_train(const RunConfig& config);
CommandResult cmd_eval(const RunConfig& config);
CommandResult cmd_ablate(const RunConfig& config);
CommandResult cmd_loo(const RunConfig& config);

}  // namespace fsad
