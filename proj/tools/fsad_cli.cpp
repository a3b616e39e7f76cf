#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "fsad/fsad.h"

namespace {

struct Flags {
  std::string config_file;
  std::optional<std::string> method;
  std::optional<std::string> episodes;
  std::optional<std::string> p_cross;
  std::optional<std::string> seed;
  std::optional<std::string> data_dir;
  std::optional<std::string> out_dir;
  bool synth = false;
  std::optional<std::string> domains;
  std::vector<std::string> sets;
  bool print_json = false;

  std::vector<std::string> inputs;
  std::vector<std::string> label_maps;
  std::optional<std::string> target_rate;
  std::optional<std::string> held_out;
  std::optional<std::string> shots;
  std::optional<std::string> p_values;
  std::optional<std::string> seeds;
  std::optional<std::string> checkpoints;
};

using Setter = std::pair<const char*, std::optional<std::string>*>;

void add_shared(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "Flat key = value config file (flags override it)");
  cmd->add_option("--method", f.method, "prototypical | maml | oneclass | finetune");
  cmd->add_option("--episodes", f.episodes, "Meta-training episodes");
  cmd->add_option("--p-cross", f.p_cross, "Cross-domain episode probability");
  cmd->add_option("--seed", f.seed, "Run seed");
  cmd->add_option("--data-dir", f.data_dir, "Directory of processed split files");
  cmd->add_option("--out-dir", f.out_dir, "Directory for checkpoints, logs and reports");
  cmd->add_flag("--synth", f.synth, "Use the seeded synthetic corpus instead of --data-dir");
  cmd->add_option("--domains", f.domains, "Comma-separated domain subset");
  cmd->add_option("--set", f.sets, "Any config key as KEY=VALUE (repeatable)");
  cmd->add_flag("--json", f.print_json, "Print the JSON report instead of the table");
}

int exit_code(fsad_status status) {
  if (status == FSAD_OK) return 0;
  if (status == FSAD_ERR_CONFIG || status == FSAD_ERR_INVALID_ARGUMENT) return 2;
  return 1;
}

int report_failure(fsad_status status) {
  std::fprintf(stderr, "error (%s): %s\n", fsad_status_string(status), fsad_last_error());
  return exit_code(status);
}

std::optional<std::pair<std::string, std::string>> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) return std::nullopt;
  return std::make_pair(s.substr(0, eq), s.substr(eq + 1));
}

int run(fsad_status (*command)(const fsad_config*, fsad_report**), const Flags& f) {
  fsad_config* config = nullptr;
  fsad_status st = fsad_config_create(&config);
  if (st != FSAD_OK) return report_failure(st);

  std::vector<std::pair<std::string, std::string>> assignments;
  const std::vector<std::pair<const char*, const std::optional<std::string>*>> direct{
      {"method", &f.method},         {"episodes", &f.episodes},
      {"p_cross", &f.p_cross},       {"seed", &f.seed},
      {"data_dir", &f.data_dir},     {"out_dir", &f.out_dir},
      {"domains", &f.domains},       {"preprocess.target_rate", &f.target_rate},
      {"loo.held_out", &f.held_out}, {"loo.shots", &f.shots},
      {"ablate.p_values", &f.p_values}, {"ablate.seeds", &f.seeds},
      {"eval.checkpoints", &f.checkpoints}};
  for (const auto& [key, value] : direct) {
    if (*value) assignments.emplace_back(key, **value);
  }
  if (f.synth) assignments.emplace_back("synth", "true");

  auto family = [&](const std::vector<std::string>& items, const char* prefix, const char* flag) {
    for (const auto& item : items) {
      const auto kv = split_assignment(item);
      if (!kv) {
        std::fprintf(stderr, "error: %s expects NAME=VALUE, got '%s'\n", flag, item.c_str());
        return false;
      }
      assignments.emplace_back(prefix + kv->first, kv->second);
    }
    return true;
  };
  if (!family(f.inputs, "input.", "--input") || !family(f.label_maps, "label_map.", "--label-map") ||
      !family(f.sets, "", "--set")) {
    fsad_config_destroy(config);
    return 2;
  }

  if (!f.config_file.empty()) st = fsad_config_load_file(config, f.config_file.c_str());
  for (const auto& [key, value] : assignments) {
    if (st != FSAD_OK) break;
    st = fsad_config_set(config, key.c_str(), value.c_str());
  }
  if (st == FSAD_OK) st = fsad_config_validate(config);

  fsad_report* report = nullptr;
  if (st == FSAD_OK) st = command(config, &report);
  fsad_config_destroy(config);
  if (st != FSAD_OK) return report_failure(st);

  std::fputs(f.print_json ? fsad_report_json(report) : fsad_report_table(report), stdout);
  if (f.print_json) std::fputc('\n', stdout);
  fsad_report_destroy(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot text anomaly detection experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fsad_version()));

  Flags f;
  auto* preprocess = app.add_subcommand("preprocess", "Split, down-sample and write labeled CSV corpora");
  auto* train = app.add_subcommand("train", "Train a detector and write its checkpoint and log");
  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints on every domain's test split");
  auto* ablate = app.add_subcommand("ablate", "Cross-domain probability ablation over seeds");
  auto* loo = app.add_subcommand("loo", "Leave-one-domain-out meta-training and k-shot adaptation");
  auto* synth = app.add_subcommand("synth", "Write the seeded synthetic corpus to --data-dir");
  for (auto* cmd : {preprocess, train, eval, ablate, loo, synth}) add_shared(cmd, f);

  preprocess->add_option("--input", f.inputs, "Raw corpus as DOMAIN=PATH (repeatable)");
  preprocess->add_option("--label-map", f.label_maps,
                         "Label map as DOMAIN=raw:0,raw:1 (repeatable)");
  preprocess->add_option("--target-rate", f.target_rate, "Training anomaly rate after down-sampling");
  eval->add_option("--checkpoint", f.checkpoints, "Comma-separated checkpoint paths");
  ablate->add_option("--p-values", f.p_values, "Comma-separated cross-domain probabilities");
  ablate->add_option("--seeds", f.seeds, "Comma-separated seeds");
  loo->add_option("--held-out", f.held_out, "Domain left out of meta-training");
  loo->add_option("--shots", f.shots, "Anomalies in the adaptation support");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (preprocess->parsed()) return run(fsad_cmd_preprocess, f);
  if (train->parsed()) return run(fsad_cmd_train, f);
  if (eval->parsed()) return run(fsad_cmd_eval, f);
  if (ablate->parsed()) return run(fsad_cmd_ablate, f);
  if (loo->parsed()) return run(fsad_cmd_loo, f);
  return run(fsad_cmd_synth, f);
}
