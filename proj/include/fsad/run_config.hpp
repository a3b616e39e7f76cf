#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsad/baselines.hpp"
#include "fsad/corpus.hpp"
#include "fsad/episodes.hpp"
#include "fsad/maml.hpp"
#include "fsad/method.hpp"
#include "fsad/protonet.hpp"
#include "fsad/training.hpp"

namespace fsad {

// Typed view of a run configuration, produced by RunConfig::resolve().
struct RunSettings {
  Method method = Method::kPrototypical;
  std::uint64_t seed = 0;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "runs";
  bool synth = false;
  std::vector<std::string> domains;  // empty: every domain found
  std::uint32_t log_every = 100;

  ModelSpec model;
  EpisodeConfig episode;  // method shapes unless overridden
  ProtoNetConfig protonet;
  MamlConfig maml;
  ClassifierTraining adapt;  // test-time fine-tuning of maml checkpoints
  FineTuneConfig finetune;
  std::uint32_t oneclass_k_nn = 5;
  std::uint32_t oneclass_cap = 5000;
  SynthConfig synth_corpus;

  SplitFractions split;
  double target_rate = 0.03;
  double preprocess_test_rate = 0.0;
  std::string text_column = "text";
  std::string label_column = "label";
  char delimiter = ',';
  std::map<std::string, std::filesystem::path> inputs;       // domain -> raw csv
  std::map<std::string, std::map<std::string, int>> label_maps;  // domain -> map
  std::map<std::string, int> default_label_map;

  std::vector<double> ablate_p_values;
  std::vector<std::uint64_t> ablate_seeds;
  std::string loo_held_out;
  std::uint32_t loo_shots = 5;
  std::uint32_t loo_normals_per_shot = 10;

  std::vector<std::filesystem::path> eval_checkpoints;

  // Episodes for the selected meta method.
  std::uint32_t meta_episodes() const {
    return method == Method::kMaml ? maml.episodes : protonet.episodes;
  }
};

// Flat key = value configuration. Keys not in the known set (or the
// "input.<domain>" / "label_map.<domain>" families) are rejected on set().
// Later set() calls override earlier ones, so command-line flags applied
// after load_file() win.
class RunConfig {
 public:
  void set(const std::string& key, const std::string& value);
  void unset(const std::string& key);
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<config>");

  std::optional<std::string> get(const std::string& key) const;
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Parses and range-checks every value. Throws fsad::Error(kConfig).
  RunSettings resolve() const;
  void validate() const { (void)resolve(); }

  // Effective configuration (defaults merged with explicit values) as a JSON
  // object with sorted keys.
  std::string snapshot_json() const;

  static bool is_known_key(const std::string& key);
  static std::vector<std::string> known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fsad
