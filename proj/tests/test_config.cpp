#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fsad/error.hpp"
#include "fsad/run_config.hpp"

using namespace fsad;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an fsad::Error");
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("defaults resolve") {
  const RunSettings s = RunConfig{}.resolve();
  CHECK(s.method == Method::kPrototypical);
  CHECK(s.episode.p_cross == 0.25);
  CHECK(s.episode.n_support_anom == 5);
  CHECK(s.episode.n_query_norm == 15);
  CHECK(s.protonet.lr == 1e-5);
  CHECK(s.protonet.episodes == ProtoNetConfig{}.episodes);
  CHECK(s.model.features.n_buckets == 32768);
  CHECK(s.model.features.ngram_orders == std::vector<std::uint32_t>{2, 3});
  CHECK(s.model.hidden_dim == 128);
  CHECK(s.model.embed_dim == 64);
  CHECK(s.maml.alpha_encoder == 5e-5);
  CHECK(s.maml.alpha_head == 5e-4);
  CHECK(s.maml.beta == 1e-5);
  CHECK(s.maml.clip_norm == 5.0);
  CHECK(s.target_rate == 0.03);
  CHECK(s.ablate_p_values == std::vector<double>{0.0, 0.25, 0.5});
  CHECK(s.ablate_seeds.size() == 5);
  CHECK(s.delimiter == ',');
}

TEST_CASE("method selects episode shapes and the episodes key covers both meta methods") {
  RunConfig c;
  c.set("method", "maml");
  c.set("episodes", "12");
  const RunSettings s = c.resolve();
  CHECK(s.episode.n_support_norm == 50);
  CHECK(s.episode.n_query_anom == 5);
  CHECK(s.maml.episodes == 12);
  CHECK(s.protonet.episodes == 12);
  CHECK(s.meta_episodes() == 12);
  CHECK(s.adapt.rates.encoder == 5e-5);
  CHECK(s.adapt.rates.head == 5e-4);
  c.set("episode.n_support_norm", "7");
  CHECK(c.resolve().episode.n_support_norm == 7);
}

TEST_CASE("unknown keys and malformed lines are config errors") {
  RunConfig c;
  CHECK(code_of([&] { c.set("protonet.learning_rate", "1"); }) == ErrorCode::kConfig);
  try {
    c.load_text("seed = 1\n# comment\n\nbogus = 2\n", "run.cfg");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    CHECK(std::string(e.what()).find("run.cfg:4") != std::string::npos);
  }
  CHECK(code_of([&] { c.load_text("seed 1\n"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { c.load_file("/nonexistent/fsad.cfg"); }) == ErrorCode::kConfig);
  CHECK(RunConfig::is_known_key("input.sms"));
  CHECK(RunConfig::is_known_key("label_map.sms"));
  CHECK_FALSE(RunConfig::is_known_key("input."));
}

TEST_CASE("file values are overridden by later sets") {
  const auto path = std::filesystem::temp_directory_path() / "fsad_test_config.cfg";
  std::ofstream(path) << "# experiment\nmethod = maml\nseed = 3\np_cross = 0.5\n";
  RunConfig c;
  c.load_file(path);
  c.set("seed", "9");
  const RunSettings s = c.resolve();
  CHECK(s.method == Method::kMaml);
  CHECK(s.seed == 9);
  CHECK(s.episode.p_cross == 0.5);
  CHECK(*c.get("seed") == "9");
  c.unset("seed");
  CHECK(*c.get("seed") == "0");
}

TEST_CASE("invalid values are rejected") {
  const std::vector<std::pair<std::string, std::string>> bad{
      {"method", "matching"},       {"seed", "-1"},         {"p_cross", "1.5"},
      {"p_cross", "x"},             {"feature.n_buckets", "1000"},
      {"maml.clip_norm", "0"},      {"maml.inner_steps", "0"},
      {"split.train", "0.7"},       {"preprocess.target_rate", "0"},
      {"synth", "maybe"},           {"preprocess.delimiter", "::"},
      {"label_map.sms", "ham:0,spam:2"}, {"ablate.p_values", "0,2"},
      {"loo.shots", "0"},           {"log_every", "0"},
      {"protonet.lr", "-1"},        {"oneclass.k_nn", "0"}};
  for (const auto& [key, value] : bad) {
    RunConfig c;
    c.set(key, value);
    INFO(key << " = " << value);
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
  }
}

TEST_CASE("label maps, inputs and delimiters") {
  RunConfig c;
  c.set("input.sms", "raw/sms.csv");
  c.set("label_map.sms", "ham:0, spam:1");
  c.set("preprocess.delimiter", "tab");
  c.set("preprocess.label_map", "0:0,1:1");
  const RunSettings s = c.resolve();
  CHECK(s.inputs.at("sms") == "raw/sms.csv");
  CHECK(s.label_maps.at("sms").at("ham") == kNormal);
  CHECK(s.label_maps.at("sms").at("spam") == kAnomaly);
  CHECK(s.default_label_map.at("1") == kAnomaly);
  CHECK(s.delimiter == '\t');
}

TEST_CASE("snapshot merges defaults and explicit values") {
  RunConfig c;
  c.set("seed", "4");
  const auto j = nlohmann::json::parse(c.snapshot_json());
  CHECK(j.at("seed") == "4");
  CHECK(j.at("method") == "prototypical");
  CHECK(j.size() == RunConfig::known_keys().size());
  RunConfig d;
  d.set("seed", "4");
  CHECK(d.snapshot_json() == c.snapshot_json());
}
