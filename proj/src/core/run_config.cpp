#include "fsad/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fsad/error.hpp"

namespace fsad {

namespace {

// Known keys and their defaults. An empty default means "derived" (e.g. the
// episode shapes follow the method unless set explicitly).
const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> table{
      {"method", "prototypical"},
      {"episodes", ""},
      {"p_cross", "0.25"},
      {"seed", "0"},
      {"data_dir", "data"},
      {"out_dir", "runs"},
      {"synth", "false"},
      {"domains", ""},
      {"log_every", "100"},

      {"feature.ngram_orders", "2,3"},
      {"feature.n_buckets", "32768"},
      {"feature.max_tokens", "128"},
      {"feature.normalize", "true"},
      {"encoder.hidden_dim", "128"},
      {"encoder.embed_dim", "64"},

      {"episode.n_support_anom", ""},
      {"episode.n_support_norm", ""},
      {"episode.n_query_anom", ""},
      {"episode.n_query_norm", ""},

      {"protonet.lr", "1e-5"},
      {"protonet.normal_cap", "5000"},
      {"maml.inner_steps", "1"},
      {"maml.alpha_encoder", "5e-5"},
      {"maml.alpha_head", "5e-4"},
      {"maml.beta", "1e-5"},
      {"maml.clip_norm", "5"},
      {"adapt.epochs", "5"},
      {"adapt.batch_size", "32"},
      {"finetune.epochs", "5"},
      {"finetune.batch_size", "32"},
      {"finetune.lr_encoder", "1e-4"},
      {"finetune.lr_head", "1e-3"},
      {"oneclass.k_nn", "5"},
      {"oneclass.cap", "5000"},

      {"synth.n_domains", "3"},
      {"synth.normal_vocab_size", "400"},
      {"synth.shared_filler_size", "200"},
      {"synth.anomaly_vocab_size", "60"},
      {"synth.shared_anomaly_pool_size", "40"},
      {"synth.docs_per_domain", "1000"},
      {"synth.anomaly_rate", "0.05"},
      {"synth.min_len", "6"},
      {"synth.max_len", "16"},
      {"synth.seed", "7"},
      {"synth.test_anomaly_rate", "0.2"},

      {"split.train", "0.6"},
      {"split.val", "0.2"},
      {"split.test", "0.2"},
      {"preprocess.target_rate", "0.03"},
      {"preprocess.test_anomaly_rate", "0"},
      {"preprocess.text_column", "text"},
      {"preprocess.label_column", "label"},
      {"preprocess.label_map", ""},
      {"preprocess.delimiter", ","},

      {"ablate.p_values", "0,0.25,0.5"},
      {"ablate.seeds", "0,1,2,3,4"},
      {"loo.held_out", ""},
      {"loo.shots", "5"},
      {"loo.normals_per_shot", "10"},
      {"eval.checkpoints", ""},
  };
  return table;
}

constexpr std::string_view kInputPrefix = "input.";
constexpr std::string_view kLabelMapPrefix = "label_map.";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorCode::kConfig, "config '" + key + "': '" + value + "' is not " + expected);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto r = std::from_chars(value.data(), end, out);
  if (value.empty() || r.ec != std::errc{} || r.ptr != end) bad_value(key, value, "a non-negative integer");
  return out;
}

std::uint32_t parse_u32(const std::string& key, const std::string& value) {
  const std::uint64_t v = parse_u64(key, value);
  if (v > 0xffffffffULL) bad_value(key, value, "a 32-bit integer");
  return static_cast<std::uint32_t>(v);
}

double parse_double(const std::string& key, const std::string& value) {
  // strtod accepts the usual decimal and exponent forms; reject trailing junk.
  if (value.empty()) bad_value(key, value, "a number");
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || !std::isfinite(v)) bad_value(key, value, "a finite number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

std::map<std::string, int> parse_label_map(const std::string& key, const std::string& value) {
  std::map<std::string, int> out;
  for (const auto& entry : split_list(value)) {
    const auto colon = entry.rfind(':');
    if (colon == std::string::npos) bad_value(key, value, "a list of value:label pairs");
    const std::string raw = trim(entry.substr(0, colon));
    const std::string label = trim(entry.substr(colon + 1));
    if (label != "0" && label != "1") bad_value(key, value, "a map onto labels 0/1");
    out[raw] = label == "1" ? kAnomaly : kNormal;
  }
  return out;
}

}  // namespace

bool RunConfig::is_known_key(const std::string& key) {
  if (defaults().count(key)) return true;
  for (auto prefix : {kInputPrefix, kLabelMapPrefix}) {
    if (key.size() > prefix.size() && key.starts_with(prefix)) return true;
  }
  return false;
}

std::vector<std::string> RunConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : defaults()) keys.push_back(k);
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!is_known_key(key)) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  values_[key] = trim(value);
}

void RunConfig::unset(const std::string& key) { values_.erase(key); }

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kConfig, origin + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    if (!is_known_key(key)) {
      fail(ErrorCode::kConfig, origin + ":" + std::to_string(number) + ": unknown config key '" + key + "'");
    }
    set(key, stripped.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  load_text(buffer.str(), path.string());
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  if (const auto it = values_.find(key); it != values_.end()) return it->second;
  if (const auto it = defaults().find(key); it != defaults().end()) return it->second;
  return std::nullopt;
}

RunSettings RunConfig::resolve() const {
  auto value = [&](const std::string& key) { return *get(key); };
  auto u32 = [&](const std::string& key) { return parse_u32(key, value(key)); };
  auto real = [&](const std::string& key) { return parse_double(key, value(key)); };
  auto flag = [&](const std::string& key) { return parse_bool(key, value(key)); };

  RunSettings s;
  s.method = parse_method(value("method"));
  s.seed = parse_u64("seed", value("seed"));
  s.data_dir = value("data_dir");
  s.out_dir = value("out_dir");
  s.synth = flag("synth");
  s.domains = split_list(value("domains"));
  s.log_every = u32("log_every");
  if (s.log_every == 0) fail(ErrorCode::kConfig, "config 'log_every' must be >= 1");

  s.model.features.ngram_orders.clear();
  for (const auto& n : split_list(value("feature.ngram_orders"))) {
    s.model.features.ngram_orders.push_back(parse_u32("feature.ngram_orders", n));
  }
  s.model.features.n_buckets = u32("feature.n_buckets");
  s.model.features.max_tokens = u32("feature.max_tokens");
  s.model.features.normalize = flag("feature.normalize");
  s.model.features.validate();
  s.model.hidden_dim = u32("encoder.hidden_dim");
  s.model.embed_dim = u32("encoder.embed_dim");
  s.model.shape(false).validate();

  if (is_meta_method(s.method)) s.episode = method_episode_shapes(s.method);
  s.episode.p_cross = real("p_cross");
  auto override_count = [&](const char* key, std::uint32_t& field) {
    if (!value(key).empty()) field = u32(key);
  };
  override_count("episode.n_support_anom", s.episode.n_support_anom);
  override_count("episode.n_support_norm", s.episode.n_support_norm);
  override_count("episode.n_query_anom", s.episode.n_query_anom);
  override_count("episode.n_query_norm", s.episode.n_query_norm);
  s.episode.validate();

  s.protonet.lr = real("protonet.lr");
  s.protonet.normal_cap = u32("protonet.normal_cap");
  s.maml.inner_steps = u32("maml.inner_steps");
  s.maml.alpha_encoder = real("maml.alpha_encoder");
  s.maml.alpha_head = real("maml.alpha_head");
  s.maml.beta = real("maml.beta");
  s.maml.clip_norm = real("maml.clip_norm");
  if (!value("episodes").empty()) {
    s.protonet.episodes = s.maml.episodes = u32("episodes");
  }
  s.maml.validate();
  if (s.protonet.lr < 0.0) fail(ErrorCode::kConfig, "config 'protonet.lr' must be >= 0");

  s.adapt.epochs = u32("adapt.epochs");
  s.adapt.batch_size = u32("adapt.batch_size");
  s.adapt.rates = {s.maml.alpha_encoder, s.maml.alpha_head};
  if (s.adapt.batch_size == 0) fail(ErrorCode::kConfig, "config 'adapt.batch_size' must be >= 1");

  s.finetune.epochs = u32("finetune.epochs");
  s.finetune.batch_size = u32("finetune.batch_size");
  s.finetune.lr_encoder = real("finetune.lr_encoder");
  s.finetune.lr_head = real("finetune.lr_head");
  if (s.finetune.batch_size == 0) fail(ErrorCode::kConfig, "config 'finetune.batch_size' must be >= 1");
  if (s.finetune.lr_encoder < 0.0 || s.finetune.lr_head < 0.0) {
    fail(ErrorCode::kConfig, "fine-tune learning rates must be >= 0");
  }

  s.oneclass_k_nn = u32("oneclass.k_nn");
  s.oneclass_cap = u32("oneclass.cap");
  if (s.oneclass_k_nn == 0) fail(ErrorCode::kConfig, "config 'oneclass.k_nn' must be >= 1");

  auto& sc = s.synth_corpus;
  sc.n_domains = u32("synth.n_domains");
  sc.normal_vocab_size = u32("synth.normal_vocab_size");
  sc.shared_filler_size = u32("synth.shared_filler_size");
  sc.anomaly_vocab_size = u32("synth.anomaly_vocab_size");
  sc.shared_anomaly_pool_size = u32("synth.shared_anomaly_pool_size");
  sc.docs_per_domain = u32("synth.docs_per_domain");
  sc.anomaly_rate = real("synth.anomaly_rate");
  sc.min_len = u32("synth.min_len");
  sc.max_len = u32("synth.max_len");
  sc.seed = parse_u64("synth.seed", value("synth.seed"));
  sc.test_anomaly_rate = real("synth.test_anomaly_rate");

  s.split = {real("split.train"), real("split.val"), real("split.test")};
  sc.fractions = s.split;
  if (s.synth) sc.validate();
  for (double f : {s.split.train, s.split.val, s.split.test}) {
    if (!(f > 0.0)) fail(ErrorCode::kConfig, "split fractions must be positive");
  }
  if (std::abs(s.split.train + s.split.val + s.split.test - 1.0) > 1e-9) {
    fail(ErrorCode::kConfig, "split fractions must sum to 1");
  }

  s.target_rate = real("preprocess.target_rate");
  if (!(s.target_rate > 0.0 && s.target_rate < 1.0)) {
    fail(ErrorCode::kConfig, "config 'preprocess.target_rate' must be in (0, 1)");
  }
  s.preprocess_test_rate = real("preprocess.test_anomaly_rate");
  if (s.preprocess_test_rate < 0.0 || s.preprocess_test_rate >= 1.0) {
    fail(ErrorCode::kConfig, "config 'preprocess.test_anomaly_rate' must be in [0, 1)");
  }
  s.text_column = value("preprocess.text_column");
  s.label_column = value("preprocess.label_column");
  const std::string delim = value("preprocess.delimiter");
  if (delim == "\\t" || delim == "tab") {
    s.delimiter = '\t';
  } else if (delim.size() == 1) {
    s.delimiter = delim.front();
  } else {
    bad_value("preprocess.delimiter", delim, "a single character");
  }
  s.default_label_map = parse_label_map("preprocess.label_map", value("preprocess.label_map"));
  for (const auto& [key, v] : values_) {
    if (key.starts_with(kInputPrefix)) {
      s.inputs[key.substr(kInputPrefix.size())] = v;
    } else if (key.starts_with(kLabelMapPrefix)) {
      s.label_maps[key.substr(kLabelMapPrefix.size())] = parse_label_map(key, v);
    }
  }

  for (const auto& p : split_list(value("ablate.p_values"))) {
    const double x = parse_double("ablate.p_values", p);
    if (x < 0.0 || x > 1.0) fail(ErrorCode::kConfig, "ablate.p_values entries must be in [0, 1]");
    s.ablate_p_values.push_back(x);
  }
  for (const auto& v : split_list(value("ablate.seeds"))) s.ablate_seeds.push_back(parse_u64("ablate.seeds", v));
  s.loo_held_out = value("loo.held_out");
  s.loo_shots = u32("loo.shots");
  s.loo_normals_per_shot = u32("loo.normals_per_shot");
  if (s.loo_shots == 0) fail(ErrorCode::kConfig, "config 'loo.shots' must be >= 1");
  for (const auto& p : split_list(value("eval.checkpoints"))) s.eval_checkpoints.emplace_back(p);
  return s;
}

std::string RunConfig::snapshot_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : defaults()) j[k] = v;
  for (const auto& [k, v] : values_) j[k] = v;
  return j.dump();
}

}  // namespace fsad
