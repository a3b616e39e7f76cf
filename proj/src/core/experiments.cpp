#include "fsad/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "fsad/error.hpp"
#include "fsad/rng.hpp"

namespace fsad {

namespace {

using nlohmann::json;

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

json metrics_json(const MetricsReport& m) {
  return json{{"auc", m.auc},           {"ap", m.ap},   {"precision", m.precision},
              {"recall", m.recall},     {"f1", m.f1},   {"threshold", m.threshold},
              {"n_pos", m.n_pos},       {"n_neg", m.n_neg}};
}

json counts_json(std::span<const TextRecord> split) {
  const ClassCounts c = count_classes(split);
  return json{{"normal", c.normal}, {"anomaly", c.anomaly}, {"anomaly_rate", c.anomaly_rate()}};
}

json splits_json(std::span<const DomainDataset> domains) {
  json rows = json::array();
  for (const auto& d : domains) {
    rows.push_back({{"domain", d.domain},
                    {"total", d.train.size() + d.val.size() + d.test.size()},
                    {"train", counts_json(d.train)},
                    {"val", counts_json(d.val)},
                    {"test", counts_json(d.test)}});
  }
  return rows;
}

std::string method_name(Method m) { return std::string(to_string(m)); }

std::filesystem::path meta_checkpoint_path(const RunSettings& s) {
  return s.out_dir / (method_name(s.method) + ".ckpt");
}

std::filesystem::path baseline_checkpoint_path(const RunSettings& s, const std::string& domain) {
  return s.out_dir / (method_name(s.method) + "_" + domain + ".ckpt");
}

const DomainDataset& find_domain(std::span<const DomainDataset> domains, const std::string& name) {
  for (const auto& d : domains) {
    if (d.domain == name) return d;
  }
  fail(ErrorCode::kConfig, "unknown domain '" + name + "'");
}

void require_meta(Method method, const char* command) {
  if (!is_meta_method(method)) {
    fail(ErrorCode::kConfig, std::string(command) + " needs a meta-learning method (prototypical or maml)");
  }
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::vector<DomainDataset> load_domains(const RunSettings& settings) {
  std::vector<DomainDataset> all;
  if (settings.synth) {
    all = generate_synthetic(settings.synth_corpus);
  } else {
    std::vector<std::string> names = settings.domains;
    if (names.empty()) names = discover_domains(settings.data_dir);
    if (names.empty()) {
      fail(ErrorCode::kIo, "no processed splits found in '" + settings.data_dir.string() +
                               "' (run preprocess or pass --synth)");
    }
    for (const auto& n : names) all.push_back(read_domain(settings.data_dir, n));
    return all;
  }
  if (settings.domains.empty()) return all;
  std::vector<DomainDataset> picked;
  for (const auto& n : settings.domains) picked.push_back(find_domain(all, n));
  return picked;
}

TrainOutcome train_meta(const RunSettings& settings, std::span<const DomainDataset> domains,
                        std::uint64_t seed) {
  require_meta(settings.method, "meta-training");
  if (settings.method == Method::kPrototypical) {
    return train_protonet(domains, settings.model, settings.protonet, settings.episode, seed);
  }
  return train_maml(domains, settings.model, settings.maml, settings.episode, seed);
}

TrainOutcome train_baseline(const RunSettings& settings, const DomainDataset& domain,
                            std::uint64_t seed) {
  TrainOutcome out;
  if (settings.method == Method::kOneClass) {
    std::vector<std::string> normals;
    for (const auto& r : domain.train) {
      if (r.label == kNormal) normals.push_back(r.text);
    }
    out.checkpoint = to_checkpoint(fit_oneclass(normals, settings.model.features,
                                                settings.oneclass_k_nn, mix_seed(seed, 33),
                                                settings.oneclass_cap));
    out.checkpoint.seed = seed;
  } else if (settings.method == Method::kFineTune) {
    out = train_supervised_finetune(domain.train, settings.model, settings.finetune, seed);
  } else {
    fail(ErrorCode::kConfig, "per-domain training needs the oneclass or finetune method");
  }
  out.checkpoint.domain = domain.domain;
  return out;
}

DetectorFitOptions fit_options(const RunSettings& settings, std::uint64_t seed) {
  DetectorFitOptions o;
  o.adapt = settings.adapt;
  o.normal_cap = settings.protonet.normal_cap;
  o.seed = mix_seed(seed, 41);
  return o;
}

std::string format_training_log(const TrainingLog& log, Method method, std::uint32_t log_every) {
  std::string out;
  if (!is_meta_method(method)) {
    for (std::size_t e = 0; e < log.losses.size(); ++e) {
      out += "epoch=" + std::to_string(e + 1) + " loss=" + fmt("%.6f", log.losses[e]) + "\n";
    }
    return out;
  }
  std::size_t cross = 0;
  std::size_t window_start = 0;
  for (std::size_t e = 0; e < log.losses.size(); ++e) {
    cross += log.cross_domain[e];
    const bool last = e + 1 == log.losses.size();
    if ((e + 1) % log_every != 0 && !last) continue;
    out += "episode=" + std::to_string(e + 1) +
           " loss=" + fmt("%.6f", log.mean_loss(window_start, e + 1)) +
           " cross_fraction=" + fmt("%.4f", static_cast<double>(cross) / static_cast<double>(e + 1)) +
           "\n";
    window_start = e + 1;
  }
  return out;
}

std::vector<DomainMetrics> train_and_evaluate(const RunSettings& settings,
                                              std::span<const DomainDataset> domains,
                                              std::uint64_t seed) {
  std::vector<DomainMetrics> rows;
  if (is_meta_method(settings.method)) {
    const TrainOutcome trained = train_meta(settings, domains, seed);
    for (const auto& d : domains) {
      const Detector det = Detector::fit(trained.checkpoint, d.train, fit_options(settings, seed));
      rows.push_back({d.domain, evaluate_on_domain(det, d)});
    }
    return rows;
  }
  for (const auto& d : domains) {
    const TrainOutcome trained = train_baseline(settings, d, seed);
    const Detector det = Detector::fit(trained.checkpoint, d.train, fit_options(settings, seed));
    rows.push_back({d.domain, evaluate_on_domain(det, d)});
  }
  return rows;
}

LeaveOneOutResult leave_one_out(const RunSettings& settings, std::span<const DomainDataset> domains,
                                const std::string& held_out, std::uint32_t shots,
                                std::uint64_t seed) {
  require_meta(settings.method, "leave-one-out");
  const DomainDataset& target = find_domain(domains, held_out);
  std::vector<DomainDataset> rest;
  for (const auto& d : domains) {
    if (d.domain != held_out) rest.push_back(d);
  }
  if (rest.size() < 2) {
    fail(ErrorCode::kConfig, "leave-one-out needs at least 2 remaining training domains");
  }

  std::vector<const TextRecord*> normals;
  std::vector<const TextRecord*> anomalies;
  for (const auto& r : target.train) (r.label == kAnomaly ? anomalies : normals).push_back(&r);
  if (shots > anomalies.size()) {
    fail(ErrorCode::kData, "k = " + std::to_string(shots) + " shots exceed the " +
                               std::to_string(anomalies.size()) + " anomalies in '" + held_out +
                               "' train split");
  }
  const std::size_t n_normal =
      std::min<std::size_t>(normals.size(), std::size_t{settings.loo_normals_per_shot} * shots);
  if (n_normal == 0) fail(ErrorCode::kData, "held-out train split has no normals");

  LeaveOneOutResult result;
  result.held_out = held_out;
  for (const auto& d : rest) result.train_domains.push_back(d.domain);

  Rng rng(mix_seed(seed, 51));
  std::vector<TextRecord> support;
  for (std::size_t i : rng.sample_indices(anomalies.size(), shots)) support.push_back(*anomalies[i]);
  for (std::size_t i : rng.sample_indices(normals.size(), n_normal)) support.push_back(*normals[i]);
  rng.shuffle(support);
  result.support_anomalies = shots;
  result.support_normals = n_normal;

  const TrainOutcome trained = train_meta(settings, rest, seed);
  const DetectorFitOptions options = fit_options(settings, seed);
  result.adapted = evaluate_on_domain(Detector::fit(trained.checkpoint, support, options), target);

  Prototypes source;
  if (settings.method == Method::kPrototypical) {
    std::vector<TextRecord> pooled;
    for (const auto& d : rest) pooled.insert(pooled.end(), d.train.begin(), d.train.end());
    source = fit_full_prototypes(pooled, trained.checkpoint.params, trained.checkpoint.features,
                                 options.seed, options.normal_cap);
  }
  result.unadapted = evaluate_on_domain(Detector::unadapted(trained.checkpoint, std::move(source)),
                                        target);
  return result;
}

std::string metrics_table(const std::string& method, std::span<const DomainMetrics> rows) {
  std::string out = pad("method", 14) + pad("domain", 18) + "   AUC      AP       P        R        F1\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += pad(method, 14) + pad(r.domain, 18);
    for (double v : {m.auc, m.ap, m.precision, m.recall, m.f1}) out += fmt("%9.4f", v);
    out += "\n";
  }
  return out;
}

std::string split_table(std::span<const DomainDataset> domains) {
  auto pair = [](std::span<const TextRecord> split) {
    const ClassCounts c = count_classes(split);
    return std::to_string(c.normal) + "/" + std::to_string(c.anomaly);
  };
  auto rate = [](std::span<const TextRecord> split) {
    return fmt("%.1f%%", 100.0 * count_classes(split).anomaly_rate());
  };
  std::string out = pad("dataset", 18) + pad("total", 8) + pad("train (nor./ano.)", 20) +
                    pad("train ano.", 12) + pad("val (nor./ano.)", 18) +
                    pad("test (nor./ano.)", 19) + "test ano.\n";
  for (const auto& d : domains) {
    out += pad(d.domain, 18) + pad(std::to_string(d.train.size() + d.val.size() + d.test.size()), 8) +
           pad(pair(d.train), 20) + pad(rate(d.train), 12) + pad(pair(d.val), 18) +
           pad(pair(d.test), 19) + rate(d.test) + "\n";
  }
  return out;
}

CommandResult cmd_synth(const RunConfig& config) {
  RunSettings s = config.resolve();
  s.synth_corpus.validate();
  const auto domains = generate_synthetic(s.synth_corpus);
  CommandResult result;
  for (const auto& d : domains) {
    write_domain(s.data_dir, d);
    for (const char* split : {"train", "val", "test"}) {
      result.files.push_back(s.data_dir / (d.domain + "_" + split + ".csv"));
    }
  }
  result.report_json = json{{"command", "synth"}, {"domains", splits_json(domains)}}.dump(2);
  result.table = split_table(domains);
  return result;
}

CommandResult cmd_preprocess(const RunConfig& config) {
  const RunSettings s = config.resolve();
  if (s.inputs.empty()) {
    fail(ErrorCode::kConfig, "preprocess needs at least one input (--input NAME=PATH)");
  }
  for (const auto& [domain, map] : s.label_maps) {
    if (!s.inputs.count(domain)) fail(ErrorCode::kConfig, "label map given for unknown input '" + domain + "'");
  }

  std::vector<DomainDataset> processed;
  std::uint64_t index = 0;
  for (const auto& [domain, path] : s.inputs) {
    CsvSource src;
    src.path = path;
    src.domain = domain;
    src.text_column = s.text_column;
    src.label_column = s.label_column;
    src.delimiter = s.delimiter;
    if (const auto it = s.label_maps.find(domain); it != s.label_maps.end()) {
      src.label_map = it->second;
    } else if (!s.default_label_map.empty()) {
      src.label_map = s.default_label_map;
    } else {
      src.label_map = {{"0", kNormal}, {"1", kAnomaly}};
    }
    const auto records = load_csv(src);
    DomainDataset ds = split_stratified(records, s.split, mix_seed(s.seed, 2000 + index));
    ds.domain = domain;
    ds.train = downsample_anomalies(ds.train, s.target_rate, mix_seed(s.seed, 4000 + index));
    if (s.preprocess_test_rate > 0.0) {
      ds.test = rebalance_to_rate(ds.test, s.preprocess_test_rate, mix_seed(s.seed, 3000 + index));
    }
    processed.push_back(std::move(ds));
    ++index;
  }

  CommandResult result;
  for (const auto& d : processed) {
    write_domain(s.data_dir, d);
    for (const char* split : {"train", "val", "test"}) {
      result.files.push_back(s.data_dir / (d.domain + "_" + split + ".csv"));
    }
  }
  result.report_json = json{{"command", "preprocess"},
                            {"target_rate", s.target_rate},
                            {"domains", splits_json(processed)}}
                           .dump(2);
  result.table = split_table(processed);
  return result;
}

CommandResult cmd_train(const RunConfig& config) {
  const RunSettings s = config.resolve();
  const auto domains = load_domains(s);
  const std::string snapshot = config.snapshot_json();
  CommandResult result;
  json ckpts = json::array();
  std::string log_text = "# method=" + method_name(s.method) + " seed=" + std::to_string(s.seed) + "\n";
  std::string table;

  auto store = [&](TrainOutcome& trained, const std::filesystem::path& path) {
    trained.checkpoint.config_snapshot = snapshot;
    std::filesystem::create_directories(s.out_dir);
    save_checkpoint(trained.checkpoint, path);
    result.files.push_back(path);
    const double final_loss = trained.log.losses.empty() ? 0.0 : trained.log.losses.back();
    ckpts.push_back({{"path", path.string()},
                     {"domain", trained.checkpoint.domain},
                     {"steps", trained.log.losses.size()},
                     {"final_loss", final_loss}});
    table += pad(path.filename().string(), 32) + pad(std::to_string(trained.log.losses.size()), 8) +
             fmt("%.6f", final_loss) + "\n";
  };

  if (is_meta_method(s.method)) {
    TrainOutcome trained = train_meta(s, domains, s.seed);
    log_text += format_training_log(trained.log, s.method, s.log_every);
    store(trained, meta_checkpoint_path(s));
  } else {
    for (const auto& d : domains) {
      TrainOutcome trained = train_baseline(s, d, s.seed);
      log_text += "# domain=" + d.domain + "\n" + format_training_log(trained.log, s.method, s.log_every);
      store(trained, baseline_checkpoint_path(s, d.domain));
    }
  }
  const auto log_path = s.out_dir / (method_name(s.method) + "_train.log");
  write_text(log_path, log_text);
  result.files.push_back(log_path);
  result.report_json = json{{"command", "train"}, {"method", method_name(s.method)}, {"checkpoints", ckpts}}.dump(2);
  result.table = pad("checkpoint", 32) + pad("steps", 8) + "final loss\n" + table;
  return result;
}

CommandResult cmd_eval(const RunConfig& config) {
  const RunSettings s = config.resolve();
  const auto domains = load_domains(s);

  std::vector<std::filesystem::path> paths = s.eval_checkpoints;
  if (paths.empty()) {
    if (is_meta_method(s.method)) {
      paths.push_back(meta_checkpoint_path(s));
    } else {
      for (const auto& d : domains) paths.push_back(baseline_checkpoint_path(s, d.domain));
    }
  }
  std::vector<Checkpoint> checkpoints;
  for (const auto& p : paths) checkpoints.push_back(load_checkpoint(p));

  const Method method = checkpoints.front().method;
  for (const auto& c : checkpoints) {
    if (c.method != method) fail(ErrorCode::kConfig, "checkpoints hold different methods");
  }
  if (config.has("method") && s.method != method) {
    fail(ErrorCode::kConfig, "method/checkpoint mismatch: configured " + method_name(s.method) +
                                 ", checkpoint holds " + method_name(method));
  }

  auto checkpoint_for = [&](const std::string& domain) -> const Checkpoint& {
    if (is_meta_method(method)) {
      if (checkpoints.size() != 1) fail(ErrorCode::kConfig, "meta methods evaluate a single checkpoint");
      return checkpoints.front();
    }
    for (const auto& c : checkpoints) {
      if (c.domain == domain) return c;
    }
    fail(ErrorCode::kConfig, "no " + method_name(method) + " checkpoint for domain '" + domain + "'");
  };

  std::vector<DomainMetrics> rows;
  for (const auto& d : domains) {
    const Detector det = Detector::fit(checkpoint_for(d.domain), d.train, fit_options(s, s.seed));
    rows.push_back({d.domain, evaluate_on_domain(det, d)});
  }

  json domains_json = json::array();
  for (const auto& r : rows) {
    json j = metrics_json(r.metrics);
    j["domain"] = r.domain;
    domains_json.push_back(std::move(j));
  }
  json checkpoint_names = json::array();
  for (const auto& p : paths) checkpoint_names.push_back(p.filename().string());

  CommandResult result;
  result.report_json = json{{"command", "eval"},
                            {"method", method_name(method)},
                            {"checkpoints", checkpoint_names},
                            {"domains", domains_json}}
                           .dump(2);
  const auto report_path = s.out_dir / (method_name(method) + "_eval.json");
  write_text(report_path, result.report_json + "\n");
  result.files.push_back(report_path);
  result.table = metrics_table(method_name(method), rows);
  return result;
}

CommandResult cmd_ablate(const RunConfig& config) {
  const RunSettings s = config.resolve();
  require_meta(s.method, "ablate");
  if (s.ablate_p_values.empty()) fail(ErrorCode::kConfig, "ablate needs at least one p value");
  if (s.ablate_seeds.empty()) fail(ErrorCode::kConfig, "ablate needs at least one seed");
  const auto domains = load_domains(s);

  json cells = json::array();
  std::string table = pad("p_cross", 10);
  for (const auto& d : domains) table += pad(d.domain, 22);
  table += "\n";

  for (double p : s.ablate_p_values) {
    RunSettings run = s;
    run.episode.p_cross = p;
    std::vector<std::vector<double>> aucs(domains.size());
    for (std::uint64_t seed : s.ablate_seeds) {
      const auto rows = train_and_evaluate(run, domains, seed);
      for (std::size_t i = 0; i < rows.size(); ++i) aucs[i].push_back(rows[i].metrics.auc);
    }
    table += pad(fmt("%.2f", p), 10);
    for (std::size_t i = 0; i < domains.size(); ++i) {
      const double m = mean_of(aucs[i]);
      const double sd = sample_std(aucs[i]);
      cells.push_back({{"p_cross", p},
                       {"domain", domains[i].domain},
                       {"mean_auc", m},
                       {"std_auc", sd},
                       {"aucs", aucs[i]}});
      table += pad(fmt("%.4f", m) + " +- " + fmt("%.4f", sd), 22);
    }
    table += "\n";
  }

  CommandResult result;
  result.report_json = json{{"command", "ablate"},
                            {"method", method_name(s.method)},
                            {"seeds", s.ablate_seeds},
                            {"cells", cells}}
                           .dump(2);
  const auto report_path = s.out_dir / (method_name(s.method) + "_ablate.json");
  write_text(report_path, result.report_json + "\n");
  result.files.push_back(report_path);
  result.table = table;
  return result;
}

CommandResult cmd_loo(const RunConfig& config) {
  const RunSettings s = config.resolve();
  require_meta(s.method, "loo");
  if (s.loo_held_out.empty()) fail(ErrorCode::kConfig, "loo needs a held-out domain (--held-out)");
  const auto domains = load_domains(s);
  const LeaveOneOutResult r = leave_one_out(s, domains, s.loo_held_out, s.loo_shots, s.seed);

  CommandResult result;
  result.report_json = json{{"command", "loo"},
                            {"method", method_name(s.method)},
                            {"held_out", r.held_out},
                            {"train_domains", r.train_domains},
                            {"shots", s.loo_shots},
                            {"support_anomalies", r.support_anomalies},
                            {"support_normals", r.support_normals},
                            {"p_cross", s.episode.p_cross},
                            {"adapted", metrics_json(r.adapted)},
                            {"unadapted", metrics_json(r.unadapted)}}
                           .dump(2);
  const auto report_path = s.out_dir / (method_name(s.method) + "_loo_" + r.held_out + ".json");
  write_text(report_path, result.report_json + "\n");
  result.files.push_back(report_path);
  const std::vector<DomainMetrics> rows{{r.held_out + " adapted", r.adapted},
                                        {r.held_out + " unadapted", r.unadapted}};
  result.table = metrics_table(method_name(s.method), rows);
  return result;
}

}  // namespace fsad
