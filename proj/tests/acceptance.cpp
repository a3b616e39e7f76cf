// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit code 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fsad/baselines.hpp"
#include "fsad/checkpoint.hpp"
#include "fsad/error.hpp"
#include "fsad/experiments.hpp"
#include "fsad/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fsad;
using fsad::testing::ExampleStore;

namespace {

// Tolerances and bounds.
constexpr double kGradTolerance = 1e-4;
constexpr double kFdStep = 1e-4;
constexpr int kGradConfigs = 25;
constexpr double kKinkMargin = 1e-2;
constexpr double kGradSeconds = 30.0;

constexpr int kMetricInstances = 100;
constexpr double kMetricTolerance = 1e-12;
constexpr double kMetricSeconds = 10.0;

constexpr int kSamplerEpisodes = 10000;
constexpr double kCrossLow = 0.225;
constexpr double kCrossHigh = 0.275;
constexpr double kSamplerSeconds = 10.0;

constexpr int kSeeds = 5;
// Margin thresholds frozen from the reference run: observed mean margin minus
// two sample standard deviations of the per-seed margins. A margin must also
// be strictly positive, which is what binds when the frozen value is negative.
//   protonet - oneclass: 0.2713 - 2 * 0.0131
//   protonet - finetune: 0.0633 - 2 * 0.0187
//   p_cross 0.25 - p_cross 0 (held-out AUC): 0.0105 - 2 * 0.0378
constexpr double kMinMargin = 1e-9;
constexpr double kOneClassMargin = 0.2451;
constexpr double kFineTuneMargin = 0.0259;
constexpr double kCrossDomainMargin = -0.0651;
constexpr double kDirectionSeconds = 600.0;
constexpr double kLeaveOneOutSeconds = 900.0;

constexpr double kSmsRateLow = 0.028;
constexpr double kSmsRateHigh = 0.031;

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// The reference synthetic corpus and training settings for criteria 4 and 5.
RunConfig reference_config() {
  RunConfig c;
  c.set("synth", "true");
  c.set("synth.normal_vocab_size", "2000");
  c.set("synth.shared_filler_size", "500");
  c.set("synth.anomaly_vocab_size", "150");
  c.set("synth.shared_anomaly_pool_size", "100");
  c.set("protonet.lr", "1e-3");
  c.set("episodes", "1000");
  return c;
}

Outcome gradient_check() {
  Rng rng(20240601);
  double worst_proto = 0.0;
  double worst_bce = 0.0;
  int proto_done = 0;
  int bce_done = 0;
  while (proto_done < kGradConfigs || bce_done < kGradConfigs) {
    const bool proto = proto_done < kGradConfigs;
    const auto b = static_cast<std::uint32_t>(8 + rng.below(57));
    const auto h = static_cast<std::uint32_t>(1 + rng.below(8));
    const auto d = static_cast<std::uint32_t>(1 + rng.below(4));
    EncoderParams p(EncoderShape{b, h, d, !proto});
    fsad::testing::randomize(p, rng);
    ExampleStore store;
    std::vector<SparseFeatures> xs;
    auto add = [&](std::vector<ExampleRef>& set, int label) {
      xs.push_back(fsad::testing::random_sparse(b, 1 + rng.below(6), rng));
      set.push_back(store.add(xs.back(), label));
    };
    Episode ep;
    std::vector<ExampleRef> batch;
    if (proto) {
      const std::size_t n_sn = 1 + rng.below(3);
      const std::size_t n_sa = 1 + rng.below(3);
      for (std::size_t i = 0; i < n_sn; ++i) add(ep.support, kNormal);
      for (std::size_t i = 0; i < n_sa; ++i) add(ep.support, kAnomaly);
      add(ep.query, kNormal);
      add(ep.query, kAnomaly);
    } else {
      const std::size_t n = 2 + rng.below(5);
      for (std::size_t i = 0; i < n; ++i) add(batch, i == 0 ? kAnomaly : static_cast<int>(rng.below(2)));
    }
    if (fsad::testing::kink_margin(xs, p) < kKinkMargin) continue;

    Gradients g(p.shape());
    Gradients scratch(p.shape());
    if (proto) {
      episode_loss_and_grads(ep, p, g);
      auto loss = [&](const EncoderParams& q) { return episode_loss_and_grads(ep, q, scratch); };
      worst_proto = std::max(worst_proto, fsad::testing::max_fd_error(p, g, loss, kFdStep));
      ++proto_done;
    } else {
      const double w = 0.5 + 5.0 * rng.uniform();
      weighted_bce_loss_and_grads(batch, p, w, g);
      auto loss = [&](const EncoderParams& q) { return weighted_bce_loss_and_grads(batch, q, w, scratch); };
      worst_bce = std::max(worst_bce, fsad::testing::max_fd_error(p, g, loss, kFdStep));
      ++bce_done;
    }
  }
  Outcome o;
  o.pass = worst_proto <= kGradTolerance && worst_bce <= kGradTolerance;
  o.detail = "max rel err protonet " + fmt("%.2e", worst_proto) + ", weighted BCE " + fmt("%.2e", worst_bce) +
             " over " + std::to_string(kGradConfigs) + "+" + std::to_string(kGradConfigs) +
             " configs (tol " + fmt("%.0e", kGradTolerance) + ")";
  return o;
}

Outcome metric_oracles() {
  Rng rng(77);
  std::vector<double> s;
  std::vector<int> y;
  double auc_err = 0.0;
  double ap_err = 0.0;
  int threshold_mismatch = 0;
  for (int i = 0; i < kMetricInstances; ++i) {
    fsad::testing::random_instance(rng, s, y);
    auc_err = std::max(auc_err, std::abs(roc_auc(s, y) - fsad::testing::auc_by_pairs(s, y)));
    fsad::testing::random_instance(rng, s, y);
    ap_err = std::max(ap_err, std::abs(average_precision(s, y) - fsad::testing::ap_by_cuts(s, y)));
    fsad::testing::random_instance(rng, s, y);
    threshold_mismatch += select_threshold_max_f1(s, y) != fsad::testing::best_threshold_by_sweep(s, y);
  }
  Outcome o;
  o.pass = auc_err <= kMetricTolerance && ap_err <= kMetricTolerance && threshold_mismatch == 0;
  o.detail = "AUC err " + fmt("%.1e", auc_err) + ", AP err " + fmt("%.1e", ap_err) + ", threshold mismatches " +
             std::to_string(threshold_mismatch) + " over " + std::to_string(kMetricInstances) + " instances each";
  return o;
}

Outcome sampler_distribution() {
  ExampleStore store;
  std::vector<DomainPool> pools(3);
  for (std::size_t d = 0; d < pools.size(); ++d) {
    pools[d].domain = std::string(1, static_cast<char>('A' + d));
    for (int i = 0; i < 40; ++i) pools[d].normals.push_back(store.add({}, kNormal, pools[d].domain));
    for (int i = 0; i < 40; ++i) pools[d].anomalies.push_back(store.add({}, kAnomaly, pools[d].domain));
  }
  EpisodeConfig config;
  config.p_cross = 0.25;
  Rng rng(2024);
  PairCursor cursor;
  std::map<std::pair<std::string, std::string>, int> visits;
  int cross = 0;
  for (int e = 0; e < kSamplerEpisodes; ++e) {
    const Episode ep = sample_episode(pools, config, rng, cursor);
    if (ep.is_cross_domain) {
      ++cross;
      ++visits[{ep.normal_domain, ep.anomaly_domain}];
    }
  }
  int lo = kSamplerEpisodes;
  int hi = 0;
  for (const auto& [pair, n] : visits) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  const double fraction = static_cast<double>(cross) / kSamplerEpisodes;
  Outcome o;
  o.pass = fraction >= kCrossLow && fraction <= kCrossHigh && visits.size() == 6 && hi - lo <= 1;
  o.detail = "cross fraction " + fmt("%.4f", fraction) + ", pair visits " + std::to_string(lo) + ".." +
             std::to_string(hi) + " over " + std::to_string(visits.size()) + " ordered pairs";
  return o;
}

double mean_auc(const std::vector<DomainMetrics>& rows) {
  double s = 0.0;
  for (const auto& r : rows) s += r.metrics.auc;
  return s / static_cast<double>(rows.size());
}

Outcome direction_of_effect() {
  const RunConfig config = reference_config();
  const RunSettings base = config.resolve();
  const auto domains = load_domains(base);
  std::vector<double> proto, oneclass, finetune, m_oc, m_ft;
  for (int seed = 0; seed < kSeeds; ++seed) {
    auto run = [&](Method m) {
      RunSettings s = base;
      s.method = m;
      return mean_auc(train_and_evaluate(s, domains, static_cast<std::uint64_t>(seed)));
    };
    proto.push_back(run(Method::kPrototypical));
    oneclass.push_back(run(Method::kOneClass));
    finetune.push_back(run(Method::kFineTune));
    m_oc.push_back(proto.back() - oneclass.back());
    m_ft.push_back(proto.back() - finetune.back());
  }
  const double oc = mean_of(m_oc);
  const double ft = mean_of(m_ft);
  Outcome o;
  o.pass = oc > std::max(kMinMargin, kOneClassMargin) && ft > std::max(kMinMargin, kFineTuneMargin);
  o.detail = "mean AUC protonet " + fmt("%.4f", mean_of(proto)) + ", oneclass " + fmt("%.4f", mean_of(oneclass)) +
             ", finetune " + fmt("%.4f", mean_of(finetune)) + "; margins " + fmt("%.4f", oc) + " (sd " +
             fmt("%.4f", sample_std(m_oc)) + ", need > " + fmt("%.4f", std::max(kMinMargin, kOneClassMargin)) +
             "), " + fmt("%.4f", ft) + " (sd " + fmt("%.4f", sample_std(m_ft)) + ", need > " +
             fmt("%.4f", std::max(kMinMargin, kFineTuneMargin)) + ")";
  return o;
}

Outcome cross_domain_benefit() {
  const RunSettings base = reference_config().resolve();
  const auto domains = load_domains(base);
  std::vector<double> with_cross, without, margins;
  for (int seed = 0; seed < kSeeds; ++seed) {
    double a = 0.0;
    double b = 0.0;
    for (const auto& d : domains) {
      RunSettings s = base;
      s.episode.p_cross = 0.25;
      a += leave_one_out(s, domains, d.domain, s.loo_shots, static_cast<std::uint64_t>(seed)).adapted.auc;
      s.episode.p_cross = 0.0;
      b += leave_one_out(s, domains, d.domain, s.loo_shots, static_cast<std::uint64_t>(seed)).adapted.auc;
    }
    with_cross.push_back(a / static_cast<double>(domains.size()));
    without.push_back(b / static_cast<double>(domains.size()));
    margins.push_back(with_cross.back() - without.back());
  }
  const double m = mean_of(margins);
  const double need = std::max(kMinMargin, kCrossDomainMargin);
  Outcome o;
  o.pass = m > need;
  o.detail = "held-out AUC p_cross=0.25 " + fmt("%.4f", mean_of(with_cross)) + ", p_cross=0 " +
             fmt("%.4f", mean_of(without)) + "; margin " + fmt("%.4f", m) + " (sd " + fmt("%.4f", sample_std(margins)) +
             ", need > " + fmt("%.4f", need) + ")";
  return o;
}

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string line;
  std::getline(in, line);
  return line;
}

Outcome sms_preprocess() {
  const char* env = std::getenv("FSAD_SMS_CSV");
  std::filesystem::path path = env ? env : "";
  Outcome o;
  if (path.empty() || !std::filesystem::exists(path)) {
    o.skipped = true;
    o.detail = "SMS corpus not found (set FSAD_SMS_CSV)";
    return o;
  }
  const auto work = std::filesystem::temp_directory_path() / "fsad_acceptance_sms";
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);
  RunConfig c;
  const std::string head = first_line(path);
  if (head.rfind("ham\t", 0) == 0 || head.rfind("spam\t", 0) == 0) {
    // Raw tab-separated collection without a header row.
    const auto with_header = work / "sms.tsv";
    std::ofstream out(with_header, std::ios::binary);
    out << "label\ttext\n" << std::ifstream(path, std::ios::binary).rdbuf();
    path = with_header;
    c.set("preprocess.delimiter", "tab");
  } else if (head.rfind("v1,v2", 0) == 0) {
    c.set("preprocess.label_column", "v1");
    c.set("preprocess.text_column", "v2");
  }
  c.set("input.sms", path.string());
  c.set("label_map.sms", "ham:0,spam:1");
  c.set("data_dir", (work / "data").string());
  std::size_t raw_normals = 0;
  {
    const RunSettings s = c.resolve();
    CsvSource src{s.inputs.at("sms"), "sms", s.text_column, s.label_column, s.label_maps.at("sms"), s.delimiter};
    raw_normals = count_classes(load_csv(src)).normal;
  }
  cmd_preprocess(c);
  const auto ds = read_domain(work / "data", "sms");
  const auto train = count_classes(ds.train);
  const std::size_t normals = train.normal + count_classes(ds.val).normal + count_classes(ds.test).normal;
  const double rate = train.anomaly_rate();
  o.pass = rate >= kSmsRateLow && rate <= kSmsRateHigh && normals == raw_normals;
  o.detail = "train anomaly rate " + fmt("%.4f", rate) + " (" + std::to_string(train.anomaly) + "/" +
             std::to_string(train.normal + train.anomaly) + "), normals kept " + std::to_string(normals) + "/" +
             std::to_string(raw_normals);
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto work = std::filesystem::temp_directory_path() / "fsad_acceptance_determinism";
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const char* method : {"prototypical", "maml", "oneclass", "finetune"}) {
    RunConfig c;
    c.set("synth", "true");
    c.set("method", method);
    c.set("episodes", "200");
    c.set("seed", "11");
    c.set("out_dir", work.string());
    std::vector<std::vector<std::string>> runs;
    std::vector<std::filesystem::path> files;
    for (int run = 0; run < 2; ++run) {
      std::filesystem::remove_all(work);
      auto trained = cmd_train(c);
      auto evaluated = cmd_eval(c);
      files = trained.files;
      files.insert(files.end(), evaluated.files.begin(), evaluated.files.end());
      std::vector<std::string> bytes;
      for (const auto& f : files) bytes.push_back(slurp(f));
      runs.push_back(std::move(bytes));
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      ++compared;
      if (runs[0][i] != runs[1][i] || runs[0][i].empty()) differing.push_back(files[i].filename().string());
    }
  }
  Outcome o;
  o.pass = differing.empty();
  o.detail = std::to_string(compared) + " checkpoint/log/report files compared across two runs";
  for (const auto& d : differing) o.detail += ", differs: " + d;
  return o;
}

// The hand-checkable examples, re-run as a block.
Outcome trivial_cases() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* name) {
    if (!ok) failed.push_back(name);
  };
  auto approx = [](double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; };

  {
    ExampleStore store;
    Rng rng(1);
    Episode ep;
    for (int i = 0; i < 3; ++i) ep.support.push_back(store.add(fsad::testing::random_sparse(32, 3, rng), i % 2));
    for (int i = 0; i < 4; ++i) ep.query.push_back(store.add(fsad::testing::random_sparse(32, 3, rng), i % 2));
    const EncoderParams zero(EncoderShape{32, 4, 3, false});
    Gradients g(zero.shape());
    check(approx(episode_loss_and_grads(ep, zero, g), std::log(2.0)), "ln 2 episode loss at equidistance");
  }
  {
    const std::vector<std::vector<double>> z{{0, 0}, {2, 0}, {7, 3}};
    const std::vector<int> y{kNormal, kNormal, kAnomaly};
    const Prototypes p = compute_prototypes(z, y);
    check(p.anomaly == std::vector<double>{7, 3}, "prototype of one");
    check(p.normal == std::vector<double>{1, 0}, "mean of two normals");
    check(squared_distance(std::vector<double>{3, 4}, std::vector<double>{0, 0}) == 25.0, "3-4-5 distance");
    check(protonet_score(std::vector<double>{1, 1}, Prototypes{{0, 0}, {2, 2}, 1, 1}) == 0.0,
          "equidistant score 0");
  }
  {
    Gradients g(EncoderShape{8, 2, 2, false});
    auto v = g.mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 6.0;
    v[1] = 8.0;
    clip_gradients(g, 5.0);
    check(approx(g.values()[0], 3.0) && approx(g.values()[1], 4.0), "clip norm 10 to 5");
    clip_gradients(g, 5.0);
    check(approx(g.values()[0], 3.0), "clip below max is a no-op");
  }
  {
    ExampleStore store;
    Rng rng(2);
    Episode ep;
    for (auto* set : {&ep.support, &ep.query}) {
      for (int i = 0; i < 6; ++i) set->push_back(store.add(fsad::testing::random_sparse(32, 3, rng), i < 2));
    }
    const EncoderShape shape{32, 4, 3, true};
    EncoderParams p = init_params(shape, 3);
    const EncoderParams before = p;
    AdamState adam(shape);
    MamlConfig config;
    config.beta = 0.0;
    MamlWorkspace ws(shape);
    meta_step(ep, p, adam, config, ws);
    check(p == before, "FOMAML beta 0 no-op");
  }
  {
    check(roc_auc(std::vector<double>{1, 1, 1, 1}, std::vector<int>{1, 0, 1, 0}) == 0.5, "AUC all tied");
    check(roc_auc(std::vector<double>{3, 2, 1, 0}, std::vector<int>{1, 1, 0, 0}) == 1.0, "AUC separated");
    check(average_precision(std::vector<double>{1, 1, 1, 1, 1}, std::vector<int>{1, 0, 0, 0, 0}) == 0.2,
          "AP of constant scores is the prevalence");
    const auto c = confusion_at(std::vector<double>{0.9, 0.2, 0.6}, std::vector<int>{1, 0, 0}, 2.0);
    check(c.recall == 0.0 && c.f1 == 0.0, "threshold above max");
  }
  {
    FeatureConfig f;
    f.ngram_orders = {2};
    f.n_buckets = 1024;
    const auto x = featurize("ab", f);
    check(x.nnz() == 1 && approx(x.values[0], 1.0), "single bigram weight 1");
    check(featurize("", f).empty(), "empty text");
    check(downsample_anomalies(fsad::testing::make_records(100, 2), 0.03, 1) ==
              fsad::testing::make_records(100, 2),
          "downsample no-op below target");
  }
  {
    Checkpoint c;
    c.features.n_buckets = 1024;
    c.params = init_params(EncoderShape{1024, 4, 2, true}, 5);
    check(deserialize_checkpoint(serialize_checkpoint(c)) == c, "checkpoint round trip");
    std::string bytes = serialize_checkpoint(c);
    bytes[1] = 'x';
    bool format_error = false;
    try {
      deserialize_checkpoint(bytes);
    } catch (const Error& e) {
      format_error = e.code() == ErrorCode::kFormat;
    }
    check(format_error, "corrupted magic");
  }
  {
    bool threw = false;
    try {
      method_episode_shapes("matching");
    } catch (const Error&) {
      threw = true;
    }
    check(threw, "unknown method name");
  }

  Outcome o;
  o.pass = failed.empty();
  o.detail = "spot checks of the hand-derived cases (the unit suite runs the full set)";
  for (const auto& f : failed) o.detail += "; failed: " + f;
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double max_seconds;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_check, kGradSeconds},
      {2, "metric oracle equivalence", metric_oracles, kMetricSeconds},
      {3, "sampler distribution", sampler_distribution, kSamplerSeconds},
      {4, "meta-learning beats baselines", direction_of_effect, kDirectionSeconds},
      {5, "cross-domain sampling benefit", cross_domain_benefit, kLeaveOneOutSeconds},
      {6, "preprocessing reproduction", sms_preprocess, 0.0},
      {7, "determinism", determinism, 0.0},
      {8, "trivial-case suite", trivial_cases, 0.0},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.max_seconds > 0.0 && secs > c.max_seconds && !o.skipped) {
      o.pass = false;
      o.detail += "; runtime over " + fmt("%.0f", c.max_seconds) + " s";
    }
    const char* verdict = o.skipped ? "SKIP" : o.pass ? "PASS" : "FAIL";
    if (!o.skipped && !o.pass) ++failures;
    std::printf("%s [%d] %s: %s (%.1f s)\n", verdict, c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
