#include "fsad/corpus.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include "fsad/csv.hpp"
#include "fsad/error.hpp"
#include "fsad/rng.hpp"

namespace fsad {

namespace {

std::vector<TextRecord> gather(std::span<const TextRecord> records,
                               const std::vector<std::size_t>& indices) {
  std::vector<TextRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(records[i]);
  return out;
}

// Largest-remainder split of n items over the given fractions. Ties in the
// fractional part go to the earlier split.
std::array<std::size_t, 3> allocate(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double quota = fractions[s] * static_cast<double>(n);
    // Snap quotas that are integral up to rounding noise.
    const double snapped = std::abs(quota - std::round(quota)) < 1e-9 ? std::round(quota) : quota;
    counts[s] = static_cast<std::size_t>(std::floor(snapped));
    remainders[s] = snapped - std::floor(snapped);
    assigned += counts[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) counts[order[k % 3]] += 1;
  return counts;
}

}  // namespace

ClassCounts count_classes(std::span<const TextRecord> records) {
  ClassCounts counts;
  for (const auto& r : records) (r.label == kAnomaly ? counts.anomaly : counts.normal) += 1;
  return counts;
}

std::string normalize_text(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) fail(ErrorCode::kInternal, "ICU NFC normalizer unavailable");

  icu::UnicodeString value = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
  value.toLower(icu::Locale::getRoot());
  icu::UnicodeString normalized = nfc->normalize(value, status);
  if (U_FAILURE(status)) fail(ErrorCode::kData, "unicode normalization failed");

  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::vector<TextRecord> load_csv(const CsvSource& source) {
  if (!std::filesystem::exists(source.path)) {
    fail(ErrorCode::kIo, "no such file: '" + source.path.string() + "'");
  }
  const auto rows = csv::read_file(source.path, source.delimiter);
  if (rows.empty()) fail(ErrorCode::kData, "'" + source.path.string() + "' is empty");

  const auto& header = rows.front();
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      fail(ErrorCode::kData, "'" + source.path.string() + "' has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t text_col = column(source.text_column);
  const std::size_t label_col = column(source.label_column);

  std::vector<TextRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    // Row numbers in messages count data rows from 1 (header excluded).
    if (row.size() <= std::max(text_col, label_col)) {
      fail(ErrorCode::kData, source.path.string() + ": row " + std::to_string(r) +
                                 " has " + std::to_string(row.size()) + " fields");
    }
    const auto mapped = source.label_map.find(row[label_col]);
    if (mapped == source.label_map.end()) {
      fail(ErrorCode::kConfig, source.path.string() + ": row " + std::to_string(r) +
                                   ": label value '" + row[label_col] +
                                   "' is not in the label map");
    }
    if (mapped->second != kNormal && mapped->second != kAnomaly) {
      fail(ErrorCode::kConfig, "label map must target 0 or 1");
    }
    records.push_back({normalize_text(row[text_col]), mapped->second, source.domain});
  }
  if (records.empty()) {
    fail(ErrorCode::kData, "'" + source.path.string() + "' has a header but no records");
  }
  return records;
}

DomainDataset split_stratified(std::span<const TextRecord> records, SplitFractions fractions,
                               std::uint64_t seed) {
  const std::array<double, 3> f{fractions.train, fractions.val, fractions.test};
  for (double x : f) {
    if (!(x > 0.0)) fail(ErrorCode::kInvalidArgument, "split fractions must be positive");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    fail(ErrorCode::kInvalidArgument, "split fractions must sum to 1");
  }

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_class[records[i].label == kAnomaly ? 1 : 0].push_back(i);
  }

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> split_indices;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    rng.shuffle(idx);
    const auto counts = allocate(idx.size(), f);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      if (counts[s] == 0) {
        static constexpr std::array<const char*, 3> kNames{"train", "val", "test"};
        fail(ErrorCode::kData, std::string("stratified split leaves no ") +
                                   (c == 0 ? "normal" : "anomaly") + " records in " +
                                   kNames[s]);
      }
      split_indices[s].insert(split_indices[s].end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                              idx.begin() + static_cast<std::ptrdiff_t>(pos + counts[s]));
      pos += counts[s];
    }
  }
  for (auto& s : split_indices) rng.shuffle(s);

  DomainDataset out;
  out.domain = records.empty() ? std::string{} : records.front().domain;
  out.train = gather(records, split_indices[0]);
  out.val = gather(records, split_indices[1]);
  out.test = gather(records, split_indices[2]);
  return out;
}

std::vector<TextRecord> downsample_anomalies(std::span<const TextRecord> split,
                                             double target_rate, std::uint64_t seed) {
  if (!(target_rate > 0.0 && target_rate < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "target anomaly rate must be in (0, 1)");
  }
  const ClassCounts counts = count_classes(split);
  if (counts.anomaly_rate() <= target_rate) return {split.begin(), split.end()};

  const double n_norm = static_cast<double>(counts.normal);
  const auto keep = static_cast<std::size_t>(std::llround(target_rate * n_norm / (1.0 - target_rate)));
  if (keep == 0) {
    fail(ErrorCode::kData, "anomaly rate " + std::to_string(target_rate) + " with " +
                               std::to_string(counts.normal) + " normals keeps no anomalies");
  }

  std::vector<std::size_t> normal_idx;
  std::vector<std::size_t> anomaly_idx;
  for (std::size_t i = 0; i < split.size(); ++i) {
    (split[i].label == kAnomaly ? anomaly_idx : normal_idx).push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen = normal_idx;
  for (std::size_t pick : rng.sample_indices(anomaly_idx.size(), keep)) {
    chosen.push_back(anomaly_idx[pick]);
  }
  rng.shuffle(chosen);
  return gather(split, chosen);
}

std::vector<TextRecord> rebalance_to_rate(std::span<const TextRecord> split, double target_rate,
                                          std::uint64_t seed) {
  if (!(target_rate > 0.0 && target_rate < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "target anomaly rate must be in (0, 1)");
  }
  const ClassCounts counts = count_classes(split);
  if (counts.anomaly == 0) fail(ErrorCode::kData, "cannot rebalance a split without anomalies");
  if (counts.anomaly_rate() >= target_rate) return downsample_anomalies(split, target_rate, seed);

  const auto keep_normals = static_cast<std::size_t>(std::llround(
      static_cast<double>(counts.anomaly) * (1.0 - target_rate) / target_rate));
  if (keep_normals == 0) fail(ErrorCode::kData, "rebalancing would remove every normal");

  std::vector<std::size_t> normal_idx;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < split.size(); ++i) {
    (split[i].label == kAnomaly ? chosen : normal_idx).push_back(i);
  }
  Rng rng(seed);
  for (std::size_t pick : rng.sample_indices(normal_idx.size(), keep_normals)) {
    chosen.push_back(normal_idx[pick]);
  }
  rng.shuffle(chosen);
  return gather(split, chosen);
}

void write_split_csv(const std::filesystem::path& path, std::span<const TextRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "text,label\n";
  for (const auto& r : records) {
    out << csv::escape(r.text) << ',' << r.label << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

std::vector<TextRecord> read_split_csv(const std::filesystem::path& path, const std::string& domain) {
  CsvSource source;
  source.path = path;
  source.domain = domain;
  source.label_map = {{"0", kNormal}, {"1", kAnomaly}};
  return load_csv(source);
}

void write_domain(const std::filesystem::path& dir, const DomainDataset& dataset) {
  write_split_csv(dir / (dataset.domain + "_train.csv"), dataset.train);
  write_split_csv(dir / (dataset.domain + "_val.csv"), dataset.val);
  write_split_csv(dir / (dataset.domain + "_test.csv"), dataset.test);
}

DomainDataset read_domain(const std::filesystem::path& dir, const std::string& domain) {
  DomainDataset d;
  d.domain = domain;
  d.train = read_split_csv(dir / (domain + "_train.csv"), domain);
  d.val = read_split_csv(dir / (domain + "_val.csv"), domain);
  d.test = read_split_csv(dir / (domain + "_test.csv"), domain);
  return d;
}

std::vector<std::string> discover_domains(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorCode::kIo, "data directory '" + dir.string() + "' does not exist");
  }
  std::set<std::string> names;
  constexpr std::string_view kSuffix = "_train.csv";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > kSuffix.size() && name.ends_with(kSuffix)) {
      names.insert(name.substr(0, name.size() - kSuffix.size()));
    }
  }
  return {names.begin(), names.end()};
}

// ---------------------------------------------------------------------------
// Synthetic corpora

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kConfig, "synth: " + what); };
  if (n_domains == 0) bad("n_domains must be >= 1");
  if (normal_vocab_size == 0 || shared_filler_size == 0 || anomaly_vocab_size == 0) {
    bad("vocabulary sizes must be positive");
  }
  if (!(anomaly_rate > 0.0 && anomaly_rate < 0.5)) bad("anomaly_rate must be in (0, 0.5)");
  if (min_len == 0 || min_len > max_len) bad("need 1 <= min_len <= max_len");
  const auto shared = static_cast<std::uint32_t>(
      std::llround(kSynthSharedPoolFraction * anomaly_vocab_size));
  if (shared > shared_anomaly_pool_size) {
    bad("shared_anomaly_pool_size must be >= " + std::to_string(shared) +
        " (40% of anomaly_vocab_size)");
  }
  if (docs_per_domain < 10) bad("docs_per_domain must be >= 10");
  if (test_anomaly_rate < 0.0 || test_anomaly_rate >= 1.0) bad("test_anomaly_rate must be in [0, 1)");
  // Unique tokens of length 3..8 over 26 letters: far beyond any sane request,
  // but keep the generator from spinning on absurd sizes.
  const std::uint64_t total =
      static_cast<std::uint64_t>(n_domains) * (normal_vocab_size + anomaly_vocab_size) +
      shared_filler_size + shared_anomaly_pool_size;
  if (total > 5'000'000) bad("requested vocabulary is too large");
}

std::string synthetic_domain_name(std::uint32_t index) {
  if (index < 26) return std::string("synth_") + static_cast<char>('a' + index);
  return "synth_" + std::to_string(index);
}

SyntheticVocabulary build_synthetic_vocabulary(const SynthConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed, 1));
  std::unordered_set<std::string> used;
  auto fresh_words = [&](std::uint32_t count) {
    std::vector<std::string> words;
    words.reserve(count);
    while (words.size() < count) {
      const auto len = 3 + rng.below(6);
      std::string w(len, 'a');
      for (auto& c : w) c = static_cast<char>('a' + rng.below(26));
      if (used.insert(w).second) words.push_back(std::move(w));
    }
    return words;
  };

  SyntheticVocabulary vocab;
  for (std::uint32_t d = 0; d < config.n_domains; ++d) {
    vocab.normal.push_back(fresh_words(config.normal_vocab_size));
  }
  vocab.filler = fresh_words(config.shared_filler_size);
  vocab.shared_anomaly_pool = fresh_words(config.shared_anomaly_pool_size);

  const auto n_shared = static_cast<std::size_t>(
      std::llround(kSynthSharedPoolFraction * config.anomaly_vocab_size));
  for (std::uint32_t d = 0; d < config.n_domains; ++d) {
    std::vector<std::string> words;
    for (std::size_t pick : rng.sample_indices(vocab.shared_anomaly_pool.size(), n_shared)) {
      words.push_back(vocab.shared_anomaly_pool[pick]);
    }
    auto own = fresh_words(config.anomaly_vocab_size - static_cast<std::uint32_t>(n_shared));
    words.insert(words.end(), own.begin(), own.end());
    vocab.anomaly.push_back(std::move(words));
  }
  return vocab;
}

std::vector<std::vector<TextRecord>> generate_synthetic_records(const SynthConfig& config) {
  const SyntheticVocabulary vocab = build_synthetic_vocabulary(config);
  std::vector<std::vector<TextRecord>> domains;

  for (std::uint32_t d = 0; d < config.n_domains; ++d) {
    Rng rng(mix_seed(config.seed, 1000 + d));
    const std::string name = synthetic_domain_name(d);
    const auto n_anom = static_cast<std::size_t>(
        std::llround(config.anomaly_rate * config.docs_per_domain));
    std::vector<int> labels(config.docs_per_domain, kNormal);
    std::fill(labels.end() - static_cast<std::ptrdiff_t>(n_anom), labels.end(), kAnomaly);
    rng.shuffle(labels);

    std::vector<TextRecord> records;
    records.reserve(labels.size());
    for (int label : labels) {
      const auto len = static_cast<std::size_t>(
          config.min_len + rng.below(config.max_len - config.min_len + 1));
      const bool anomalous = label == kAnomaly;
      const auto& signal = anomalous ? vocab.anomaly[d] : vocab.normal[d];
      const double share = anomalous ? kSynthAnomalyVocabShare : kSynthNormalVocabShare;
      auto n_signal = static_cast<std::size_t>(std::llround(share * static_cast<double>(len)));
      if (anomalous) n_signal = std::max<std::size_t>(n_signal, 1);
      n_signal = std::min(n_signal, len);

      std::vector<const std::string*> tokens;
      tokens.reserve(len);
      for (std::size_t t = 0; t < n_signal; ++t) tokens.push_back(&signal[rng.below(signal.size())]);
      for (std::size_t t = n_signal; t < len; ++t) {
        tokens.push_back(&vocab.filler[rng.below(vocab.filler.size())]);
      }
      rng.shuffle(tokens);

      std::string text;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t) text.push_back(' ');
        text += *tokens[t];
      }
      records.push_back({std::move(text), label, name});
    }
    domains.push_back(std::move(records));
  }
  return domains;
}

std::vector<DomainDataset> generate_synthetic(const SynthConfig& config) {
  auto raw = generate_synthetic_records(config);
  std::vector<DomainDataset> out;
  out.reserve(raw.size());
  for (std::uint32_t d = 0; d < raw.size(); ++d) {
    DomainDataset ds = split_stratified(raw[d], config.fractions, mix_seed(config.seed, 2000 + d));
    if (config.test_anomaly_rate > 0.0) {
      ds.test = rebalance_to_rate(ds.test, config.test_anomaly_rate, mix_seed(config.seed, 3000 + d));
    }
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace fsad
