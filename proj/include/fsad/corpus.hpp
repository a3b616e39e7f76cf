#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fsad {

inline constexpr int kNormal = 0;
inline constexpr int kAnomaly = 1;

struct TextRecord {
  std::string text;
  int label = kNormal;  // kNormal or kAnomaly
  std::string domain;

  bool operator==(const TextRecord&) const = default;
};

struct DomainDataset {
  std::string domain;
  std::vector<TextRecord> train;
  std::vector<TextRecord> val;
  std::vector<TextRecord> test;
};

struct ClassCounts {
  std::size_t normal = 0;
  std::size_t anomaly = 0;

  std::size_t total() const { return normal + anomaly; }
  double anomaly_rate() const {
    return total() == 0 ? 0.0 : static_cast<double>(anomaly) / static_cast<double>(total());
  }
};

ClassCounts count_classes(std::span<const TextRecord> records);

// NFC normalization followed by full Unicode lowercasing (root locale).
// Punctuation, URLs and mentions are left untouched.
std::string normalize_text(std::string_view text);

struct CsvSource {
  std::filesystem::path path;
  std::string domain;
  std::string text_column = "text";
  std::string label_column = "label";
  std::map<std::string, int> label_map;  // raw label value -> kNormal/kAnomaly
  char delimiter = ',';
};

// Each row becomes a normalized TextRecord. Fails on a missing file or
// column, an unmapped label (the message names the data row), or an empty
// file.
std::vector<TextRecord> load_csv(const CsvSource& source);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

// Per-class shuffle followed by largest-remainder allocation of each class
// over the three splits. Every split must receive both classes.
DomainDataset split_stratified(std::span<const TextRecord> records, SplitFractions fractions,
                               std::uint64_t seed);

// Keeps every normal and round(rate * n_normal / (1 - rate)) anomalies chosen
// uniformly without replacement. Returns the input unchanged when the split
// is already at or below the target rate.
std::vector<TextRecord> downsample_anomalies(std::span<const TextRecord> split,
                                             double target_rate, std::uint64_t seed);

// Raises the anomaly share of a split to target_rate by dropping normals
// (never adds records). Lower targets defer to downsample_anomalies.
std::vector<TextRecord> rebalance_to_rate(std::span<const TextRecord> split, double target_rate,
                                          std::uint64_t seed);

// Processed split files: "<dir>/<domain>_{train,val,test}.csv" with header
// "text,label" and 0/1 labels.
void write_split_csv(const std::filesystem::path& path, std::span<const TextRecord> records);
std::vector<TextRecord> read_split_csv(const std::filesystem::path& path, const std::string& domain);
void write_domain(const std::filesystem::path& dir, const DomainDataset& dataset);
DomainDataset read_domain(const std::filesystem::path& dir, const std::string& domain);

// Domains that have a "<domain>_train.csv" file in dir, sorted by name.
std::vector<std::string> discover_domains(const std::filesystem::path& dir);

struct SynthConfig {
  std::uint32_t n_domains = 3;
  std::uint32_t normal_vocab_size = 400;
  std::uint32_t shared_filler_size = 200;
  std::uint32_t anomaly_vocab_size = 60;
  std::uint32_t shared_anomaly_pool_size = 40;
  std::uint32_t docs_per_domain = 1000;
  double anomaly_rate = 0.05;
  std::uint32_t min_len = 6;
  std::uint32_t max_len = 16;
  std::uint64_t seed = 7;
  SplitFractions fractions{};
  // 0 leaves the test split at the stratified rate.
  double test_anomaly_rate = 0.0;

  void validate() const;
};

struct SyntheticVocabulary {
  std::vector<std::vector<std::string>> normal;   // per domain
  std::vector<std::vector<std::string>> anomaly;  // per domain
  std::vector<std::string> filler;
  std::vector<std::string> shared_anomaly_pool;
};

inline constexpr double kSynthNormalVocabShare = 0.7;
inline constexpr double kSynthAnomalyVocabShare = 0.4;
inline constexpr double kSynthSharedPoolFraction = 0.4;

SyntheticVocabulary build_synthetic_vocabulary(const SynthConfig& config);

std::string synthetic_domain_name(std::uint32_t index);

// Raw per-domain records, before splitting.
std::vector<std::vector<TextRecord>> generate_synthetic_records(const SynthConfig& config);

// Records split 60/20/20 per domain, test optionally rebalanced.
std::vector<DomainDataset> generate_synthetic(const SynthConfig& config);

}  // namespace fsad
