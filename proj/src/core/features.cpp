#include "fsad/features.hpp"

#include <algorithm>
#include <cmath>

#include "fsad/error.hpp"

namespace fsad {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Byte offsets of every codepoint start plus the end offset. Stray
// continuation bytes count as their own character.
std::vector<std::size_t> codepoint_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto byte = static_cast<unsigned char>(text[i]);
    if ((byte & 0xC0) != 0x80 || offsets.empty() ||
        i - offsets.back() >= 4) {
      offsets.push_back(i);
    }
  }
  offsets.push_back(text.size());
  return offsets;
}

}  // namespace

void FeatureConfig::validate() const {
  if (ngram_orders.empty()) fail(ErrorCode::kConfig, "features: ngram_orders must not be empty");
  for (auto n : ngram_orders) {
    if (n == 0) fail(ErrorCode::kConfig, "features: n-gram order must be >= 1");
  }
  if (!is_power_of_two(n_buckets) || n_buckets < (1u << 10)) {
    fail(ErrorCode::kConfig, "features: n_buckets must be a power of two >= 1024");
  }
}

double SparseFeatures::squared_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens) noexcept {
  if (max_tokens == 0) return text;
  std::size_t tokens = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (++tokens == max_tokens) return text.substr(0, i);
  }
  return text;
}

SparseFeatures featurize(std::string_view text, const FeatureConfig& config) {
  if (!is_power_of_two(config.n_buckets)) {
    fail(ErrorCode::kInvalidArgument, "featurize: n_buckets must be a power of two");
  }
  const std::string_view kept = truncate_tokens(text, config.max_tokens);
  const auto offsets = codepoint_offsets(kept);
  const std::size_t n_chars = offsets.size() - 1;
  const std::uint64_t mask = config.n_buckets - 1;

  std::vector<std::uint32_t> hits;
  for (std::uint32_t n : config.ngram_orders) {
    if (n == 0 || n > n_chars) continue;
    for (std::size_t start = 0; start + n <= n_chars; ++start) {
      const std::string_view gram = kept.substr(offsets[start], offsets[start + n] - offsets[start]);
      hits.push_back(static_cast<std::uint32_t>(fnv1a64(gram) & mask));
    }
  }
  std::sort(hits.begin(), hits.end());

  SparseFeatures out;
  out.dimension = config.n_buckets;
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    while (j < hits.size() && hits[j] == hits[i]) ++j;
    out.indices.push_back(hits[i]);
    out.values.push_back(std::log1p(static_cast<double>(j - i)));
    i = j;
  }
  if (config.normalize) l2_normalize(out);
  return out;
}

void l2_normalize(SparseFeatures& x) {
  const double norm = std::sqrt(x.squared_norm());
  if (norm == 0.0) return;
  for (double& v : x.values) v /= norm;
}

double squared_distance(const SparseFeatures& a, const SparseFeatures& b) {
  double s = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.nnz() || j < b.nnz()) {
    double d;
    if (j == b.nnz() || (i < a.nnz() && a.indices[i] < b.indices[j])) {
      d = a.values[i++];
    } else if (i == a.nnz() || b.indices[j] < a.indices[i]) {
      d = b.values[j++];
    } else {
      d = a.values[i++] - b.values[j++];
    }
    s += d * d;
  }
  return s;
}

}  // namespace fsad
