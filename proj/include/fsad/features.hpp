#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace fsad {

enum class Weighting : std::uint8_t { kLogCount };

struct FeatureConfig {
  std::vector<std::uint32_t> ngram_orders{2, 3};
  std::uint32_t n_buckets = 1u << 15;
  Weighting weighting = Weighting::kLogCount;
  bool normalize = true;
  // Whitespace tokens kept before featurization; 0 disables truncation.
  std::uint32_t max_tokens = 128;

  // Enforces the production constraints (power-of-two dimension >= 2^10).
  // featurize() itself accepts any power of two so tests can force
  // collisions on tiny spaces.
  void validate() const;

  bool operator==(const FeatureConfig&) const = default;
};

// Hashed character n-gram vector. indices are strictly increasing.
struct SparseFeatures {
  std::uint32_t dimension = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  double squared_norm() const;

  bool operator==(const SparseFeatures&) const = default;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Prefix of text ending after the max_tokens-th whitespace-separated token.
std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens) noexcept;

// For every n in config.ngram_orders, slides an n-codepoint window over the
// UTF-8 text, hashes the window's bytes with FNV-1a and counts hits per
// bucket (hash mod n_buckets). weight = ln(1 + count), then optional L2
// normalization. Text shorter than every n gives the zero vector.
SparseFeatures featurize(std::string_view text, const FeatureConfig& config);

double squared_distance(const SparseFeatures& a, const SparseFeatures& b);

void l2_normalize(SparseFeatures& x);

}  // namespace fsad
