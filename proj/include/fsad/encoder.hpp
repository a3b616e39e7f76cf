#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fsad/features.hpp"

namespace fsad {

// Sparse input (B) -> ReLU hidden (H1) -> linear embedding (D), with an
// optional scalar anomaly-logit head on the embedding.
struct EncoderShape {
  std::uint32_t input_dim = 1u << 15;
  std::uint32_t hidden_dim = 128;
  std::uint32_t embed_dim = 64;
  bool has_head = false;

  void validate() const;
  bool operator==(const EncoderShape&) const = default;
};

// Offsets into the flat parameter vector. Tensor order is fixed:
//   w1 [B x H1, row per input bucket], b1 [H1], w2 [H1 x D, row per hidden
//   unit], b2 [D], head_w [D], head_b [1]
// head_w/head_b exist only when shape.has_head.
struct ParamLayout {
  explicit ParamLayout(const EncoderShape& shape);

  std::size_t w1 = 0;
  std::size_t b1 = 0;
  std::size_t w2 = 0;
  std::size_t b2 = 0;
  std::size_t head_w = 0;
  std::size_t head_b = 0;
  std::size_t total = 0;
  // First index belonging to the head group (== total without a head).
  std::size_t head_begin = 0;
};

class EncoderParams {
 public:
  EncoderParams() : shape_{0, 0, 0, false}, layout_(shape_) {}
  explicit EncoderParams(const EncoderShape& shape);  // all zeros

  const EncoderShape& shape() const { return shape_; }
  const ParamLayout& layout() const { return layout_; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::span<const double> w1_row(std::uint32_t bucket) const {
    return {data_.data() + layout_.w1 + std::size_t{bucket} * shape_.hidden_dim, shape_.hidden_dim};
  }
  std::span<double> w1_row(std::uint32_t bucket) {
    return {data_.data() + layout_.w1 + std::size_t{bucket} * shape_.hidden_dim, shape_.hidden_dim};
  }
  std::span<const double> b1() const { return {data_.data() + layout_.b1, shape_.hidden_dim}; }
  std::span<double> b1() { return {data_.data() + layout_.b1, shape_.hidden_dim}; }
  std::span<const double> w2() const {
    return {data_.data() + layout_.w2, std::size_t{shape_.hidden_dim} * shape_.embed_dim};
  }
  std::span<double> w2() {
    return {data_.data() + layout_.w2, std::size_t{shape_.hidden_dim} * shape_.embed_dim};
  }
  std::span<const double> b2() const { return {data_.data() + layout_.b2, shape_.embed_dim}; }
  std::span<double> b2() { return {data_.data() + layout_.b2, shape_.embed_dim}; }
  std::span<const double> head_w() const;
  std::span<double> head_w();
  double head_b() const;
  double& head_b();

  bool operator==(const EncoderParams& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  EncoderShape shape_{};
  ParamLayout layout_;
  std::vector<double> data_;
};

// Same layout as EncoderParams. Rows of w1 are only ever nonzero for input
// buckets that were active in some accumulated example; those rows are
// tracked so that zeroing, clipping and SGD touch O(active) memory.
class Gradients {
 public:
  Gradients() : shape_{0, 0, 0, false}, layout_(shape_) {}
  explicit Gradients(const EncoderShape& shape);

  const EncoderShape& shape() const { return shape_; }
  const ParamLayout& layout() const { return layout_; }

  std::span<const double> values() const { return data_; }
  // Full mutable view; marks every w1 row as touched.
  std::span<double> mutable_values();

  std::span<double> w1_row(std::uint32_t bucket);  // marks the row touched
  std::span<const double> w1_row(std::uint32_t bucket) const;
  std::span<double> dense_tail() {
    return {data_.data() + layout_.b1, layout_.total - layout_.b1};
  }
  std::span<const double> dense_tail() const {
    return {data_.data() + layout_.b1, layout_.total - layout_.b1};
  }
  std::span<double> b1() { return {data_.data() + layout_.b1, shape_.hidden_dim}; }
  std::span<double> w2() {
    return {data_.data() + layout_.w2, std::size_t{shape_.hidden_dim} * shape_.embed_dim};
  }
  std::span<double> b2() { return {data_.data() + layout_.b2, shape_.embed_dim}; }
  std::span<double> head_w();
  double& head_b();

  const std::vector<std::uint32_t>& touched_rows() const { return touched_; }

  void zero();
  void scale(double factor);
  double squared_norm() const;
  bool all_finite() const;

 private:
  EncoderShape shape_{};
  ParamLayout layout_;
  std::vector<double> data_;
  std::vector<std::uint8_t> row_marked_;
  std::vector<std::uint32_t> touched_;
};

// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
EncoderParams init_params(const EncoderShape& shape, std::uint64_t seed);

struct ForwardCache {
  std::vector<double> pre;     // W1^T x + b1
  std::vector<double> hidden;  // relu(pre)
  std::vector<double> z;       // embedding
};

void embed(const SparseFeatures& x, const EncoderParams& params, ForwardCache& cache);
std::vector<double> embed(const SparseFeatures& x, const EncoderParams& params);

double head_logit(std::span<const double> z, const EncoderParams& params);

// Accumulates d(logit)/d(head) * upstream into grads and writes
// d(logit)/dz * upstream into dz (overwritten).
void backward_head(std::span<const double> z, double upstream, const EncoderParams& params,
                   Gradients& grads, std::span<double> dz);

// Accumulates the gradient of <upstream, embed(x)> into grads.
void backward_embed(const SparseFeatures& x, const EncoderParams& params,
                    const ForwardCache& cache, std::span<const double> upstream, Gradients& grads);
void backward_embed(const SparseFeatures& x, const EncoderParams& params,
                    std::span<const double> upstream, Gradients& grads);

struct GroupRates {
  double encoder = 0.0;
  double head = 0.0;
};

void sgd_step(EncoderParams& params, const Gradients& grads, GroupRates rates);

struct AdamState {
  AdamState() = default;
  explicit AdamState(const EncoderShape& shape);

  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  // w1 rows whose moments may be nonzero. Rows outside this set have m = v =
  // 0 and zero gradient, for which the Adam update is exactly zero.
  std::vector<std::uint8_t> row_active;

  bool operator==(const AdamState&) const = default;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

void adam_step(EncoderParams& params, const Gradients& grads, AdamState& state, GroupRates rates);
void adam_step(EncoderParams& params, const Gradients& grads, AdamState& state, double lr);

// Rescales all gradients so that the global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_gradients(Gradients& grads, double max_norm);

double sigmoid(double x) noexcept;
// ln(1 + e^x) without overflow.
double softplus(double x) noexcept;

}  // namespace fsad
