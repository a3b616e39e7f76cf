#include "fsad/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "fsad/error.hpp"
#include "fsad/rng.hpp"

namespace fsad {

void EncoderShape::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || embed_dim == 0) {
    fail(ErrorCode::kConfig, "encoder: dimensions must be positive");
  }
}

ParamLayout::ParamLayout(const EncoderShape& shape) {
  const std::size_t b = shape.input_dim;
  const std::size_t h = shape.hidden_dim;
  const std::size_t d = shape.embed_dim;
  w1 = 0;
  b1 = w1 + b * h;
  w2 = b1 + h;
  b2 = w2 + h * d;
  head_begin = b2 + d;
  head_w = head_begin;
  head_b = head_w + (shape.has_head ? d : 0);
  total = head_b + (shape.has_head ? 1 : 0);
}

// ---------------------------------------------------------------------------

EncoderParams::EncoderParams(const EncoderShape& shape)
    : shape_(shape), layout_(shape), data_(layout_.total, 0.0) {}

std::span<const double> EncoderParams::head_w() const {
  if (!shape_.has_head) fail(ErrorCode::kInvalidArgument, "encoder has no classifier head");
  return {data_.data() + layout_.head_w, shape_.embed_dim};
}

std::span<double> EncoderParams::head_w() {
  if (!shape_.has_head) fail(ErrorCode::kInvalidArgument, "encoder has no classifier head");
  return {data_.data() + layout_.head_w, shape_.embed_dim};
}

double EncoderParams::head_b() const {
  if (!shape_.has_head) fail(ErrorCode::kInvalidArgument, "encoder has no classifier head");
  return data_[layout_.head_b];
}

double& EncoderParams::head_b() {
  if (!shape_.has_head) fail(ErrorCode::kInvalidArgument, "encoder has no classifier head");
  return data_[layout_.head_b];
}

// ---------------------------------------------------------------------------

Gradients::Gradients(const EncoderShape& shape)
    : shape_(shape), layout_(shape), data_(layout_.total, 0.0), row_marked_(shape.input_dim, 0) {}

std::span<double> Gradients::mutable_values() {
  if (touched_.size() != shape_.input_dim) {
    touched_.clear();
    for (std::uint32_t r = 0; r < shape_.input_dim; ++r) {
      row_marked_[r] = 1;
      touched_.push_back(r);
    }
  }
  return data_;
}

std::span<double> Gradients::w1_row(std::uint32_t bucket) {
  if (!row_marked_[bucket]) {
    row_marked_[bucket] = 1;
    touched_.push_back(bucket);
  }
  return {data_.data() + layout_.w1 + std::size_t{bucket} * shape_.hidden_dim, shape_.hidden_dim};
}

std::span<const double> Gradients::w1_row(std::uint32_t bucket) const {
  return {data_.data() + layout_.w1 + std::size_t{bucket} * shape_.hidden_dim, shape_.hidden_dim};
}

std::span<double> Gradients::head_w() {
  if (!shape_.has_head) fail(ErrorCode::kInvalidArgument, "encoder has no classifier head");
  return {data_.data() + layout_.head_w, shape_.embed_dim};
}

double& Gradients::head_b() {
  if (!shape_.has_head) fail(ErrorCode::kInvalidArgument, "encoder has no classifier head");
  return data_[layout_.head_b];
}

void Gradients::zero() {
  for (std::uint32_t r : touched_) {
    std::fill_n(data_.begin() + static_cast<std::ptrdiff_t>(layout_.w1 + std::size_t{r} * shape_.hidden_dim),
                shape_.hidden_dim, 0.0);
    row_marked_[r] = 0;
  }
  touched_.clear();
  std::fill(data_.begin() + static_cast<std::ptrdiff_t>(layout_.b1), data_.end(), 0.0);
}

void Gradients::scale(double factor) {
  for (std::uint32_t r : touched_) {
    for (double& g : w1_row(r)) g *= factor;
  }
  for (double& g : dense_tail()) g *= factor;
}

double Gradients::squared_norm() const {
  // Summed in bucket order so the result does not depend on the order in
  // which rows were first touched.
  std::vector<std::uint32_t> rows = touched_;
  std::sort(rows.begin(), rows.end());
  double s = 0.0;
  for (std::uint32_t r : rows) {
    for (double g : w1_row(r)) s += g * g;
  }
  for (double g : dense_tail()) s += g * g;
  return s;
}

bool Gradients::all_finite() const {
  for (std::uint32_t r : touched_) {
    for (double g : w1_row(r)) {
      if (!std::isfinite(g)) return false;
    }
  }
  for (double g : dense_tail()) {
    if (!std::isfinite(g)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

EncoderParams init_params(const EncoderShape& shape, std::uint64_t seed) {
  shape.validate();
  EncoderParams params(shape);
  Rng rng(seed);
  auto glorot = [&](std::span<double> w, double fan_in, double fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& x : w) x = bound * (2.0 * rng.uniform() - 1.0);
  };
  const auto& l = params.layout();
  glorot(params.values().subspan(l.w1, l.b1 - l.w1), shape.input_dim, shape.hidden_dim);
  glorot(params.w2(), shape.hidden_dim, shape.embed_dim);
  if (shape.has_head) glorot(params.head_w(), shape.embed_dim, 1.0);
  return params;
}

void embed(const SparseFeatures& x, const EncoderParams& params, ForwardCache& cache) {
  const auto& shape = params.shape();
  if (x.dimension != shape.input_dim) {
    fail(ErrorCode::kInvalidArgument, "embed: feature dimension " + std::to_string(x.dimension) +
                                          " does not match encoder input " +
                                          std::to_string(shape.input_dim));
  }
  const std::size_t h = shape.hidden_dim;
  const std::size_t d = shape.embed_dim;

  cache.pre.assign(params.b1().begin(), params.b1().end());
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    const double xv = x.values[k];
    const auto row = params.w1_row(x.indices[k]);
    for (std::size_t j = 0; j < h; ++j) cache.pre[j] += xv * row[j];
  }
  cache.hidden.resize(h);
  for (std::size_t j = 0; j < h; ++j) cache.hidden[j] = cache.pre[j] > 0.0 ? cache.pre[j] : 0.0;

  cache.z.assign(params.b2().begin(), params.b2().end());
  const auto w2 = params.w2();
  for (std::size_t j = 0; j < h; ++j) {
    const double a = cache.hidden[j];
    if (a == 0.0) continue;
    const double* row = w2.data() + j * d;
    for (std::size_t e = 0; e < d; ++e) cache.z[e] += a * row[e];
  }
}

std::vector<double> embed(const SparseFeatures& x, const EncoderParams& params) {
  ForwardCache cache;
  embed(x, params, cache);
  return std::move(cache.z);
}

double head_logit(std::span<const double> z, const EncoderParams& params) {
  const auto w = params.head_w();
  if (z.size() != w.size()) fail(ErrorCode::kInvalidArgument, "head_logit: dimension mismatch");
  double logit = params.head_b();
  for (std::size_t e = 0; e < z.size(); ++e) logit += w[e] * z[e];
  return logit;
}

void backward_head(std::span<const double> z, double upstream, const EncoderParams& params,
                   Gradients& grads, std::span<double> dz) {
  const auto w = params.head_w();
  auto gw = grads.head_w();
  for (std::size_t e = 0; e < z.size(); ++e) {
    gw[e] += upstream * z[e];
    dz[e] = upstream * w[e];
  }
  grads.head_b() += upstream;
}

void backward_embed(const SparseFeatures& x, const EncoderParams& params,
                    const ForwardCache& cache, std::span<const double> upstream, Gradients& grads) {
  const auto& shape = params.shape();
  const std::size_t h = shape.hidden_dim;
  const std::size_t d = shape.embed_dim;
  if (upstream.size() != d) fail(ErrorCode::kInvalidArgument, "backward_embed: upstream size");

  auto gb2 = grads.b2();
  for (std::size_t e = 0; e < d; ++e) gb2[e] += upstream[e];

  const auto w2 = params.w2();
  auto gw2 = grads.w2();
  std::vector<double> dpre(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double a = cache.hidden[j];
    double* grow = gw2.data() + j * d;
    const double* wrow = w2.data() + j * d;
    double acc = 0.0;
    for (std::size_t e = 0; e < d; ++e) {
      grow[e] += a * upstream[e];
      acc += wrow[e] * upstream[e];
    }
    // relu'(0) = 0
    dpre[j] = cache.pre[j] > 0.0 ? acc : 0.0;
  }

  auto gb1 = grads.b1();
  for (std::size_t j = 0; j < h; ++j) gb1[j] += dpre[j];
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    const double xv = x.values[k];
    auto grow = grads.w1_row(x.indices[k]);
    for (std::size_t j = 0; j < h; ++j) grow[j] += xv * dpre[j];
  }
}

void backward_embed(const SparseFeatures& x, const EncoderParams& params,
                    std::span<const double> upstream, Gradients& grads) {
  ForwardCache cache;
  embed(x, params, cache);
  backward_embed(x, params, cache, upstream, grads);
}

// ---------------------------------------------------------------------------

namespace {

void check_compatible(const EncoderParams& params, const Gradients& grads) {
  if (!(params.shape() == grads.shape())) {
    fail(ErrorCode::kInvalidArgument, "gradient shape does not match parameters");
  }
}

void check_finite(const Gradients& grads) {
  if (!grads.all_finite()) fail(ErrorCode::kNumeric, "non-finite gradient");
}

}  // namespace

void sgd_step(EncoderParams& params, const Gradients& grads, GroupRates rates) {
  check_compatible(params, grads);
  if (rates.encoder < 0.0 || rates.head < 0.0) {
    fail(ErrorCode::kInvalidArgument, "learning rates must be >= 0");
  }
  check_finite(grads);
  const auto& l = params.layout();
  auto p = params.values();
  const auto g = grads.values();
  const std::size_t h = params.shape().hidden_dim;
  for (std::uint32_t r : grads.touched_rows()) {
    const std::size_t base = l.w1 + std::size_t{r} * h;
    for (std::size_t j = 0; j < h; ++j) p[base + j] -= rates.encoder * g[base + j];
  }
  for (std::size_t i = l.b1; i < l.head_begin; ++i) p[i] -= rates.encoder * g[i];
  for (std::size_t i = l.head_begin; i < l.total; ++i) p[i] -= rates.head * g[i];
}

AdamState::AdamState(const EncoderShape& shape)
    : m(ParamLayout(shape).total, 0.0),
      v(ParamLayout(shape).total, 0.0),
      row_active(shape.input_dim, 0) {}

void adam_step(EncoderParams& params, const Gradients& grads, AdamState& state, GroupRates rates) {
  check_compatible(params, grads);
  const auto& l = params.layout();
  if (state.m.size() != l.total || state.v.size() != l.total ||
      state.row_active.size() != params.shape().input_dim) {
    fail(ErrorCode::kInvalidArgument, "Adam state does not match parameters");
  }
  if (rates.encoder < 0.0 || rates.head < 0.0) {
    fail(ErrorCode::kInvalidArgument, "learning rates must be >= 0");
  }
  check_finite(grads);
  for (std::uint32_t r : grads.touched_rows()) state.row_active[r] = 1;

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);

  auto p = params.values();
  const auto g = grads.values();
  auto update = [&](std::size_t i, double lr) {
    const double gi = g[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * gi;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * gi * gi;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
  };

  const std::size_t h = params.shape().hidden_dim;
  for (std::uint32_t r = 0; r < params.shape().input_dim; ++r) {
    if (!state.row_active[r]) continue;
    const std::size_t base = l.w1 + std::size_t{r} * h;
    for (std::size_t j = 0; j < h; ++j) update(base + j, rates.encoder);
  }
  for (std::size_t i = l.b1; i < l.head_begin; ++i) update(i, rates.encoder);
  for (std::size_t i = l.head_begin; i < l.total; ++i) update(i, rates.head);
}

void adam_step(EncoderParams& params, const Gradients& grads, AdamState& state, double lr) {
  adam_step(params, grads, state, GroupRates{lr, lr});
}

double clip_gradients(Gradients& grads, double max_norm) {
  if (!(max_norm > 0.0)) fail(ErrorCode::kInvalidArgument, "clip_gradients: max_norm must be > 0");
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace fsad
