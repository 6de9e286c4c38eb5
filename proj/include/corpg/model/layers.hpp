// SPDX-License-Identifier: Apache-2.0
//
// Transformer building blocks over the tensor ops: sinusoidal positions,
// multi-head attention, position-wise feed-forward, seeded dropout stream.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "corpg/ops.hpp"
#include "corpg/params.hpp"

namespace corpg {

/// Train/eval switch plus a deterministic stream of dropout seeds.
class ForwardContext {
 public:
  ForwardContext() = default;
  ForwardContext(bool train, double rate, std::uint64_t seed) : train_(train), rate_(rate), seed_(seed) {}

  static ForwardContext eval() { return {}; }

  bool train() const { return train_; }

  Tensor drop(const Tensor& x) {
    if (!train_ || rate_ == 0.0) return x;
    return dropout(x, rate_, mix(seed_, counter_++), true);
  }

 private:
  // splitmix64 finalizer over (seed, counter)
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t n) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (n + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  bool train_ = false;
  double rate_ = 0.0;
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

/// PE(p, 2i) = sin(p / 10000^(2i/d)), PE(p, 2i+1) = cos(same).
inline Tensor sinusoid_positions(const std::vector<std::size_t>& positions, std::size_t d) {
  Tensor out(Shape{positions.size(), d});
  auto y = out.mutable_values();
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const double p = static_cast<double>(positions[r]);
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle = p / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      y[r * d + i] = std::sin(angle);
      if (i + 1 < d) y[r * d + i + 1] = std::cos(angle);
    }
  }
  return out;
}

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add_bias(matmul(x, w), b); }

struct LayerNormParams {
  Tensor gain, bias;

  static LayerNormParams add(ParamStore& ps, const std::string& prefix, std::size_t d) {
    ps.add(prefix + ".gain", constant_vector(d, 1.0));
    ps.add(prefix + ".bias", constant_vector(d, 0.0));
    return bind(ps, prefix);
  }
  static LayerNormParams bind(const ParamStore& ps, const std::string& prefix) {
    return {ps.get(prefix + ".gain"), ps.get(prefix + ".bias")};
  }
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

struct AttentionParams {
  Tensor wq, wk, wv, wo;  // d x d; head h uses column block h of wq/wk/wv

  static AttentionParams add(ParamStore& ps, const std::string& prefix, std::size_t d, Rng& rng) {
    for (const char* n : {".wq", ".wk", ".wv", ".wo"}) ps.add(prefix + n, xavier_uniform(d, d, rng));
    return bind(ps, prefix);
  }
  static AttentionParams bind(const ParamStore& ps, const std::string& prefix) {
    return {ps.get(prefix + ".wq"), ps.get(prefix + ".wk"), ps.get(prefix + ".wv"), ps.get(prefix + ".wo")};
  }
};

struct AttentionResult {
  Tensor output;              // rows(query) x d
  std::vector<Tensor> probs;  // per head, rows(query) x rows(memory)
};

/// Scaled dot-product multi-head attention. `mask`, when given, selects the
/// memory rows each query row may attend to.
inline AttentionResult multi_head_attention(const Tensor& query, const Tensor& memory,
                                            const AttentionParams& p, std::size_t heads,
                                            const Mask* mask) {
  const std::size_t d = p.wq.cols();
  const std::size_t du = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(du));
  Tensor q = matmul(query, p.wq);
  Tensor k = matmul(memory, p.wk);
  Tensor v = matmul(memory, p.wv);
  AttentionResult r;
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = heads == 1 ? q : slice_cols(q, h * du, du);
    Tensor kh = heads == 1 ? k : slice_cols(k, h * du, du);
    Tensor vh = heads == 1 ? v : slice_cols(v, h * du, du);
    Tensor scores = scale(matmul(qh, transpose(kh)), scale_factor);
    Tensor a = softmax_rows(scores, mask);
    outs.push_back(matmul(a, vh));
    r.probs.push_back(a);
  }
  r.output = matmul(heads == 1 ? outs[0] : concat_cols(outs), p.wo);
  return r;
}

struct FeedForwardParams {
  Tensor w1, b1, w2, b2;

  static FeedForwardParams add(ParamStore& ps, const std::string& prefix, std::size_t d,
                               std::size_t d_ff, Rng& rng) {
    ps.add(prefix + ".w1", xavier_uniform(d, d_ff, rng));
    ps.add(prefix + ".b1", constant_vector(d_ff, 0.0));
    ps.add(prefix + ".w2", xavier_uniform(d_ff, d, rng));
    ps.add(prefix + ".b2", constant_vector(d, 0.0));
    return bind(ps, prefix);
  }
  static FeedForwardParams bind(const ParamStore& ps, const std::string& prefix) {
    return {ps.get(prefix + ".w1"), ps.get(prefix + ".b1"), ps.get(prefix + ".w2"), ps.get(prefix + ".b2")};
  }
  Tensor operator()(const Tensor& x, ForwardContext& ctx) const {
    return linear(ctx.drop(relu(linear(x, w1, b1))), w2, b2);
  }
};

}  // namespace corpg
