// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference gradient suite over every differentiable op and one
// end-to-end model loss. Shared by the gradcheck subcommand and the tests.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "corpg/grad_check.hpp"
#include "corpg/model/corpg.hpp"
#include "corpg/ops.hpp"

namespace corpg {

struct GradSuiteResult {
  std::string name;
  double rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

namespace detail {

inline Tensor random_parameter(Shape s, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(s.numel());
  for (double& x : v) x = uniform(rng, lo, hi);
  return Tensor::parameter(s, std::move(v));
}

// Contracts with fixed random weights so every output entry gets its own
// upstream gradient.
inline Tensor project(const Tensor& x, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(x.numel());
  for (double& v : w) v = uniform(rng, -1.0, 1.0);
  return sum(mul(x, Tensor(x.shape(), std::move(w))));
}

}  // namespace detail

inline std::vector<GradSuiteResult> run_grad_suite(double op_tol = 1e-6, double model_tol = 1e-4,
                                                   std::uint64_t seed = 42) {
  using detail::project;
  Rng rng(seed);
  auto P = [&](Shape s, double lo = -2.0, double hi = 2.0) { return detail::random_parameter(s, rng, lo, hi); };
  std::vector<GradSuiteResult> out;
  auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> params,
                   double tol) {
    GradCheckReport r = grad_check(f, std::move(params), 1e-5, tol);
    out.push_back({name, r.max_rel_error, tol, r.passed});
  };

  Tensor a = P(Shape{3, 4}), b = P(Shape{4, 5}), c = P(Shape{3, 4}), bias = P(Shape{4}), g = P(Shape{3, 1});
  check("matmul", [&] { return project(matmul(a, b), 1); }, {a, b}, op_tol);
  check("transpose", [&] { return project(transpose(a), 2); }, {a}, op_tol);
  check("add", [&] { return project(add(a, c), 3); }, {a, c}, op_tol);
  check("sub", [&] { return project(sub(a, c), 4); }, {a, c}, op_tol);
  check("mul", [&] { return project(mul(a, c), 5); }, {a, c}, op_tol);
  check("add_bias", [&] { return project(add_bias(a, bias), 6); }, {a, bias}, op_tol);
  check("affine", [&] { return project(affine(a, -1.5, 0.25), 7); }, {a}, op_tol);
  check("scale_rows", [&] { return project(scale_rows(a, g), 8); }, {a, g}, op_tol);
  check("sigmoid", [&] { return project(sigmoid(a), 9); }, {a}, op_tol);
  check("tanh", [&] { return project(corpg::tanh(a), 10); }, {a}, op_tol);
  Tensor away = P(Shape{3, 4}, 0.2, 2.0);
  for (std::size_t i = 0; i < away.numel(); i += 2) away.mutable_values()[i] *= -1.0;  // both sides of the kink
  check("relu", [&] { return project(relu(away), 11); }, {away}, op_tol);
  Mask m(3, 4, true);
  m.set(0, 1, false);
  m.set(2, 0, false);
  m.set(2, 3, false);
  check("softmax_rows", [&] { return project(softmax_rows(a, &m), 12); }, {a}, op_tol);
  Tensor gain = P(Shape{4}, 0.5, 1.5);
  check("layer_norm", [&] { return project(layer_norm(a, gain, bias), 13); }, {a, gain, bias}, op_tol);
  Tensor table = P(Shape{6, 3});
  const std::vector<int> ids{4, 0, 4, 2};
  check("embedding_lookup", [&] { return project(embedding_lookup(table, ids), 14); }, {table}, op_tol);
  Tensor d = P(Shape{3, 2});
  check("concat_cols", [&] { return project(concat_cols(a, d), 15); }, {a, d}, op_tol);
  Tensor e = P(Shape{2, 4});
  check("concat_rows", [&] { return project(concat_rows({a, e}), 16); }, {a, e}, op_tol);
  check("slice_rows", [&] { return project(slice_rows(a, 1, 2), 17); }, {a}, op_tol);
  check("slice_cols", [&] { return project(slice_cols(a, 1, 2), 18); }, {a}, op_tol);
  check("mean_rows", [&] { return project(mean_rows(a), 19); }, {a}, op_tol);
  Tensor tall = P(Shape{6, 3});
  const std::vector<std::size_t> lengths{2, 1, 3};
  check("segment_mean", [&] { return project(segment_mean(tall, lengths), 20); }, {tall}, op_tol);
  check("row_sum", [&] { return project(row_sum(a), 21); }, {a}, op_tol);
  check("sum", [&] { return scale(sum(a), 0.7); }, {a}, op_tol);
  check("mean", [&] { return scale(mean(a), 1.3); }, {a}, op_tol);
  const std::vector<int> cols{2, 0, 2, 5};
  check("scatter_cols", [&] { return project(scatter_cols(a, cols, 6), 22); }, {a}, op_tol);
  check("dropout", [&] { return project(dropout(a, 0.4, 99, true), 23); }, {a}, op_tol);
  Tensor probs = P(Shape{3, 4}, 0.1, 0.9);
  const std::vector<int> targets{1, 3, 0};
  const std::vector<double> weights{1.0, 3.0, 2.0};
  check("weighted_nll", [&] { return weighted_nll(probs, targets, weights); }, {probs}, op_tol);
  Tensor logits = P(Shape{4, 1});
  const std::vector<double> labels{1.0, 0.0, 0.0, 1.0};
  check("bce_with_logits", [&] { return bce_with_logits(logits, labels); }, {logits}, op_tol);

  ModelConfig mc;
  mc.vocab_size = 12;
  mc.d_model = 8;
  mc.heads = 2;
  mc.enc_layers = 1;
  mc.dec_layers = 1;
  mc.d_ff = 16;
  mc.dropout = 0.0;
  mc.boundary_id = 11;
  CorpgModel model(mc, seed);
  Document src{"g", {{4, 5, 6}, {7, 8}, {9, 4}}};
  Document tgt{"g", {{7, 8}, {4, 5, 6}, {9, 10}}};
  TrainingExample ex = make_example("g", src, CoherenceGraph::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 0, 0}}), tgt, 11);
  std::vector<double> w(ex.target.size(), 1.0);
  for (std::size_t i = 0; i < w.size(); i += 3) w[i] = 2.0;
  check("model_loss",
        [&] {
          ForwardContext ctx;
          return weighted_nll(model.forward_teacher_forced(ex, ctx).probs, ex.target, w);
        },
        model.params().tensors(), model_tol);
  return out;
}

}  // namespace corpg
