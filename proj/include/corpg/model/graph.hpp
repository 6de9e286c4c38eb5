// SPDX-License-Identifier: Apache-2.0
//
// Graph GRU over sentence vectors: multi-head attention restricted to each
// node's successors in the coherence graph feeds a GRU cell as its hidden
// state; the same layer is applied N times (N = number of sentences).
#pragma once

#include <string>
#include <vector>

#include "corpg/document.hpp"
#include "corpg/model/layers.hpp"

namespace corpg {

struct GraphHeadParams {
  Tensor wq, wk, wv;  // d_model x d_u
};

/// One direction's parameters, shared by all of its layers.
struct GraphDirectionParams {
  std::vector<GraphHeadParams> heads;
  Tensor wo;          // (H * d_u) x d_model
  Tensor wz, wr, wm;  // 2 d_model x d_model; empty for the plain GAT stack
  LayerNormParams ln;

  static GraphDirectionParams add(ParamStore& ps, const std::string& prefix, std::size_t d,
                                  std::size_t heads, bool gru, Rng& rng) {
    const std::size_t du = d / heads;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::string hp = prefix + ".head" + std::to_string(h);
      ps.add(hp + ".wq", xavier_uniform(d, du, rng));
      ps.add(hp + ".wk", xavier_uniform(d, du, rng));
      ps.add(hp + ".wv", xavier_uniform(d, du, rng));
    }
    ps.add(prefix + ".wo", xavier_uniform(heads * du, d, rng));
    if (gru) {
      ps.add(prefix + ".wz", xavier_uniform(2 * d, d, rng));
      ps.add(prefix + ".wr", xavier_uniform(2 * d, d, rng));
      ps.add(prefix + ".wm", xavier_uniform(2 * d, d, rng));
    }
    LayerNormParams::add(ps, prefix + ".ln", d);
    return bind(ps, prefix, heads, gru);
  }

  static GraphDirectionParams bind(const ParamStore& ps, const std::string& prefix, std::size_t heads,
                                   bool gru) {
    GraphDirectionParams p;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::string hp = prefix + ".head" + std::to_string(h);
      p.heads.push_back({ps.get(hp + ".wq"), ps.get(hp + ".wk"), ps.get(hp + ".wv")});
    }
    p.wo = ps.get(prefix + ".wo");
    if (gru) {
      p.wz = ps.get(prefix + ".wz");
      p.wr = ps.get(prefix + ".wr");
      p.wm = ps.get(prefix + ".wm");
    }
    p.ln = LayerNormParams::bind(ps, prefix + ".ln");
    return p;
  }
};

/// Row i may attend to column j iff adj(i, j) = 1.
inline Mask adjacency_mask(const CoherenceGraph& adj) {
  const std::size_t n = adj.size();
  Mask m(n, n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m.set(i, j, adj.edge(i, j));
  }
  return m;
}

/// alpha = softmax over successors of (r_i W_Q)(g_j W_K)^T; row i = sum_j alpha_ij g_j W_V.
/// Rows of sink nodes are exactly zero.
inline Tensor graph_attention(const Tensor& d_r, const Tensor& g_prev, const CoherenceGraph& adj,
                              const GraphHeadParams& head) {
  if (d_r.rows() != adj.size() || g_prev.rows() != adj.size()) {
    throw DimensionError("graph_attention: " + std::to_string(adj.size()) + "-node graph with inputs " +
                         d_r.shape().str() + " and " + g_prev.shape().str());
  }
  const Mask mask = adjacency_mask(adj);
  Tensor q = matmul(d_r, head.wq);
  Tensor k = matmul(g_prev, head.wk);
  Tensor v = matmul(g_prev, head.wv);
  Tensor alpha = softmax_rows(matmul(q, transpose(k)), &mask);
  return matmul(alpha, v);
}

inline Tensor multi_head_gat(const Tensor& d_r, const Tensor& g_prev, const CoherenceGraph& adj,
                             const GraphDirectionParams& p) {
  std::vector<Tensor> heads;
  heads.reserve(p.heads.size());
  for (const auto& h : p.heads) heads.push_back(graph_attention(d_r, g_prev, adj, h));
  return matmul(heads.size() == 1 ? heads[0] : concat_cols(heads), p.wo);
}

struct GraphGruLayer {
  Tensor g_bar;     // aggregated successor states
  Tensor z, r;      // gates
  Tensor g_tilde;   // candidate
  Tensor pre_norm;  // (1 - z) * g_bar + z * g_tilde
  Tensor output;    // layer_norm(pre_norm)
};

inline GraphGruLayer graph_gru_layer(const Tensor& d_r, const Tensor& g_prev, const CoherenceGraph& adj,
                                     const GraphDirectionParams& p) {
  GraphGruLayer l;
  l.g_bar = multi_head_gat(d_r, g_prev, adj, p);
  Tensor x = concat_cols(l.g_bar, d_r);
  l.z = sigmoid(matmul(x, p.wz));
  l.r = sigmoid(matmul(x, p.wr));
  l.g_tilde = corpg::tanh(matmul(concat_cols(mul(l.r, l.g_bar), d_r), p.wm));
  l.pre_norm = add(mul(one_minus(l.z), l.g_bar), mul(l.z, l.g_tilde));
  l.output = p.ln(l.pre_norm);
  return l;
}

struct GraphRun {
  Tensor output;
  std::size_t layers = 0;
};

/// N shared-parameter layers; the first sees a zero hidden state.
inline GraphRun run_graph_gru(const Tensor& d_r, const CoherenceGraph& adj, const GraphDirectionParams& p) {
  const std::size_t n = adj.size();
  if (n == 0) throw ContractError("run_graph_gru: empty graph");
  GraphRun run;
  Tensor g(Shape{n, d_r.cols()}, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    g = graph_gru_layer(d_r, g, adj, p).output;
    ++run.layers;
  }
  run.output = g;
  return run;
}

/// Attention-only ablation: G_0 = D_r, G_l = LN(D_r + MHGAT(D_r, G_{l-1})), N layers.
inline GraphRun run_gat_stack(const Tensor& d_r, const CoherenceGraph& adj, const GraphDirectionParams& p) {
  const std::size_t n = adj.size();
  if (n == 0) throw ContractError("run_gat_stack: empty graph");
  GraphRun run;
  Tensor g = d_r;
  for (std::size_t l = 0; l < n; ++l) {
    g = p.ln(add(d_r, multi_head_gat(d_r, g, adj, p)));
    ++run.layers;
  }
  run.output = g;
  return run;
}

struct BiGraphRun {
  Tensor output;  // forward + backward
  std::size_t forward_layers = 0;
  std::size_t backward_layers = 0;
};

/// Forward direction on adj, backward on adj^T, both over the same D_r.
inline BiGraphRun bigraph_gru(const Tensor& d_r, const CoherenceGraph& adj, const GraphDirectionParams& fwd,
                              const GraphDirectionParams& bwd) {
  GraphRun f = run_graph_gru(d_r, adj, fwd);
  GraphRun b = run_graph_gru(d_r, adj.transposed(), bwd);
  return {add(f.output, b.output), f.layers, b.layers};
}

inline BiGraphRun bigraph_gat(const Tensor& d_r, const CoherenceGraph& adj, const GraphDirectionParams& fwd,
                              const GraphDirectionParams& bwd) {
  GraphRun f = run_gat_stack(d_r, adj, fwd);
  GraphRun b = run_gat_stack(d_r, adj.transposed(), bwd);
  return {add(f.output, b.output), f.layers, b.layers};
}

}  // namespace corpg
