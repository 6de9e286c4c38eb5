// SPDX-License-Identifier: Apache-2.0
//
// The full network: per-sentence transformer encoder, bidirectional graph
// GRU over sentence vectors, token/graph fusion, and a transformer decoder
// with a copy distribution over source tokens.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "corpg/document.hpp"
#include "corpg/log.hpp"
#include "corpg/model/config.hpp"
#include "corpg/model/graph.hpp"
#include "corpg/model/layers.hpp"
#include "corpg/vocab.hpp"

namespace corpg {

struct SentenceEncodings {
  Tensor tokens;  // all sentences' token vectors stacked in input order, T x d
  Tensor d_r;     // sentence vectors (token means), N x d
  std::vector<std::size_t> lengths;
  std::vector<int> token_ids;         // T source ids aligned with rows of `tokens`
  std::vector<int> sentence_of;       // sentence index of each row

  std::size_t sentence_count() const { return lengths.size(); }

  // Rows of sentence i.
  Tensor sentence(std::size_t i) const {
    std::size_t begin = 0;
    for (std::size_t k = 0; k < i; ++k) begin += lengths[k];
    return slice_rows(tokens, begin, lengths[i]);
  }
};

struct EncodedSource {
  SentenceEncodings enc;
  Tensor graph_slot;  // per-sentence vector fused into every token row, N x d
  std::size_t graph_layers = 0;
  Tensor memory;      // T x d
};

struct DecoderOutput {
  Tensor probs;           // steps x V, final distribution
  Tensor vocab_probs;     // steps x V, before copy mixing
  Tensor copy_attention;  // steps x T, mean over heads of last-layer cross-attention
  Tensor p_gen;           // steps x 1
};

/// A source document ready for the network plus its teacher-forcing target.
struct TrainingExample {
  std::string id;
  Document source;
  CoherenceGraph graph;
  std::vector<int> target;         // s1 <sep> s2 ... sN <eos>
  std::vector<int> decoder_input;  // <bos> + target[:-1]
  std::vector<std::size_t> target_sentence;  // sentence index per target step; boundary tokens hold -1
};

inline constexpr std::size_t kBoundaryStep = static_cast<std::size_t>(-1);

/// Joins target sentences with the boundary token and terminates with EOS.
inline TrainingExample make_example(const std::string& id, const Document& source, const CoherenceGraph& graph,
                                    const Document& target, int boundary_id) {
  if (source.sentences.size() != graph.size()) {
    throw DataError("document '" + id + "': graph has " + std::to_string(graph.size()) + " nodes for " +
                    std::to_string(source.sentences.size()) + " sentences");
  }
  TrainingExample ex{id, source, graph, {}, {}, {}};
  for (std::size_t s = 0; s < target.sentences.size(); ++s) {
    if (s > 0) {
      ex.target.push_back(boundary_id);
      ex.target_sentence.push_back(kBoundaryStep);
    }
    for (int t : target.sentences[s]) {
      ex.target.push_back(t);
      ex.target_sentence.push_back(s);
    }
  }
  ex.target.push_back(kEos);
  ex.target_sentence.push_back(kBoundaryStep);
  ex.decoder_input.push_back(kBos);
  ex.decoder_input.insert(ex.decoder_input.end(), ex.target.begin(), ex.target.end() - 1);
  return ex;
}

inline TrainingExample make_example(const ParallelDoc& doc, const Vocab& vocab) {
  return make_example(doc.id, encode_document(doc.source, vocab), doc.graph, encode_document(doc.target, vocab),
                      vocab.boundary_id());
}

class CorpgModel {
 public:
  CorpgModel() = default;

  /// Fresh parameters: scaled uniform weights, unit gains, zero biases.
  CorpgModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.d_model, V = cfg_.vocab_size;
    params_.add("enc.embed", xavier_uniform(V, d, rng));
    for (std::size_t l = 0; l < cfg_.enc_layers; ++l) {
      const std::string p = "enc.l" + std::to_string(l);
      AttentionParams::add(params_, p + ".attn", d, rng);
      LayerNormParams::add(params_, p + ".ln1", d);
      FeedForwardParams::add(params_, p + ".ff", d, cfg_.d_ff, rng);
      LayerNormParams::add(params_, p + ".ln2", d);
    }
    if (cfg_.graph_module != GraphModule::none) {
      const bool gru = cfg_.graph_module == GraphModule::graph_gru;
      const std::string g = gru ? "gru" : "gat";
      GraphDirectionParams::add(params_, g + ".fwd", d, cfg_.heads, gru, rng);
      GraphDirectionParams::add(params_, g + ".bwd", d, cfg_.heads, gru, rng);
    }
    if (cfg_.sentence_position) params_.add("sentpos", xavier_uniform(cfg_.max_sentences, d, rng));
    params_.add("fuse.w", xavier_uniform(2 * d, d, rng));
    params_.add("fuse.b", constant_vector(d, 0.0));
    LayerNormParams::add(params_, "fuse.ln", d);
    params_.add("dec.embed", xavier_uniform(V, d, rng));
    for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
      const std::string p = "dec.l" + std::to_string(l);
      AttentionParams::add(params_, p + ".self", d, rng);
      LayerNormParams::add(params_, p + ".ln1", d);
      AttentionParams::add(params_, p + ".cross", d, rng);
      LayerNormParams::add(params_, p + ".ln2", d);
      FeedForwardParams::add(params_, p + ".ff", d, cfg_.d_ff, rng);
      LayerNormParams::add(params_, p + ".ln3", d);
    }
    params_.add("out.w", xavier_uniform(d, V, rng));
    params_.add("out.b", constant_vector(V, 0.0));
    if (cfg_.copy) {
      params_.add("copy.w", xavier_uniform(2 * d, 1, rng));
      params_.add("copy.b", constant_vector(1, 0.0));
    }
  }

  /// Adopts existing parameters (e.g. from a checkpoint); every expected name
  /// must be present with the right shape.
  CorpgModel(const ModelConfig& cfg, ParamStore params) : cfg_(cfg) {
    cfg_.validate();
    CorpgModel reference(cfg, 0);
    for (const auto& [name, t] : reference.params_) {
      if (!params.contains(name)) throw DataError("checkpoint: missing parameter '" + name + "'");
      if (!(params.get(name).shape() == t.shape())) {
        throw DataError("checkpoint: parameter '" + name + "' has shape " + params.get(name).shape().str() +
                        ", expected " + t.shape().str());
      }
    }
    if (params.size() != reference.params_.size()) throw DataError("checkpoint: unexpected extra parameters");
    params_ = std::move(params);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Each sentence passes the encoder on its own: attention never crosses a
  /// sentence and positions restart at 0 in every sentence.
  SentenceEncodings encode_sentences(const Document& src, ForwardContext& ctx) const {
    const std::size_t n = src.sentences.size();
    if (n == 0 || n > cfg_.max_sentences) {
      throw DataError("document '" + src.id + "' has " + std::to_string(n) + " sentences; expected 1.." +
                      std::to_string(cfg_.max_sentences));
    }
    SentenceEncodings e;
    std::vector<std::size_t> positions;
    for (std::size_t s = 0; s < n; ++s) {
      const auto& sent = src.sentences[s];
      if (sent.empty()) throw DataError("document '" + src.id + "' has an empty sentence");
      std::size_t len = sent.size();
      if (len > cfg_.n_max) {
        log().warn("document '{}': sentence {} truncated from {} to {} tokens", src.id, s, len, cfg_.n_max);
        len = cfg_.n_max;
      }
      e.lengths.push_back(len);
      for (std::size_t t = 0; t < len; ++t) {
        e.token_ids.push_back(sent[t]);
        e.sentence_of.push_back(static_cast<int>(s));
        positions.push_back(t);
      }
    }
    const std::size_t total = e.token_ids.size();
    Mask same_sentence(total, total, false);
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t j = 0; j < total; ++j) same_sentence.set(i, j, e.sentence_of[i] == e.sentence_of[j]);
    }
    const double emb_scale = std::sqrt(static_cast<double>(cfg_.d_model));
    Tensor x = add(scale(embedding_lookup(params_.get("enc.embed"), e.token_ids), emb_scale),
                   sinusoid_positions(positions, cfg_.d_model));
    x = ctx.drop(x);
    for (std::size_t l = 0; l < cfg_.enc_layers; ++l) {
      const std::string p = "enc.l" + std::to_string(l);
      auto attn = multi_head_attention(x, x, AttentionParams::bind(params_, p + ".attn"), cfg_.heads,
                                       &same_sentence);
      x = LayerNormParams::bind(params_, p + ".ln1")(add(x, ctx.drop(attn.output)));
      Tensor ff = FeedForwardParams::bind(params_, p + ".ff")(x, ctx);
      x = LayerNormParams::bind(params_, p + ".ln2")(add(x, ctx.drop(ff)));
    }
    e.tokens = x;
    e.d_r = segment_mean(x, e.lengths);
    return e;
  }

  GraphDirectionParams graph_params(bool forward) const {
    const bool gru = cfg_.graph_module == GraphModule::graph_gru;
    return GraphDirectionParams::bind(params_, std::string(gru ? "gru" : "gat") + (forward ? ".fwd" : ".bwd"),
                                      cfg_.heads, gru);
  }

  /// Per-sentence vectors for the fusion slot, per the graph_module and
  /// sentence_position switches.
  Tensor graph_slot(const Tensor& d_r, const CoherenceGraph& graph, std::size_t* layers = nullptr) const {
    const std::size_t n = d_r.rows();
    if (graph.size() != n) {
      throw DataError("graph has " + std::to_string(graph.size()) + " nodes for " + std::to_string(n) +
                      " sentences");
    }
    Tensor slot;
    std::size_t ran = 0;
    switch (cfg_.graph_module) {
      case GraphModule::graph_gru: {
        BiGraphRun r = bigraph_gru(d_r, graph, graph_params(true), graph_params(false));
        slot = r.output;
        ran = r.forward_layers;
        break;
      }
      case GraphModule::gat: {
        BiGraphRun r = bigraph_gat(d_r, graph, graph_params(true), graph_params(false));
        slot = r.output;
        ran = r.forward_layers;
        break;
      }
      case GraphModule::none:
        break;
    }
    if (cfg_.sentence_position) {
      std::vector<int> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
      Tensor pos = embedding_lookup(params_.get("sentpos"), idx);
      slot = slot.defined() ? add(slot, pos) : pos;
    }
    if (!slot.defined()) slot = Tensor(Shape{n, cfg_.d_model}, 0.0);
    if (layers) *layers = ran;
    return slot;
  }

  /// memory row t = dropout(LN(relu([h_t || g_{sentence(t)}] W_c + b_c))).
  Tensor fuse(const SentenceEncodings& e, const Tensor& slot, ForwardContext& ctx) const {
    if (slot.rows() != e.sentence_count()) throw DimensionError("fuse: graph slot rows do not match sentences");
    Tensor g_rows = embedding_lookup(slot, e.sentence_of);
    Tensor h = linear(concat_cols(e.tokens, g_rows), params_.get("fuse.w"), params_.get("fuse.b"));
    return ctx.drop(LayerNormParams::bind(params_, "fuse.ln")(relu(h)));
  }

  EncodedSource encode(const Document& src, const CoherenceGraph& graph, ForwardContext& ctx) const {
    EncodedSource s;
    s.enc = encode_sentences(src, ctx);
    s.graph_slot = graph_slot(s.enc.d_r, graph, &s.graph_layers);
    s.memory = fuse(s.enc, s.graph_slot, ctx);
    return s;
  }

  /// Decoder over `input` (starting with BOS). With last_only, only the final
  /// step's distribution is produced.
  DecoderOutput decode(const EncodedSource& src, const std::vector<int>& input, ForwardContext& ctx,
                       bool last_only = false) const {
    if (input.empty() || input.front() != kBos) throw ContractError("decode: prefix must start with BOS");
    const std::size_t steps = input.size();
    const std::size_t d = cfg_.d_model, V = cfg_.vocab_size;
    std::vector<std::size_t> positions(steps);
    for (std::size_t i = 0; i < steps; ++i) positions[i] = i;
    Tensor x = add(scale(embedding_lookup(params_.get("dec.embed"), input), std::sqrt(static_cast<double>(d))),
                   sinusoid_positions(positions, d));
    x = ctx.drop(x);
    const Mask causal = Mask::causal(steps);
    std::vector<Tensor> cross_probs;
    for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
      const std::string p = "dec.l" + std::to_string(l);
      auto self = multi_head_attention(x, x, AttentionParams::bind(params_, p + ".self"), cfg_.heads, &causal);
      x = LayerNormParams::bind(params_, p + ".ln1")(add(x, ctx.drop(self.output)));
      auto cross = multi_head_attention(x, src.memory, AttentionParams::bind(params_, p + ".cross"), cfg_.heads,
                                        nullptr);
      x = LayerNormParams::bind(params_, p + ".ln2")(add(x, ctx.drop(cross.output)));
      Tensor ff = FeedForwardParams::bind(params_, p + ".ff")(x, ctx);
      x = LayerNormParams::bind(params_, p + ".ln3")(add(x, ctx.drop(ff)));
      cross_probs = std::move(cross.probs);
    }
    const std::size_t rows = last_only ? 1 : steps;
    if (last_only) {
      x = slice_rows(x, steps - 1, 1);
      for (auto& p : cross_probs) p = slice_rows(p, steps - 1, 1);
    }

    Mask vocab_mask(rows, V, true);
    for (std::size_t r = 0; r < rows; ++r) {
      vocab_mask.set(r, kPad, false);
      vocab_mask.set(r, kBos, false);
    }
    DecoderOutput out;
    out.vocab_probs = softmax_rows(linear(x, params_.get("out.w"), params_.get("out.b")), &vocab_mask);

    Tensor attn_sum = cross_probs[0];
    for (std::size_t h = 1; h < cross_probs.size(); ++h) attn_sum = add(attn_sum, cross_probs[h]);
    out.copy_attention = scale(attn_sum, 1.0 / static_cast<double>(cross_probs.size()));

    if (!cfg_.copy) {
      out.probs = out.vocab_probs;
      out.p_gen = Tensor(Shape{rows, 1}, 1.0);
      return out;
    }
    Tensor context = matmul(out.copy_attention, src.memory);
    out.p_gen = sigmoid(linear(concat_cols(x, context), params_.get("copy.w"), params_.get("copy.b")));
    Tensor copy_dist = scatter_cols(out.copy_attention, src.enc.token_ids, V);
    out.probs = add(scale_rows(out.vocab_probs, out.p_gen), scale_rows(copy_dist, one_minus(out.p_gen)));
    return out;
  }

  DecoderOutput forward_teacher_forced(const TrainingExample& ex, ForwardContext& ctx) const {
    EncodedSource src = encode(ex.source, ex.graph, ctx);
    return decode(src, ex.decoder_input, ctx);
  }

 private:
  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace corpg
