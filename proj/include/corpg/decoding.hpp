// SPDX-License-Identifier: Apache-2.0
//
// Greedy, beam and top-k decoding over any next-token distribution. A step
// function maps a prefix (starting with BOS) to a probability vector over the
// vocabulary; zero-probability tokens are never produced.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "corpg/model/corpg.hpp"
#include "corpg/random.hpp"
#include "corpg/text.hpp"
#include "corpg/vocab.hpp"

namespace corpg {

using StepFn = std::function<std::vector<double>(const std::vector<int>& prefix)>;

enum class DecodeMethod { greedy, beam, topk };

inline std::string to_string(DecodeMethod m) {
  switch (m) {
    case DecodeMethod::greedy: return "greedy";
    case DecodeMethod::beam: return "beam";
    case DecodeMethod::topk: return "topk";
  }
  return "?";
}

inline DecodeMethod parse_decode_method(const std::string& s) {
  if (s == "greedy") return DecodeMethod::greedy;
  if (s == "beam") return DecodeMethod::beam;
  if (s == "topk") return DecodeMethod::topk;
  throw UsageError("unknown decode method '" + s + "' (expected greedy, beam or topk)");
}

struct DecodeConfig {
  DecodeMethod method = DecodeMethod::beam;
  std::size_t beam = 4;
  std::size_t k = 5;
  double temperature = 1.0;
  std::size_t max_len = 200;
  double length_alpha = 0.6;
  std::uint64_t seed = 1;

  void validate() const {
    if (max_len < 1) throw ContractError("decode: max_len must be >= 1");
    if (beam < 1) throw ContractError("decode: beam must be >= 1");
    if (k < 1) throw ContractError("decode: k must be >= 1");
    if (!(temperature > 0.0)) throw ContractError("decode: temperature must be positive");
  }
};

/// Index of the largest entry; the smallest index wins ties.
inline int argmax(const std::vector<double>& p) {
  std::size_t best = 0;
  for (std::size_t v = 1; v < p.size(); ++v) {
    if (p[v] > p[best]) best = v;
  }
  return static_cast<int>(best);
}

/// Generated tokens after BOS, ending with EOS unless max_len was reached.
inline std::vector<int> greedy_decode(const StepFn& step, std::size_t max_len) {
  if (max_len < 1) throw ContractError("greedy_decode: max_len must be >= 1");
  std::vector<int> prefix{kBos};
  while (prefix.size() - 1 < max_len) {
    const int y = argmax(step(prefix));
    prefix.push_back(y);
    if (y == kEos) break;
  }
  return {prefix.begin() + 1, prefix.end()};
}

/// ((5 + len) / 6)^alpha
inline double length_penalty(std::size_t len, double alpha) {
  return std::pow((5.0 + static_cast<double>(len)) / 6.0, alpha);
}

struct Hypothesis {
  std::vector<int> tokens;  // without BOS
  double log_prob = 0.0;
};

namespace detail {
// Higher score first, then lexicographically smaller token sequence.
inline bool better(double sa, const std::vector<int>& a, double sb, const std::vector<int>& b) {
  if (sa != sb) return sa > sb;
  return a < b;
}
}  // namespace detail

/// Each step expands every live hypothesis, keeps the best `beam` candidates,
/// and moves those ending in EOS to the finished pool. Hypotheses still live
/// at max_len join the pool; the pool's best length-normalized score wins.
inline Hypothesis beam_search(const StepFn& step, std::size_t beam, std::size_t max_len, double alpha = 0.6) {
  if (beam < 1) throw ContractError("beam_search: beam must be >= 1");
  if (max_len < 1) throw ContractError("beam_search: max_len must be >= 1");
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> pool;
  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Hypothesis> cand;
    for (const auto& h : live) {
      std::vector<int> prefix{kBos};
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      const auto p = step(prefix);
      for (std::size_t v = 0; v < p.size(); ++v) {
        if (!(p[v] > 0.0)) continue;
        Hypothesis c{h.tokens, h.log_prob + std::log(p[v])};
        c.tokens.push_back(static_cast<int>(v));
        cand.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(beam, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [](const Hypothesis& a, const Hypothesis& b) {
                        return detail::better(a.log_prob, a.tokens, b.log_prob, b.tokens);
                      });
    live.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      if (cand[i].tokens.back() == kEos) {
        pool.push_back(std::move(cand[i]));
      } else {
        live.push_back(std::move(cand[i]));
      }
    }
  }
  pool.insert(pool.end(), live.begin(), live.end());
  if (pool.empty()) throw NumericError("beam_search: every token has zero probability");
  const Hypothesis* best = nullptr;
  double best_score = 0.0;
  for (const auto& h : pool) {
    const double s = h.log_prob / length_penalty(h.tokens.size(), alpha);
    if (!best || detail::better(s, h.tokens, best_score, best->tokens)) {
      best = &h;
      best_score = s;
    }
  }
  return *best;
}

/// Samples from the renormalized k most probable tokens (ties to smaller ids),
/// sharpened or flattened by `temperature`.
inline std::vector<int> top_k_sample(const StepFn& step, std::size_t k, double temperature, std::size_t max_len,
                                     std::uint64_t seed) {
  if (k < 1) throw ContractError("top_k_sample: k must be >= 1");
  if (!(temperature > 0.0)) throw ContractError("top_k_sample: temperature must be positive");
  if (max_len < 1) throw ContractError("top_k_sample: max_len must be >= 1");
  Rng rng(seed);
  std::vector<int> prefix{kBos};
  while (prefix.size() - 1 < max_len) {
    const auto p = step(prefix);
    std::vector<int> ids(p.size());
    for (std::size_t v = 0; v < p.size(); ++v) ids[v] = static_cast<int>(v);
    const std::size_t keep = std::min(k, ids.size());
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                      [&](int a, int b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
    std::vector<double> w(keep);
    double total = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
      w[i] = p[ids[i]] > 0.0 ? std::pow(p[ids[i]], 1.0 / temperature) : 0.0;
      total += w[i];
    }
    int y = ids[0];
    if (total > 0.0) {
      const double u = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < keep; ++i) {
        if (w[i] == 0.0) continue;
        y = ids[i];  // the last positive entry absorbs rounding at the top end
        acc += w[i];
        if (u < acc) break;
      }
    }
    prefix.push_back(y);
    if (y == kEos) break;
  }
  return {prefix.begin() + 1, prefix.end()};
}

/// Encodes the source once; each call runs the decoder over the prefix.
inline StepFn model_step_fn(const CorpgModel& model, const Document& source, const CoherenceGraph& graph) {
  Tape::Pause pause;
  ForwardContext ctx;
  auto src = std::make_shared<EncodedSource>(model.encode(source, graph, ctx));
  return [&model, src](const std::vector<int>& prefix) {
    Tape::Pause inner;
    ForwardContext c;
    Tensor p = model.decode(*src, prefix, c, true).probs;
    return std::vector<double>(p.values().begin(), p.values().end());
  };
}

inline std::vector<int> decode_tokens(const StepFn& step, const DecodeConfig& cfg) {
  cfg.validate();
  switch (cfg.method) {
    case DecodeMethod::greedy: return greedy_decode(step, cfg.max_len);
    case DecodeMethod::beam: return beam_search(step, cfg.beam, cfg.max_len, cfg.length_alpha).tokens;
    case DecodeMethod::topk: return top_k_sample(step, cfg.k, cfg.temperature, cfg.max_len, cfg.seed);
  }
  return {};
}

/// Splits at the boundary id and drops the trailing EOS. Empty sentences are
/// kept so sentence counts stay visible.
inline std::vector<std::vector<int>> split_at_boundary(const std::vector<int>& tokens, int boundary_id) {
  std::vector<std::vector<int>> out(1);
  for (int t : tokens) {
    if (t == kEos) break;
    if (t == boundary_id) {
      out.emplace_back();
    } else {
      out.back().push_back(t);
    }
  }
  return out;
}

inline TextDocument detokenize_output(const std::string& id, const std::vector<int>& tokens, const Vocab& vocab) {
  TextDocument d{id, {}};
  for (const auto& s : split_at_boundary(tokens, vocab.boundary_id())) {
    Tokens words;
    for (int t : s) words.push_back(vocab.decode(t));
    d.sentences.push_back(std::move(words));
  }
  return d;
}

}  // namespace corpg
