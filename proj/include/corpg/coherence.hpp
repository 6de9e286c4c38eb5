// SPDX-License-Identifier: Apache-2.0
//
// Sentence-order oracles, coherence graph construction, COH / COH-p and the
// shuffle baseline.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "corpg/document.hpp"
#include "corpg/error.hpp"
#include "corpg/ops.hpp"
#include "corpg/optimizer.hpp"
#include "corpg/random.hpp"
#include "corpg/tensor_io.hpp"
#include "corpg/vocab.hpp"

namespace corpg {

using ScoreMatrix = std::vector<std::vector<double>>;

/// P(a coherently precedes b), in [0, 1].
class CoherenceOracle {
 public:
  virtual ~CoherenceOracle() = default;

  virtual double score(const Tokens& a, const Tokens& b) const = 0;

  /// scores[i][j] = score(S_i, S_j); the diagonal is left at 0.
  virtual ScoreMatrix pair_scores(const TextDocument& doc) const {
    const std::size_t n = doc.sentences.size();
    ScoreMatrix s(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) s[i][j] = checked(score(doc.sentences[i], doc.sentences[j]));
      }
    }
    return s;
  }

  /// score(S_i, S_{i+1}) for consecutive sentences.
  virtual std::vector<double> adjacent_scores(const TextDocument& doc) const {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < doc.sentences.size(); ++i) {
      out.push_back(checked(score(doc.sentences[i], doc.sentences[i + 1])));
    }
    return out;
  }

 protected:
  static double checked(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DataError("coherence oracle returned " + std::to_string(p) + ", outside [0, 1]");
    }
    return p;
  }
};

class ConstantOracle : public CoherenceOracle {
 public:
  explicit ConstantOracle(double p) : p_(p) {}
  double score(const Tokens&, const Tokens&) const override { return p_; }

 private:
  double p_;
};

class FunctionOracle : public CoherenceOracle {
 public:
  explicit FunctionOracle(std::function<double(const Tokens&, const Tokens&)> fn)
      : fn_(std::move(fn)) {}
  double score(const Tokens& a, const Tokens& b) const override { return fn_(a, b); }

 private:
  std::function<double(const Tokens&, const Tokens&)> fn_;
};

/// Externally computed SOP matrices keyed by document id.
class PrecomputedOracle : public CoherenceOracle {
 public:
  explicit PrecomputedOracle(std::map<std::string, ScoreMatrix> scores) : scores_(std::move(scores)) {}

  double score(const Tokens&, const Tokens&) const override {
    throw ContractError("precomputed oracle only scores whole documents by id");
  }

  ScoreMatrix pair_scores(const TextDocument& doc) const override {
    auto it = scores_.find(doc.id);
    if (it == scores_.end()) throw DataError("precomputed oracle: no scores for id '" + doc.id + "'");
    const std::size_t n = doc.sentences.size();
    if (it->second.size() != n) {
      throw DataError("precomputed oracle: id '" + doc.id + "' has " +
                      std::to_string(it->second.size()) + " rows, document has " +
                      std::to_string(n) + " sentences");
    }
    ScoreMatrix s = it->second;
    for (std::size_t i = 0; i < n; ++i) {
      if (s[i].size() != n) throw DataError("precomputed oracle: ragged matrix for '" + doc.id + "'");
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) checked(s[i][j]);
      }
      s[i][i] = 0.0;
    }
    return s;
  }

  std::vector<double> adjacent_scores(const TextDocument& doc) const override {
    const ScoreMatrix s = pair_scores(doc);
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) out.push_back(s[i][i + 1]);
    return out;
  }

 private:
  std::map<std::string, ScoreMatrix> scores_;
};

/// score(a, b) = sigmoid(mean_embed(a)^T B mean_embed(b) + bias).
class OrderScorer : public CoherenceOracle {
 public:
  OrderScorer() = default;
  OrderScorer(Vocab vocab, Tensor embed, Tensor bilinear, Tensor bias)
      : vocab_(std::move(vocab)), embed_(std::move(embed)), bilinear_(std::move(bilinear)),
        bias_(std::move(bias)) {}

  double score(const Tokens& a, const Tokens& b) const override {
    const auto ea = mean_embedding(a);
    const auto eb = mean_embedding(b);
    const std::size_t d = ea.size();
    const auto bv = bilinear_.values();
    double s = bias_.values()[0];
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += bv[i * d + j] * eb[j];
      s += ea[i] * row;
    }
    return detail::stable_sigmoid(s);
  }

  const Vocab& vocab() const { return vocab_; }
  const Tensor& embed() const { return embed_; }
  const Tensor& bilinear() const { return bilinear_; }
  const Tensor& bias() const { return bias_; }
  std::size_t dim() const { return embed_.cols(); }

  void save(const std::string& path) const {
    write_tensor_file(path, kMagic, {{"kind", "order_scorer"}, {"dim", std::to_string(dim())}},
                      {{"bias", bias_}, {"bilinear", bilinear_}, {"embed", embed_}});
    write_text_file_atomic(path + ".vocab", vocab_.serialize());
  }

  static OrderScorer load(const std::string& path) {
    TensorFile f = read_tensor_file(path, kMagic);
    Vocab vocab = Vocab::load(path + ".vocab");
    OrderScorer s(std::move(vocab), f.tensor("embed"), f.tensor("bilinear"), f.tensor("bias"));
    if (s.embed_.rows() != s.vocab_.size()) {
      throw DataError("order scorer: embedding rows do not match vocab size");
    }
    return s;
  }

  static constexpr const char* kMagic = "CORPGO1\n";

 private:
  std::vector<double> mean_embedding(const Tokens& s) const {
    const std::size_t d = embed_.cols();
    std::vector<double> m(d, 0.0);
    if (s.empty()) return m;
    const auto ev = embed_.values();
    for (const auto& tok : s) {
      const std::size_t id = static_cast<std::size_t>(vocab_.encode(tok));
      for (std::size_t j = 0; j < d; ++j) m[j] += ev[id * d + j];
    }
    for (double& v : m) v /= static_cast<double>(s.size());
    return m;
  }

  Vocab vocab_;
  Tensor embed_;
  Tensor bilinear_;
  Tensor bias_;
};

struct OrderPair {
  Tokens first;
  Tokens second;
  double label;  // 1 = in original order
};

/// For each adjacent (S_i, S_i+1): positive (S_i, S_i+1), negative (S_i+1, S_i).
inline std::vector<OrderPair> make_order_pairs(const std::vector<TextDocument>& corpus) {
  std::vector<OrderPair> pairs;
  for (const auto& d : corpus) {
    for (std::size_t i = 0; i + 1 < d.sentences.size(); ++i) {
      pairs.push_back({d.sentences[i], d.sentences[i + 1], 1.0});
    }
    for (std::size_t i = 0; i + 1 < d.sentences.size(); ++i) {
      pairs.push_back({d.sentences[i + 1], d.sentences[i], 0.0});
    }
  }
  return pairs;
}

struct OrderScorerTraining {
  OrderScorer scorer;
  double accuracy = 0.0;
  double loss = 0.0;
};

struct OrderScorerConfig {
  std::size_t dim = 32;
  int epochs = 200;
  double lr = 0.05;
  std::uint64_t seed = 1;
  int min_count = 1;
};

/// Logistic regression of the bilinear scorer on adjacent-pair order labels,
/// full-batch with Adam.
inline OrderScorerTraining train_order_scorer(const std::vector<TextDocument>& corpus,
                                              const OrderScorerConfig& cfg) {
  std::vector<OrderPair> pairs = make_order_pairs(corpus);
  if (pairs.empty()) {
    throw InsufficientDataError("train_order_scorer: corpus has no document with >= 2 sentences");
  }
  if (cfg.dim == 0 || cfg.epochs < 1 || !(cfg.lr > 0.0)) {
    throw ContractError("train_order_scorer: dim, epochs and lr must be positive");
  }
  Vocab vocab = Vocab::build(corpus, cfg.min_count);
  const std::size_t d = cfg.dim;
  Rng rng(cfg.seed);
  auto init = [&rng](Shape s, double bound) {
    std::vector<double> v(s.numel());
    for (double& x : v) x = uniform(rng, -bound, bound);
    return Tensor::parameter(s, std::move(v));
  };
  ParamStore params;
  params.add("embed", init(Shape{vocab.size(), d}, 0.5));
  params.add("bilinear", init(Shape{d, d}, std::sqrt(6.0 / (2.0 * static_cast<double>(d)))));
  params.add("bias", Tensor::parameter(Shape{1}, {0.0}));

  std::vector<int> first_ids, second_ids;
  std::vector<std::size_t> first_len, second_len;
  std::vector<double> labels;
  for (const auto& p : pairs) {
    for (const auto& t : p.first) first_ids.push_back(vocab.encode(t));
    for (const auto& t : p.second) second_ids.push_back(vocab.encode(t));
    first_len.push_back(p.first.size());
    second_len.push_back(p.second.size());
    labels.push_back(p.label);
  }

  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.schedule = LrSchedule::constant;
  adam.beta2 = 0.999;
  adam.eps = 1e-8;
  AdamState state;
  double last_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor a = segment_mean(embedding_lookup(params.get("embed"), first_ids), first_len);
    Tensor b = segment_mean(embedding_lookup(params.get("embed"), second_ids), second_len);
    Tensor logits = add_bias(row_sum(mul(matmul(a, params.get("bilinear")), b)), params.get("bias"));
    Tensor loss = bce_with_logits(logits, labels);
    last_loss = loss.item();
    tape.backward(loss);
    adam_step(params, state, adam);
    tape.clear();
  }

  OrderScorer scorer(vocab, params.get("embed").clone(), params.get("bilinear").clone(),
                     params.get("bias").clone());
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const bool predicted = scorer.score(p.first, p.second) >= 0.5;
    correct += (predicted == (p.label > 0.5)) ? 1 : 0;
  }
  return {std::move(scorer), static_cast<double>(correct) / static_cast<double>(pairs.size()),
          last_loss};
}

/// Edge (i, j) iff i != j and P(S_i, S_j) >= eps.
inline CoherenceGraph build_graph(const TextDocument& doc, const CoherenceOracle& oracle,
                                  double eps = 0.5) {
  if (!(eps > 0.0 && eps < 1.0)) throw ContractError("build_graph: eps must lie in (0, 1)");
  if (doc.sentences.empty()) throw ContractError("build_graph: document has no sentences");
  const ScoreMatrix s = oracle.pair_scores(doc);
  const std::size_t n = doc.sentences.size();
  CoherenceGraph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && s[i][j] >= eps) g.set(i, j, true);
    }
  }
  return g;
}

struct CohScores {
  double coh = 0.0;
  double coh_p = 0.0;
};

/// COH = fraction of adjacent pairs scoring >= 0.5; COH-p = their mean score.
inline CohScores coh_metrics(const TextDocument& doc, const CoherenceOracle& oracle) {
  if (doc.sentences.size() < 2) {
    throw UndefinedMetricError("COH is undefined for documents with fewer than 2 sentences ('" +
                               doc.id + "')");
  }
  const std::vector<double> s = oracle.adjacent_scores(doc);
  CohScores r;
  for (double p : s) {
    r.coh += p >= 0.5 ? 1.0 : 0.0;
    r.coh_p += p;
  }
  r.coh /= static_cast<double>(s.size());
  r.coh_p /= static_cast<double>(s.size());
  return r;
}

struct ShuffleResult {
  TextDocument doc;
  std::vector<std::size_t> order;  // output sentence k is input sentence order[k]
  int attempts = 0;
  double coh = 0.0;
};

/// Random permutations until COH >= 0.5 or max_tries is spent; keeps the
/// best-COH permutation seen (earliest on ties).
inline ShuffleResult shuffle_paraphrase(const TextDocument& doc, const CoherenceOracle& oracle,
                                        int max_tries, std::uint64_t seed) {
  if (max_tries < 1) throw ContractError("shuffle_paraphrase: max_tries must be >= 1");
  const std::size_t n = doc.sentences.size();
  std::vector<std::size_t> identity(n);
  for (std::size_t i = 0; i < n; ++i) identity[i] = i;
  if (n < 2) return {doc, identity, 0, 0.0};

  Rng rng(seed);
  ShuffleResult best{doc, identity, 0, -1.0};
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    std::vector<std::size_t> order = identity;
    shuffle_in_place(order, rng);
    TextDocument candidate = permute_sentences(doc, order);
    const double coh = coh_metrics(candidate, oracle).coh;
    best.attempts = attempt;
    if (coh > best.coh) {
      best.doc = std::move(candidate);
      best.order = order;
      best.coh = coh;
    }
    if (coh >= 0.5) break;
  }
  return best;
}

}  // namespace corpg
