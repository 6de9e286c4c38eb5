// SPDX-License-Identifier: Apache-2.0
//
// Per-token loss multipliers that favour target words whose n-grams do not
// occur in the source document. Each token is rewarded at most once, at the
// smallest order N for which all of its N-grams are novel.
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "corpg/document.hpp"
#include "corpg/error.hpp"
#include "corpg/model/corpg.hpp"

namespace corpg {

struct DiversityConfig {
  std::map<int, double> lambda{{1, 2.0}, {2, 1.0}};  // empty: no reweighting

  int n_max() const { return static_cast<int>(lambda.size()); }
  bool enabled() const { return !lambda.empty(); }

  void validate() const {
    int expect = 1;
    for (const auto& [n, w] : lambda) {
      if (n != expect) throw ContractError("diversity: orders must run 1.." + std::to_string(lambda.size()));
      if (!(w >= 0.0)) throw ContractError("diversity: lambda_" + std::to_string(n) + " must be >= 0");
      ++expect;
    }
  }

  static DiversityConfig disabled() { return DiversityConfig{{}}; }
};

using NgramSet = std::set<std::vector<int>>;

/// n-grams of order n inside each sentence; nothing spans a sentence join.
inline NgramSet sentence_ngrams(const std::vector<std::vector<int>>& sentences, std::size_t n) {
  NgramSet out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i + n <= s.size(); ++i) out.emplace(s.begin() + i, s.begin() + i + n);
  }
  return out;
}

class DiversityScorer {
 public:
  DiversityScorer(const Document& source, DiversityConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (int n = 1; n <= cfg_.n_max(); ++n) seen_.push_back(sentence_ngrams(source.sentences, n));
  }

  /// Multiplier for token `pos` of `sentence`. An order with no n-gram
  /// through `pos` (sentence shorter than n) never fires.
  double multiplier(const std::vector<int>& sentence, std::size_t pos) const {
    if (pos >= sentence.size()) throw IndexError("diversity: position out of range");
    for (int n = 1; n <= cfg_.n_max(); ++n) {
      const std::size_t len = static_cast<std::size_t>(n);
      bool novel = len <= sentence.size();
      const std::size_t first = pos + 1 >= len ? pos + 1 - len : 0;
      for (std::size_t b = first; novel && b <= pos && b + len <= sentence.size(); ++b) {
        if (seen_[len - 1].count(std::vector<int>(sentence.begin() + b, sentence.begin() + b + len))) novel = false;
      }
      if (novel) return 1.0 + cfg_.lambda.at(n);
    }
    return 1.0;
  }

  /// Multipliers for every token of `target`, sentence by sentence.
  std::vector<std::vector<double>> multipliers(const Document& target) const {
    std::vector<std::vector<double>> out;
    for (const auto& s : target.sentences) {
      auto& row = out.emplace_back();
      for (std::size_t i = 0; i < s.size(); ++i) row.push_back(multiplier(s, i));
    }
    return out;
  }

 private:
  DiversityConfig cfg_;
  std::vector<NgramSet> seen_;
};

/// Position `pos` indexes the concatenated target sentences.
inline double diversity_multiplier(const Document& source, const Document& target, std::size_t pos,
                                   const DiversityConfig& cfg) {
  std::size_t offset = pos;
  for (const auto& s : target.sentences) {
    if (offset < s.size()) return DiversityScorer(source, cfg).multiplier(s, offset);
    offset -= s.size();
  }
  throw IndexError("diversity_multiplier: position " + std::to_string(pos) + " past end of target");
}

/// Target sentences recovered from a training example's step layout.
inline Document target_document(const TrainingExample& ex) {
  Document d{ex.id, {}};
  for (std::size_t t = 0; t < ex.target.size(); ++t) {
    const std::size_t s = ex.target_sentence[t];
    if (s == kBoundaryStep) continue;
    if (d.sentences.size() <= s) d.sentences.resize(s + 1);
    d.sentences[s].push_back(ex.target[t]);
  }
  return d;
}

/// Step weights aligned with a training example; boundary and EOS steps get 1.
inline std::vector<double> step_weights(const TrainingExample& ex, const DiversityConfig& cfg) {
  std::vector<double> w(ex.target.size(), 1.0);
  if (!cfg.enabled()) return w;
  const auto per_token = DiversityScorer(ex.source, cfg).multipliers(target_document(ex));
  std::vector<std::size_t> next(per_token.size(), 0);
  for (std::size_t t = 0; t < ex.target.size(); ++t) {
    const std::size_t s = ex.target_sentence[t];
    if (s == kBoundaryStep) continue;
    w[t] = per_token[s][next[s]++];
  }
  return w;
}

}  // namespace corpg
