// SPDX-License-Identifier: Apache-2.0
//
// Sentence-level rewriting used to build pseudo document paraphrases: each
// sentence of a document is rewritten independently, order and count kept.
#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "corpg/error.hpp"
#include "corpg/random.hpp"
#include "corpg/text.hpp"

namespace corpg {

// Any sentence -> sentence rewrite. A learned paraphraser can be plugged in here.
using SentenceTransform = std::function<Tokens(const Tokens&, Rng&)>;

struct NoiserConfig {
  double p_syn = 0.0;
  double p_drop = 0.0;
  double p_swap = 0.0;
  std::size_t min_tokens = 3;  // token dropout never goes below this
  std::map<std::string, std::vector<std::string>> lexicon;

  void validate() const {
    for (double p : {p_syn, p_drop, p_swap}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ContractError("noiser probabilities must lie in [0, 1]");
    }
  }
};

/// Lexicon file: one entry per line, "word alt1 alt2 ...".
inline std::map<std::string, std::vector<std::string>> load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon " + path);
  std::map<std::string, std::vector<std::string>> lex;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string head, alt;
    if (!(ls >> head)) continue;
    while (ls >> alt) lex[head].push_back(alt);
  }
  return lex;
}

/// Synonym substitution, then token dropout, then adjacent swaps.
inline Tokens noise_sentence(const Tokens& sentence, const NoiserConfig& cfg, Rng& rng) {
  Tokens out;
  out.reserve(sentence.size());
  for (const auto& tok : sentence) {
    auto it = cfg.lexicon.find(tok);
    if (it != cfg.lexicon.end() && !it->second.empty() && uniform01(rng) < cfg.p_syn) {
      out.push_back(it->second[uniform_index(rng, it->second.size())]);
    } else {
      out.push_back(tok);
    }
  }

  if (cfg.p_drop > 0.0 && out.size() > cfg.min_tokens) {
    Tokens kept;
    std::size_t remaining = out.size();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (remaining > cfg.min_tokens && uniform01(rng) < cfg.p_drop) {
        --remaining;
        continue;
      }
      kept.push_back(out[i]);
    }
    out = std::move(kept);
  }

  if (cfg.p_swap > 0.0) {
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (uniform01(rng) < cfg.p_swap) {
        std::swap(out[i], out[i + 1]);
        ++i;
      }
    }
  }
  return out;
}

inline SentenceTransform rule_based_noiser(NoiserConfig cfg) {
  cfg.validate();
  return [cfg = std::move(cfg)](const Tokens& s, Rng& rng) { return noise_sentence(s, cfg, rng); };
}

inline TextDocument pseudo_paraphrase(const TextDocument& doc, const SentenceTransform& transform,
                                      std::uint64_t seed) {
  Rng rng(seed);
  TextDocument out{doc.id, {}};
  for (const auto& s : doc.sentences) {
    Tokens rewritten = transform(s, rng);
    if (rewritten.empty()) rewritten = s;  // never emit an empty sentence
    out.sentences.push_back(std::move(rewritten));
  }
  return out;
}

inline TextDocument pseudo_paraphrase(const TextDocument& doc, const NoiserConfig& cfg,
                                      std::uint64_t seed) {
  return pseudo_paraphrase(doc, rule_based_noiser(cfg), seed);
}

}  // namespace corpg
