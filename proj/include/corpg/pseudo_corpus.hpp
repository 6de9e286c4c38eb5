// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "corpg/coherence.hpp"
#include "corpg/document.hpp"
#include "corpg/noiser.hpp"
#include "corpg/parallel.hpp"

namespace corpg {

/// source = rewrite(doc), target = doc, graph over the source sentences.
/// Document i is rewritten with seed + i, so output does not depend on jobs.
inline std::vector<ParallelDoc> make_parallel_corpus(const std::vector<TextDocument>& docs,
                                                     const SentenceTransform& transform,
                                                     const CoherenceOracle& oracle, double eps,
                                                     std::uint64_t seed, int jobs = 1) {
  std::vector<ParallelDoc> out(docs.size());
  parallel_for(docs.size(), jobs, [&](std::size_t i) {
    ParallelDoc p;
    p.id = docs[i].id;
    p.target = docs[i];
    p.source = pseudo_paraphrase(docs[i], transform, seed + i);
    p.graph = build_graph(p.source, oracle, eps);
    out[i] = std::move(p);
  });
  return out;
}

inline std::vector<ParallelDoc> make_parallel_corpus(const std::vector<TextDocument>& docs,
                                                     const NoiserConfig& noiser,
                                                     const CoherenceOracle& oracle, double eps,
                                                     std::uint64_t seed, int jobs = 1) {
  return make_parallel_corpus(docs, rule_based_noiser(noiser), oracle, eps, seed, jobs);
}

/// Drops sentences shorter than min_tokens; documents left empty are removed.
inline std::vector<TextDocument> filter_short_sentences(const std::vector<TextDocument>& docs,
                                                        std::size_t min_tokens) {
  std::vector<TextDocument> out;
  for (const auto& d : docs) {
    TextDocument kept{d.id, {}};
    for (const auto& s : d.sentences) {
      if (s.size() >= min_tokens && !s.empty()) kept.sentences.push_back(s);
    }
    if (!kept.sentences.empty()) out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace corpg
