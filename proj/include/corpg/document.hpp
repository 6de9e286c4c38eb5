// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpg/error.hpp"
#include "corpg/text.hpp"
#include "corpg/vocab.hpp"

namespace corpg {

/// Directed graph over the sentences of one document. edge(i, j) means
/// sentence i can coherently precede sentence j. The diagonal is always 0.
class CoherenceGraph {
 public:
  CoherenceGraph() = default;
  explicit CoherenceGraph(std::size_t n) : n_(n), adj_(n * n, 0) {}

  static CoherenceGraph from_rows(const std::vector<std::vector<int>>& rows) {
    CoherenceGraph g(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) {
        throw DataError("graph: row " + std::to_string(i) + " has " +
                        std::to_string(rows[i].size()) + " entries, expected " +
                        std::to_string(rows.size()));
      }
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const int v = rows[i][j];
        if (v != 0 && v != 1) throw DataError("graph: entries must be 0 or 1");
        if (i == j && v != 0) throw DataError("graph: diagonal must be 0");
        g.set(i, j, v == 1);
      }
    }
    return g;
  }

  // Chain i -> i+1 over n nodes.
  static CoherenceGraph chain(std::size_t n) {
    CoherenceGraph g(n);
    for (std::size_t i = 0; i + 1 < n; ++i) g.set(i, i + 1, true);
    return g;
  }

  std::size_t size() const { return n_; }
  bool edge(std::size_t i, std::size_t j) const { return adj_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool on) {
    if (i == j && on) throw ContractError("graph: self-loops are not allowed");
    adj_[i * n_ + j] = on ? 1 : 0;
  }

  std::size_t edge_count() const {
    std::size_t c = 0;
    for (auto v : adj_) c += v;
    return c;
  }

  bool is_sink(std::size_t i) const {
    for (std::size_t j = 0; j < n_; ++j) {
      if (edge(i, j)) return false;
    }
    return true;
  }

  CoherenceGraph transposed() const {
    CoherenceGraph t(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) t.adj_[j * n_ + i] = adj_[i * n_ + j];
    }
    return t;
  }

  /// Relabels nodes: node old_index[k] of this graph becomes node k.
  CoherenceGraph permuted(const std::vector<std::size_t>& old_index) const {
    CoherenceGraph p(n_);
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b = 0; b < n_; ++b) {
        p.adj_[a * n_ + b] = adj_[old_index[a] * n_ + old_index[b]];
      }
    }
    return p;
  }

  std::vector<std::vector<int>> rows() const {
    std::vector<std::vector<int>> r(n_, std::vector<int>(n_, 0));
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) r[i][j] = adj_[i * n_ + j];
    }
    return r;
  }

  bool operator==(const CoherenceGraph&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> adj_;
};

/// Sentences as vocabulary ids (no BOS/EOS).
struct Document {
  std::string id;
  std::vector<std::vector<int>> sentences;
};

/// Pseudo-paraphrase source, original target, and the graph over the source.
struct ParallelDoc {
  std::string id;
  TextDocument source;
  TextDocument target;
  CoherenceGraph graph;
};

inline Document encode_document(const TextDocument& doc, const Vocab& vocab) {
  Document out{doc.id, {}};
  out.sentences.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) out.sentences.push_back(vocab.encode(s));
  return out;
}

inline TextDocument permute_sentences(const TextDocument& doc,
                                      const std::vector<std::size_t>& old_index) {
  TextDocument out{doc.id, {}};
  for (std::size_t k : old_index) out.sentences.push_back(doc.sentences.at(k));
  return out;
}

}  // namespace corpg
