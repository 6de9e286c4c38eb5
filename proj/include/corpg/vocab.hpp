// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpg/error.hpp"
#include "corpg/text.hpp"

namespace corpg {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kFirstFreeId = 4;

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kBosToken = "<bos>";
inline constexpr const char* kEosToken = "<eos>";
inline constexpr const char* kUnkToken = "<unk>";
// Sentence boundary inside target documents. Always the last id.
inline constexpr const char* kSepToken = "<sep>";

/// Token <-> id map with four reserved ids and a trailing boundary token.
class Vocab {
 public:
  Vocab() : tokens_{kPadToken, kBosToken, kEosToken, kUnkToken} {
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
  }

  /// Tokens with frequency >= min_count, by descending frequency then
  /// lexicographically, followed by the boundary token.
  static Vocab build(const std::vector<Tokens>& sentences, int min_count = 1) {
    if (min_count < 1) throw ContractError("build_vocab: min_count must be >= 1");
    std::map<std::string, long> counts;
    for (const auto& s : sentences) {
      for (const auto& t : s) {
        if (is_reserved(t)) continue;
        ++counts[t];
      }
    }
    if (counts.empty()) throw DataError("build_vocab: empty vocabulary (corpus has no tokens)");
    std::vector<std::pair<std::string, long>> ordered(counts.begin(), counts.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab v;
    for (const auto& [tok, n] : ordered) {
      if (n >= min_count) v.append(tok);
    }
    v.append(kSepToken);
    return v;
  }

  static Vocab build(const std::vector<TextDocument>& docs, int min_count = 1) {
    std::vector<Tokens> all;
    for (const auto& d : docs) all.insert(all.end(), d.sentences.begin(), d.sentences.end());
    return build(all, min_count);
  }

  int encode(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  std::vector<int> encode(const Tokens& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(encode(t));
    return ids;
  }

  const std::string& decode(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw IndexError("vocab: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  std::size_t size() const { return tokens_.size(); }
  int boundary_id() const { return encode(kSepToken); }

  // Vocab file: one token per line, line k holds id k + 4.
  std::string serialize() const {
    std::string out;
    for (std::size_t i = kFirstFreeId; i < tokens_.size(); ++i) {
      out += tokens_[i];
      out.push_back('\n');
    }
    return out;
  }

  static Vocab parse(std::istream& in) {
    Vocab v;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (v.contains(line)) throw DataError("vocab file: duplicate token '" + line + "'");
      v.append(line);
    }
    if (!v.contains(kSepToken)) v.append(kSepToken);
    return v;
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocab file " + path);
    return parse(in);
  }

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  static bool is_reserved(const std::string& t) {
    return t == kPadToken || t == kBosToken || t == kEosToken || t == kUnkToken || t == kSepToken;
  }

  void append(const std::string& token) {
    index_[token] = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace corpg
