// SPDX-License-Identifier: Apache-2.0
//
// Tokenization, sentence splitting and fixed-window document segmentation.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "corpg/error.hpp"

namespace corpg {

using Tokens = std::vector<std::string>;

// A document whose sentences are token strings (before vocabulary encoding).
struct TextDocument {
  std::string id;
  std::vector<Tokens> sentences;

  bool operator==(const TextDocument&) const = default;
};

namespace detail {

inline bool is_split_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case ';':
    case ':':
    case '?':
    case '!':
    case '"':
    case '\'':
    case '(':
    case ')':
      return true;
    default:
      return false;
  }
}

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace detail

/// Lowercases, splits on whitespace and peels leading/trailing punctuation
/// into single-character tokens. Internal punctuation (don't, e.g) stays.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && detail::is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !detail::is_space(text[j])) ++j;
    if (j > i) {
      std::string word(text.substr(i, j - i));
      for (char& c : word) {
        if (static_cast<unsigned char>(c) < 128) c = static_cast<char>(std::tolower(c));
      }
      std::size_t lo = 0, hi = word.size();
      while (lo < hi && detail::is_split_punct(word[lo])) ++lo;
      while (hi > lo && detail::is_split_punct(word[hi - 1])) --hi;
      for (std::size_t k = 0; k < lo; ++k) out.emplace_back(1, word[k]);
      if (hi > lo) out.push_back(word.substr(lo, hi - lo));
      for (std::size_t k = hi; k < word.size(); ++k) out.emplace_back(1, word[k]);
    }
    i = j;
  }
  return out;
}

inline std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

/// Splits on '.', '?' or '!' followed by whitespace and an uppercase letter,
/// or by the end of the text. A '.' closing a known abbreviation never splits.
inline std::vector<std::string> split_sentences(std::string_view text) {
  static constexpr std::array<std::string_view, 6> kAbbreviations = {"mr.", "mrs.", "dr.",
                                                                     "e.g.", "i.e.", "u.s."};
  std::vector<std::string> out;
  auto push = [&out](std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && detail::is_space(s[a])) ++a;
    while (b > a && detail::is_space(s[b - 1])) --b;
    if (b > a) out.emplace_back(s.substr(a, b - a));
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '?' && c != '!') continue;
    std::size_t j = i + 1;
    bool boundary = false;
    if (j == text.size()) {
      boundary = true;
    } else if (detail::is_space(text[j])) {
      while (j < text.size() && detail::is_space(text[j])) ++j;
      boundary = j == text.size() || std::isupper(static_cast<unsigned char>(text[j])) != 0;
    }
    if (!boundary) continue;
    if (c == '.') {
      std::size_t w = i;
      while (w > start && !detail::is_space(text[w - 1])) --w;
      std::string word(text.substr(w, i + 1 - w));
      for (char& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end()) {
        continue;
      }
    }
    push(text.substr(start, i + 1 - start));
    start = i + 1;
  }
  if (start < text.size()) push(text.substr(start));
  return out;
}

/// Consecutive non-overlapping chunks of `window` sentences. A trailing chunk
/// of at least two sentences is kept; a single leftover sentence is dropped.
template <class Sentence>
std::vector<std::vector<Sentence>> segment_documents(const std::vector<Sentence>& article,
                                                     std::size_t window = 5) {
  if (window < 2) throw ContractError("segment_documents: window must be >= 2");
  std::vector<std::vector<Sentence>> docs;
  for (std::size_t i = 0; i < article.size(); i += window) {
    const std::size_t end = std::min(article.size(), i + window);
    if (end - i < 2) break;
    docs.emplace_back(article.begin() + static_cast<std::ptrdiff_t>(i),
                      article.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return docs;
}

}  // namespace corpg
