// SPDX-License-Identifier: Apache-2.0
//
// JSON Lines readers and writers. Sentences travel as space-joined token
// strings.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpg/coherence.hpp"
#include "corpg/document.hpp"
#include "corpg/error.hpp"
#include "corpg/tensor_io.hpp"
#include "corpg/text.hpp"

namespace corpg {

namespace detail {

using nlohmann::json;

inline Tokens split_ws(const std::string& s) {
  Tokens out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

inline json sentences_json(const std::vector<Tokens>& sentences) {
  json arr = json::array();
  for (const auto& s : sentences) arr.push_back(detokenize(s));
  return arr;
}

inline std::vector<Tokens> sentences_from(const json& j, const std::string& field, std::size_t line) {
  if (!j.contains(field) || !j[field].is_array()) {
    throw DataError("line " + std::to_string(line) + ": missing array field '" + field + "'");
  }
  std::vector<Tokens> out;
  for (const auto& s : j[field]) {
    if (!s.is_string()) throw DataError("line " + std::to_string(line) + ": sentences must be strings");
    out.push_back(split_ws(s.get<std::string>()));
  }
  return out;
}

inline std::string id_from(const json& j, std::size_t line) {
  if (!j.contains("id") || !j["id"].is_string()) {
    throw DataError("line " + std::to_string(line) + ": missing string field 'id'");
  }
  return j["id"].get<std::string>();
}

// Calls fn(parsed object, 1-based line number) for every non-blank line.
template <class Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(path + ":" + std::to_string(lineno) + ": expected an object");
    fn(j, lineno);
  }
}

inline CoherenceGraph graph_from(const json& j, std::size_t line) {
  if (!j.contains("graph") || !j["graph"].is_array()) {
    throw DataError("line " + std::to_string(line) + ": missing array field 'graph'");
  }
  try {
    return CoherenceGraph::from_rows(j["graph"].get<std::vector<std::vector<int>>>());
  } catch (const json::exception& e) {
    throw DataError("line " + std::to_string(line) + ": malformed graph (" + e.what() + ")");
  }
}

}  // namespace detail

// {"id": str, "sentences": [str, ...]}
inline std::vector<TextDocument> read_documents(const std::string& path) {
  std::vector<TextDocument> docs;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    docs.push_back({detail::id_from(j, line), detail::sentences_from(j, "sentences", line)});
  });
  return docs;
}

inline std::string documents_jsonl(const std::vector<TextDocument>& docs) {
  std::string out;
  for (const auto& d : docs) {
    nlohmann::json j{{"id", d.id}, {"sentences", detail::sentences_json(d.sentences)}};
    out += j.dump() + "\n";
  }
  return out;
}

// {"id": str, "source": [str, ...], "target": [str, ...], "graph": [[0|1, ...], ...]}
inline std::vector<ParallelDoc> read_parallel(const std::string& path) {
  std::vector<ParallelDoc> docs;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    ParallelDoc p;
    p.id = detail::id_from(j, line);
    p.source = {p.id, detail::sentences_from(j, "source", line)};
    p.target = {p.id, detail::sentences_from(j, "target", line)};
    p.graph = detail::graph_from(j, line);
    if (p.graph.size() != p.source.sentences.size()) {
      throw DataError("line " + std::to_string(line) + ": graph size " +
                      std::to_string(p.graph.size()) + " does not match " +
                      std::to_string(p.source.sentences.size()) + " source sentences");
    }
    docs.push_back(std::move(p));
  });
  return docs;
}

inline std::string parallel_jsonl(const std::vector<ParallelDoc>& docs) {
  std::string out;
  for (const auto& p : docs) {
    nlohmann::json j{{"id", p.id},
                     {"source", detail::sentences_json(p.source.sentences)},
                     {"target", detail::sentences_json(p.target.sentences)},
                     {"graph", p.graph.rows()}};
    out += j.dump() + "\n";
  }
  return out;
}

// {"id": str, "graph": [[0|1, ...], ...]}
inline std::map<std::string, CoherenceGraph> read_graphs(const std::string& path) {
  std::map<std::string, CoherenceGraph> graphs;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    graphs[detail::id_from(j, line)] = detail::graph_from(j, line);
  });
  return graphs;
}

// {"id": str, "scores": [[real, ...], ...]}
inline std::map<std::string, ScoreMatrix> read_score_matrices(const std::string& path) {
  std::map<std::string, ScoreMatrix> scores;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    if (!j.contains("scores")) throw DataError("line " + std::to_string(line) + ": missing 'scores'");
    try {
      scores[detail::id_from(j, line)] = j["scores"].get<ScoreMatrix>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line) + ": malformed scores (" + e.what() + ")");
    }
  });
  return scores;
}

// {"id": str, "output": [str, ...]}
inline std::vector<TextDocument> read_outputs(const std::string& path) {
  std::vector<TextDocument> docs;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    docs.push_back({detail::id_from(j, line), detail::sentences_from(j, "output", line)});
  });
  return docs;
}

inline std::string outputs_jsonl(const std::vector<TextDocument>& docs) {
  std::string out;
  for (const auto& d : docs) {
    nlohmann::json j{{"id", d.id}, {"output", detail::sentences_json(d.sentences)}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace corpg
