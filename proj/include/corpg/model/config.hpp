// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "corpg/error.hpp"

namespace corpg {

enum class GraphModule { graph_gru, gat, none };

inline std::string to_string(GraphModule g) {
  switch (g) {
    case GraphModule::graph_gru:
      return "graph_gru";
    case GraphModule::gat:
      return "gat";
    case GraphModule::none:
      return "none";
  }
  return "none";
}

inline GraphModule parse_graph_module(const std::string& s) {
  if (s == "graph_gru") return GraphModule::graph_gru;
  if (s == "gat") return GraphModule::gat;
  if (s == "none") return GraphModule::none;
  throw UsageError("unknown graph module '" + s + "' (expected graph_gru, gat or none)");
}

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t d_ff = 256;
  double dropout = 0.1;
  std::size_t n_max = 64;         // tokens per sentence
  std::size_t max_sentences = 8;  // sentences per document
  GraphModule graph_module = GraphModule::graph_gru;
  bool sentence_position = false;
  bool copy = true;
  int boundary_id = -1;  // sentence separator id in target sequences

  std::size_t head_dim() const { return d_model / heads; }

  void validate() const {
    if (vocab_size < 6) throw ContractError("model config: vocab_size must cover reserved ids");
    if (d_model == 0 || heads == 0 || enc_layers == 0 || dec_layers == 0 || d_ff == 0 ||
        n_max == 0 || max_sentences == 0) {
      throw ContractError("model config: all dimensions must be positive");
    }
    if (d_model % heads != 0) {
      throw ContractError("model config: d_model " + std::to_string(d_model) +
                          " is not divisible by heads " + std::to_string(heads));
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("model config: dropout must lie in [0, 1)");
    if (boundary_id < 4 || static_cast<std::size_t>(boundary_id) >= vocab_size) {
      throw ContractError("model config: boundary_id must be a non-reserved vocabulary id");
    }
  }

  // Checkpoint header fields, in a fixed order.
  std::vector<std::pair<std::string, std::string>> fields() const {
    return {{"vocab_size", std::to_string(vocab_size)},
            {"d_model", std::to_string(d_model)},
            {"heads", std::to_string(heads)},
            {"enc_layers", std::to_string(enc_layers)},
            {"dec_layers", std::to_string(dec_layers)},
            {"d_ff", std::to_string(d_ff)},
            {"dropout", format_real(dropout)},
            {"n_max", std::to_string(n_max)},
            {"max_sentences", std::to_string(max_sentences)},
            {"graph_module", to_string(graph_module)},
            {"sentence_position", sentence_position ? "on" : "off"},
            {"copy", copy ? "on" : "off"},
            {"boundary_id", std::to_string(boundary_id)}};
  }

  static ModelConfig from_fields(const std::map<std::string, std::string>& f) {
    auto get = [&f](const std::string& k) -> const std::string& {
      auto it = f.find(k);
      if (it == f.end()) throw DataError("model config: missing field '" + k + "'");
      return it->second;
    };
    auto size = [&](const std::string& k) {
      try {
        return static_cast<std::size_t>(std::stoull(get(k)));
      } catch (const std::logic_error&) {
        throw DataError("model config: field '" + k + "' is not an integer");
      }
    };
    auto flag = [&](const std::string& k) {
      const std::string& v = get(k);
      if (v == "on") return true;
      if (v == "off") return false;
      throw DataError("model config: field '" + k + "' must be on or off");
    };
    ModelConfig c;
    c.vocab_size = size("vocab_size");
    c.d_model = size("d_model");
    c.heads = size("heads");
    c.enc_layers = size("enc_layers");
    c.dec_layers = size("dec_layers");
    c.d_ff = size("d_ff");
    try {
      c.dropout = std::stod(get("dropout"));
      c.boundary_id = std::stoi(get("boundary_id"));
    } catch (const std::logic_error&) {
      throw DataError("model config: malformed dropout or boundary_id");
    }
    c.n_max = size("n_max");
    c.max_sentences = size("max_sentences");
    try {
      c.graph_module = parse_graph_module(get("graph_module"));
    } catch (const UsageError& e) {
      throw DataError(e.what());
    }
    c.sentence_position = flag("sentence_position");
    c.copy = flag("copy");
    c.validate();
    return c;
  }

  // Shortest text that parses back to the same double.
  static std::string format_real(double v) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
      std::snprintf(buf, sizeof buf, "%.*g", prec, v);
      if (std::stod(buf) == v) break;
    }
    return buf;
  }
};

}  // namespace corpg
