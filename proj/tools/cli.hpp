// SPDX-License-Identifier: Apache-2.0
//
// corpg command line: preprocess, pseudo, train-oracle, train, generate,
// eval, sweep-eps, gradcheck.
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric. Boolean flags also take an
// explicit value: --sentence-position on, --no-copy off.
#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "corpg/coherence.hpp"
#include "corpg/corpus_io.hpp"
#include "corpg/decoding.hpp"
#include "corpg/diversity.hpp"
#include "corpg/grad_suite.hpp"
#include "corpg/log.hpp"
#include "corpg/metrics.hpp"
#include "corpg/model/checkpoint.hpp"
#include "corpg/pseudo_corpus.hpp"
#include "corpg/trainer.hpp"

namespace corpg::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Flat key=value file; '#' starts a comment, surrounding quotes are dropped.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(n) + ": expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) value = value.substr(1, value.size() - 2);
    out[key] = value;
  }
  return out;
}

/// Fills options not given on the command line from the config file.
inline void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : read_config_file(path)) {
    if (key == "config") continue;
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError("config file " + path + ": unknown key '" + key + "' for " + sub.get_name());
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

/// Effective configuration next to the outputs, with the derived seeds.
inline void echo_config(const CLI::App& sub, const fs::path& dir, std::uint64_t seed) {
  std::string text = "# corpg " + sub.get_name() + " effective configuration\n";
  text += sub.config_to_str(true, false);
  text += "# derived seeds: noiser=" + std::to_string(seed + seed_offset::noiser) +
          " oracle=" + std::to_string(seed + seed_offset::oracle) + " init=" + std::to_string(seed + seed_offset::init) +
          " shuffle=" + std::to_string(seed + seed_offset::shuffle) +
          " dropout=" + std::to_string(seed + seed_offset::dropout) +
          " sampling=" + std::to_string(seed + seed_offset::sampling) + "+doc_index\n";
  fs::create_directories(dir.empty() ? fs::path(".") : dir);
  write_text_file_atomic((dir / ("config-" + sub.get_name() + ".txt")).string(), text);
}

inline fs::path parent_dir(const std::string& file) {
  fs::path p = fs::path(file).parent_path();
  return p.empty() ? fs::path(".") : p;
}

inline void ensure_parent(const std::string& file) { fs::create_directories(parent_dir(file)); }

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  int jobs = 1;
};

inline void add_common(CLI::App* sub, Common& c, bool seeded = true) {
  sub->add_option("--config", c.config, "flat key=value file; command-line flags take precedence");
  if (seeded) sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
  sub->add_option("--jobs", c.jobs, "worker threads for per-document work")->capture_default_str();
}

struct OracleFlags {
  std::string scorer;
  std::string scores;
  std::optional<double> constant;
};

inline void add_oracle_flags(CLI::App* sub, OracleFlags& o) {
  sub->add_option("--oracle", o.scorer, "order scorer written by train-oracle");
  sub->add_option("--scores", o.scores, "JSONL of precomputed pair scores {id, scores}");
  sub->add_option("--constant", o.constant, "constant pair score in [0, 1]");
}

inline std::unique_ptr<CoherenceOracle> make_oracle(const OracleFlags& o, bool required) {
  const int given = (!o.scorer.empty()) + (!o.scores.empty()) + (o.constant.has_value());
  if (given > 1) throw UsageError("give at most one of --oracle, --scores, --constant");
  if (!o.scorer.empty()) return std::make_unique<OrderScorer>(OrderScorer::load(o.scorer));
  if (!o.scores.empty()) return std::make_unique<PrecomputedOracle>(read_score_matrices(o.scores));
  if (o.constant) return std::make_unique<ConstantOracle>(*o.constant);
  if (required) throw UsageError("an oracle is required: --oracle, --scores or --constant");
  return nullptr;
}

/// A source document and its graph, from either a parallel corpus (source +
/// graph fields) or a document file plus an oracle.
struct SourceDoc {
  TextDocument doc;
  CoherenceGraph graph;
};

inline bool is_parallel_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError(path + ":1: malformed JSON");
    return j.contains("source");
  }
  throw DataError(path + ": no records");
}

inline std::vector<SourceDoc> read_sources(const std::string& path, const CoherenceOracle* oracle, double eps,
                                           int jobs) {
  std::vector<SourceDoc> out;
  if (is_parallel_file(path)) {
    for (auto& p : read_parallel(path)) out.push_back({std::move(p.source), std::move(p.graph)});
    return out;
  }
  if (!oracle) throw UsageError(path + " has no graphs; give --oracle, --scores or --constant");
  auto docs = read_documents(path);
  out.resize(docs.size());
  parallel_for(docs.size(), jobs, [&](std::size_t i) {
    out[i].graph = build_graph(docs[i], *oracle, eps);
    out[i].doc = std::move(docs[i]);
  });
  return out;
}

/// Documents to compare against: the source side of a parallel file, or the
/// documents themselves.
inline std::vector<TextDocument> read_reference(const std::string& path) {
  if (!is_parallel_file(path)) return read_documents(path);
  std::vector<TextDocument> out;
  for (auto& p : read_parallel(path)) out.push_back(std::move(p.source));
  return out;
}

struct LoadedModel {
  CorpgModel model;
  Vocab vocab;
};

inline LoadedModel load_model_dir(const std::string& dir) {
  LoadedModel m{load_checkpoint((fs::path(dir) / "model.bin").string()), Vocab::load((fs::path(dir) / "vocab.txt").string())};
  if (m.vocab.size() != m.model.config().vocab_size) {
    throw DataError("vocab.txt has " + std::to_string(m.vocab.size()) + " entries, model expects " +
                    std::to_string(m.model.config().vocab_size));
  }
  return m;
}

inline std::vector<TextDocument> generate_all(const LoadedModel& m, const std::vector<SourceDoc>& sources,
                                              const DecodeConfig& base, int jobs) {
  std::vector<TextDocument> out(sources.size());
  parallel_for(sources.size(), jobs, [&](std::size_t i) {
    DecodeConfig cfg = base;
    cfg.seed = base.seed + seed_offset::sampling + i;
    const Document src = encode_document(sources[i].doc, m.vocab);
    const auto tokens = decode_tokens(model_step_fn(m.model, src, sources[i].graph), cfg);
    out[i] = detokenize_output(sources[i].doc.id, tokens, m.vocab);
  });
  return out;
}

inline std::string read_text(const std::string& path) { return read_file(path); }

class Runner {
 public:
  Runner() : app_("CoRPG: coherence-graph guided document paraphrasing") {
    app_.require_subcommand(1);
    app_.fallthrough(false);
    setup_preprocess();
    setup_pseudo();
    setup_train_oracle();
    setup_train();
    setup_generate();
    setup_eval();
    setup_sweep();
    setup_gradcheck();
  }

  int run(int argc, const char* const* argv) {
    try {
      app_.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      app_.exit(e);
      return kOk;
    } catch (const CLI::CallForAllHelp& e) {
      app_.exit(e);
      return kOk;
    } catch (const CLI::ParseError& e) {
      std::cerr << "error: " << e.what() << "\n\n";
      const CLI::App* sub = selected();
      std::cerr << (sub ? sub->help() : app_.help());
      return kUsage;
    }
    try {
      for (CLI::App* sub : app_.get_subcommands()) {
        apply_config(*sub, common_.config);
        check_required(*sub);
        return handlers_.at(sub->get_name())(*sub);
      }
      return kUsage;
    } catch (const UsageError& e) {
      log().error("{}", e.what());
      return kUsage;
    } catch (const ContractError& e) {
      log().error("{}", e.what());
      return kUsage;
    } catch (const NumericError& e) {
      log().error("{}", e.what());
      return kNumeric;
    } catch (const CLI::ParseError& e) {
      log().error("{}", e.what());
      return kUsage;
    } catch (const std::exception& e) {
      log().error("{}", e.what());
      return kData;
    }
  }

 private:
  const CLI::App* selected() const {
    for (const CLI::App* s : app_.get_subcommands()) return s;
    return nullptr;
  }

  // Checked after the config file is applied, so a file can supply them.
  void require(CLI::Option* opt) {
    opt->description(opt->get_description() + " (required)");
    required_.push_back(opt);
  }

  void check_required(const CLI::App& sub) const {
    for (const CLI::Option* opt : sub.get_options()) {
      const bool needed = std::find(required_.begin(), required_.end(), opt) != required_.end();
      if (needed && opt->count() == 0) throw UsageError(opt->get_name() + " is required");
    }
  }

  CLI::App* add(const std::string& name, const std::string& help, std::function<int(CLI::App&)> fn) {
    CLI::App* sub = app_.add_subcommand(name, help);
    handlers_[name] = std::move(fn);
    return sub;
  }

  void setup_preprocess() {
    auto* s = add("preprocess", "raw text articles -> document JSONL", [this](CLI::App& sub) {
      std::vector<TextDocument> docs;
      std::size_t article = 0;
      for (const auto& path : pre_.inputs) {
        std::istringstream text(read_text(path));
        std::string line, para;
        auto flush = [&] {
          if (para.find_first_not_of(" \t\r\n") == std::string::npos) {
            para.clear();
            return;
          }
          std::vector<Tokens> sentences;
          for (const auto& s : split_sentences(para)) {
            Tokens t = tokenize(s);
            if (t.size() >= pre_.min_tokens && !t.empty()) sentences.push_back(std::move(t));
          }
          std::size_t chunk = 0;
          for (auto& d : segment_documents(sentences, pre_.window)) {
            docs.push_back({"a" + std::to_string(article) + "-" + std::to_string(chunk++), std::move(d)});
          }
          ++article;
          para.clear();
        };
        while (std::getline(text, line)) {
          if (line.find_first_not_of(" \t\r") == std::string::npos) {
            flush();
          } else {
            para += line + " ";
          }
        }
        flush();
      }
      if (docs.empty()) throw InsufficientDataError("preprocess: no document with >= 2 sentences");
      ensure_parent(pre_.output);
      write_text_file_atomic(pre_.output, documents_jsonl(docs));
      echo_config(sub, parent_dir(pre_.output), common_.seed);
      log().info("wrote {} documents to {}", docs.size(), pre_.output);
      return kOk;
    });
    add_common(s, common_, false);
    require(s->add_option("--input", pre_.inputs, "raw text files; blank lines separate articles"));
    require(s->add_option("--output", pre_.output, "document JSONL"));
    s->add_option("--window", pre_.window, "sentences per document")->capture_default_str();
    s->add_option("--min-tokens", pre_.min_tokens, "drop shorter sentences")->capture_default_str();
  }

  void setup_pseudo() {
    auto* s = add("pseudo", "documents -> pseudo parallel corpus with coherence graphs", [this](CLI::App& sub) {
      auto oracle = make_oracle(oracle_, true);
      NoiserConfig nc;
      nc.p_syn = pseudo_.p_syn;
      nc.p_drop = pseudo_.p_drop;
      nc.p_swap = pseudo_.p_swap;
      nc.min_tokens = pseudo_.min_tokens;
      if (!pseudo_.lexicon.empty()) nc.lexicon = load_lexicon(pseudo_.lexicon);
      nc.validate();
      auto docs = read_documents(pseudo_.input);
      auto corpus = make_parallel_corpus(docs, nc, *oracle, pseudo_.eps, common_.seed + seed_offset::noiser,
                                         common_.jobs);
      ensure_parent(pseudo_.output);
      write_text_file_atomic(pseudo_.output, parallel_jsonl(corpus));
      echo_config(sub, parent_dir(pseudo_.output), common_.seed);
      log().info("wrote {} parallel documents to {}", corpus.size(), pseudo_.output);
      return kOk;
    });
    add_common(s, common_);
    add_oracle_flags(s, oracle_);
    require(s->add_option("--input", pseudo_.input, "document JSONL"));
    require(s->add_option("--output", pseudo_.output, "parallel JSONL"));
    s->add_option("--eps", pseudo_.eps, "edge threshold on pair scores")->capture_default_str();
    s->add_option("--p-syn", pseudo_.p_syn, "synonym substitution probability")->capture_default_str();
    s->add_option("--p-drop", pseudo_.p_drop, "token dropout probability")->capture_default_str();
    s->add_option("--p-swap", pseudo_.p_swap, "adjacent swap probability")->capture_default_str();
    s->add_option("--min-tokens", pseudo_.min_tokens, "dropout floor")->capture_default_str();
    s->add_option("--lexicon", pseudo_.lexicon, "synonym file: word alt1 alt2 ...");
  }

  void setup_train_oracle() {
    auto* s = add("train-oracle", "fit the sentence-order scorer", [this](CLI::App& sub) {
      OrderScorerConfig c;
      c.dim = oracle_train_.dim;
      c.epochs = oracle_train_.epochs;
      c.lr = oracle_train_.lr;
      c.min_count = oracle_train_.min_count;
      c.seed = common_.seed + seed_offset::oracle;
      auto result = train_order_scorer(read_documents(oracle_train_.input), c);
      ensure_parent(oracle_train_.output);
      result.scorer.save(oracle_train_.output);
      echo_config(sub, parent_dir(oracle_train_.output), common_.seed);
      std::printf("train_accuracy=%.6f loss=%.6f\n", result.accuracy, result.loss);
      return kOk;
    });
    add_common(s, common_);
    require(s->add_option("--input", oracle_train_.input, "document JSONL"));
    require(s->add_option("--output", oracle_train_.output, "scorer file (vocab written alongside)"));
    s->add_option("--dim", oracle_train_.dim)->capture_default_str();
    s->add_option("--epochs", oracle_train_.epochs)->capture_default_str();
    s->add_option("--lr", oracle_train_.lr)->capture_default_str();
    s->add_option("--min-count", oracle_train_.min_count)->capture_default_str();
  }

  void setup_train() {
    auto* s = add("train", "train the paraphrase model", [this](CLI::App& sub) {
      auto corpus = read_parallel(train_.input);
      if (corpus.empty()) throw DataError("train: empty corpus");
      std::vector<TextDocument> all;
      for (const auto& p : corpus) {
        all.push_back(p.source);
        all.push_back(p.target);
      }
      Vocab vocab = Vocab::build(all, train_.vocab_min_count);

      ModelConfig mc;
      mc.vocab_size = vocab.size();
      mc.boundary_id = vocab.boundary_id();
      mc.d_model = train_.d_model;
      mc.heads = train_.heads;
      mc.enc_layers = train_.enc_layers;
      mc.dec_layers = train_.dec_layers;
      mc.d_ff = train_.d_ff;
      mc.dropout = train_.dropout;
      mc.n_max = train_.n_max;
      mc.max_sentences = train_.max_sentences;
      mc.graph_module = parse_graph_module(train_.graph_module);
      mc.sentence_position = train_.sentence_position;
      mc.copy = !train_.no_copy;
      mc.validate();

      TrainConfig tc;
      tc.adam.lr = train_.lr;
      tc.adam.warmup = train_.warmup;
      tc.adam.clip = train_.clip;
      tc.adam.schedule = train_.constant_lr ? LrSchedule::constant : LrSchedule::inverse_sqrt;
      tc.batch_size = train_.batch;
      tc.max_steps = train_.steps;
      tc.log_every = train_.log_every;
      tc.checkpoint_every = train_.checkpoint_every;
      tc.seed = common_.seed;
      tc.out_dir = train_.out_dir;

      DiversityConfig dc;
      dc.lambda = {{1, train_.lambda1}, {2, train_.lambda2}};
      if (train_.no_div_coef) dc = DiversityConfig::disabled();
      tc.validate();
      dc.validate();

      std::vector<TrainingExample> data;
      for (const auto& p : corpus) data.push_back(make_example(p, vocab));

      fs::create_directories(train_.out_dir);
      write_text_file_atomic((fs::path(train_.out_dir) / "vocab.txt").string(), vocab.serialize());
      echo_config(sub, train_.out_dir, common_.seed);
      CorpgModel model(mc, common_.seed + seed_offset::init);
      log().info("{} documents, vocab {}, {} parameters", data.size(), vocab.size(), model.params().parameter_count());
      train(model, data, tc, dc);
      const TeacherForcedScore score = evaluate_teacher_forced(model, data);
      std::printf("final_loss=%.6f token_acc=%.6f\n", score.loss, score.token_acc);
      return kOk;
    });
    add_common(s, common_);
    require(s->add_option("--input", train_.input, "parallel JSONL"));
    require(s->add_option("--out-dir", train_.out_dir, "model.bin, vocab.txt, metrics.csv, checkpoints"));
    s->add_flag("--no-div-coef{true}", train_.no_div_coef, "plain NLL (no diversity multipliers)")->expected(0, 1);
    s->add_option("--graph-module", train_.graph_module, "graph_gru, gat or none")->capture_default_str();
    s->add_flag("--sentence-position{true}", train_.sentence_position, "add learned sentence-index embeddings")->expected(0, 1);
    s->add_flag("--no-copy{true}", train_.no_copy, "disable the copy mechanism")->expected(0, 1);
    s->add_option("--lambda1", train_.lambda1)->capture_default_str();
    s->add_option("--lambda2", train_.lambda2)->capture_default_str();
    s->add_option("--d-model", train_.d_model)->capture_default_str();
    s->add_option("--heads", train_.heads)->capture_default_str();
    s->add_option("--enc-layers", train_.enc_layers)->capture_default_str();
    s->add_option("--dec-layers", train_.dec_layers)->capture_default_str();
    s->add_option("--d-ff", train_.d_ff)->capture_default_str();
    s->add_option("--dropout", train_.dropout)->capture_default_str();
    s->add_option("--n-max", train_.n_max, "tokens kept per sentence")->capture_default_str();
    s->add_option("--max-sentences", train_.max_sentences)->capture_default_str();
    s->add_option("--steps", train_.steps)->capture_default_str();
    s->add_option("--batch", train_.batch, "documents per step")->capture_default_str();
    s->add_option("--lr", train_.lr)->capture_default_str();
    s->add_option("--warmup", train_.warmup)->capture_default_str();
    s->add_flag("--constant-lr{true}", train_.constant_lr, "no inverse-sqrt decay")->expected(0, 1);
    s->add_option("--clip", train_.clip)->capture_default_str();
    s->add_option("--log-every", train_.log_every)->capture_default_str();
    s->add_option("--checkpoint-every", train_.checkpoint_every)->capture_default_str();
    s->add_option("--vocab-min-count", train_.vocab_min_count)->capture_default_str();
  }

  void add_decode_flags(CLI::App* s) {
    s->add_option("--decode", decode_.method, "greedy, beam or topk")->capture_default_str();
    s->add_option("--beam", decode_.beam)->capture_default_str();
    s->add_option("--k", decode_.k)->capture_default_str();
    s->add_option("--temperature", decode_.temperature)->capture_default_str();
    s->add_option("--max-len", decode_.max_len)->capture_default_str();
    s->add_option("--alpha", decode_.alpha, "length penalty exponent")->capture_default_str();
  }

  DecodeConfig decode_config() const {
    DecodeConfig c;
    c.method = parse_decode_method(decode_.method);
    c.beam = decode_.beam;
    c.k = decode_.k;
    c.temperature = decode_.temperature;
    c.max_len = decode_.max_len;
    c.length_alpha = decode_.alpha;
    c.seed = common_.seed;
    c.validate();
    return c;
  }

  void setup_generate() {
    auto* s = add("generate", "paraphrase documents with a trained model", [this](CLI::App& sub) {
      const DecodeConfig dc = decode_config();
      auto oracle = make_oracle(oracle_, false);
      LoadedModel m = load_model_dir(gen_.model);
      auto sources = read_sources(gen_.input, oracle.get(), gen_.eps, common_.jobs);
      auto outputs = generate_all(m, sources, dc, common_.jobs);
      ensure_parent(gen_.output);
      write_text_file_atomic(gen_.output, outputs_jsonl(outputs));
      echo_config(sub, parent_dir(gen_.output), common_.seed);
      log().info("wrote {} outputs to {}", outputs.size(), gen_.output);
      return kOk;
    });
    add_common(s, common_);
    add_oracle_flags(s, oracle_);
    require(s->add_option("--model", gen_.model, "directory written by train"));
    require(s->add_option("--input", gen_.input, "parallel JSONL, or document JSONL with an oracle"));
    require(s->add_option("--output", gen_.output, "output JSONL {id, output}"));
    s->add_option("--eps", gen_.eps, "edge threshold when graphs are built here")->capture_default_str();
    add_decode_flags(s);
  }

  void setup_eval() {
    auto* s = add("eval", "diversity and coherence report", [this](CLI::App& sub) {
      auto oracle = make_oracle(oracle_, false);
      auto reference = read_reference(eval_.reference);
      auto generated = read_outputs(eval_.generated);
      std::map<std::string, const TextDocument*> by_id;
      for (const auto& g : generated) by_id[g.id] = &g;
      std::vector<TextDocument> matched;
      for (const auto& r : reference) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) throw DataError("eval: no generated output for id '" + r.id + "'");
        matched.push_back(*it->second);
      }
      ReportOptions opt;
      opt.micro_bleu = eval_.micro_bleu;
      opt.jobs = common_.jobs;
      EvalReport rep = corpus_report(reference, matched, oracle.get(), opt);
      ensure_parent(eval_.output);
      const std::string csv = report_csv(rep);
      write_text_file_atomic(eval_.output, csv);
      echo_config(sub, parent_dir(eval_.output), common_.seed);
      std::fputs(csv.substr(csv.rfind("AGGREGATE")).c_str(), stdout);
      if (rep.coh_skipped > 0 && oracle) log().info("{} documents without COH (fewer than 2 sentences)", rep.coh_skipped);
      return kOk;
    });
    add_common(s, common_, false);
    add_oracle_flags(s, oracle_);
    require(s->add_option("--reference", eval_.reference, "inputs: parallel JSONL (source side) or document JSONL"));
    require(s->add_option("--generated", eval_.generated, "output JSONL from generate"));
    require(s->add_option("--output", eval_.output, "report CSV"));
    s->add_flag("--micro-bleu{true}", eval_.micro_bleu, "pool n-gram counts over the corpus for the aggregate")->expected(0, 1);
  }

  void setup_sweep() {
    auto* s = add("sweep-eps", "rebuild graphs for each eps and report edges and COH", [this](CLI::App& sub) {
      auto oracle = make_oracle(oracle_, true);
      std::vector<double> eps_list;
      {
        std::stringstream ss(sweep_.eps_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
          try {
            eps_list.push_back(std::stod(item));
          } catch (const std::exception&) {
            throw UsageError("--eps-list: '" + item + "' is not a number");
          }
        }
      }
      if (eps_list.empty()) throw UsageError("--eps-list is empty");
      auto docs = read_reference(sweep_.input);
      std::optional<LoadedModel> m;
      if (!sweep_.model.empty()) m = load_model_dir(sweep_.model);
      const DecodeConfig dc = decode_config();
      std::string csv = "eps,edges,mean_out_degree,coh,coh_p\n";
      for (double eps : eps_list) {
        std::vector<SourceDoc> sources(docs.size());
        parallel_for(docs.size(), common_.jobs, [&](std::size_t i) {
          sources[i] = {docs[i], build_graph(docs[i], *oracle, eps)};
        });
        std::size_t edges = 0, nodes = 0;
        for (const auto& sd : sources) {
          edges += sd.graph.edge_count();
          nodes += sd.graph.size();
        }
        std::string coh, coh_p;
        if (m) {
          EvalReport rep = corpus_report(docs, generate_all(*m, sources, dc, common_.jobs), oracle.get(),
                                         ReportOptions{false, {}, common_.jobs});
          if (rep.aggregate.has_coh) {
            coh = detail::csv_number(rep.aggregate.coh);
            coh_p = detail::csv_number(rep.aggregate.coh_p);
          }
        }
        csv += detail::csv_number(eps) + "," + std::to_string(edges) + "," +
               detail::csv_number(static_cast<double>(edges) / static_cast<double>(nodes)) + "," + coh + "," + coh_p +
               "\n";
      }
      ensure_parent(sweep_.output);
      write_text_file_atomic(sweep_.output, csv);
      echo_config(sub, parent_dir(sweep_.output), common_.seed);
      std::fputs(csv.c_str(), stdout);
      return kOk;
    });
    add_common(s, common_);
    add_oracle_flags(s, oracle_);
    require(s->add_option("--input", sweep_.input, "document JSONL or parallel JSONL (source side)"));
    require(s->add_option("--output", sweep_.output, "sweep CSV"));
    s->add_option("--eps-list", sweep_.eps_list, "comma-separated thresholds")->capture_default_str();
    s->add_option("--model", sweep_.model, "model directory; when given, COH is measured on its outputs");
    add_decode_flags(s);
  }

  void setup_gradcheck() {
    auto* s = add("gradcheck", "finite-difference check of every op and the model loss", [this](CLI::App&) {
      bool ok = true;
      for (const auto& r : run_grad_suite(grad_.op_tol, grad_.model_tol, common_.seed)) {
        std::printf("%-18s rel_error=%.3e tol=%.0e %s\n", r.name.c_str(), r.rel_error, r.tolerance,
                    r.passed ? "PASS" : "FAIL");
        ok = ok && r.passed;
      }
      return ok ? kOk : kNumeric;
    });
    add_common(s, common_);
    s->add_option("--op-tol", grad_.op_tol)->capture_default_str();
    s->add_option("--model-tol", grad_.model_tol)->capture_default_str();
  }

  CLI::App app_;
  std::map<std::string, std::function<int(CLI::App&)>> handlers_;
  std::vector<CLI::Option*> required_;
  Common common_;
  OracleFlags oracle_;

  struct {
    std::vector<std::string> inputs;
    std::string output;
    std::size_t window = 5;
    std::size_t min_tokens = 1;
  } pre_;

  struct {
    std::string input, output, lexicon;
    double eps = 0.5;
    double p_syn = 0.3, p_drop = 0.1, p_swap = 0.1;
    std::size_t min_tokens = 3;
  } pseudo_;

  struct {
    std::string input, output;
    std::size_t dim = 32;
    int epochs = 200;
    double lr = 0.05;
    int min_count = 1;
  } oracle_train_;

  struct {
    std::string input, out_dir;
    bool no_div_coef = false;
    std::string graph_module = "graph_gru";
    bool sentence_position = false;
    bool no_copy = false;
    double lambda1 = 2.0, lambda2 = 1.0;
    std::size_t d_model = 64, heads = 4, enc_layers = 2, dec_layers = 2, d_ff = 256;
    double dropout = 0.1;
    std::size_t n_max = 64, max_sentences = 8;
    long steps = 1000;
    std::size_t batch = 8;
    double lr = 1e-3;
    int warmup = 0;
    bool constant_lr = false;
    double clip = 1.0;
    long log_every = 50, checkpoint_every = 0;
    int vocab_min_count = 1;
  } train_;

  struct {
    std::string method = "beam";
    std::size_t beam = 4, k = 5, max_len = 200;
    double temperature = 1.0, alpha = 0.6;
  } decode_;

  struct {
    std::string model, input, output;
    double eps = 0.5;
  } gen_;

  struct {
    std::string reference, generated, output;
    bool micro_bleu = false;
  } eval_;

  struct {
    std::string input, output, model;
    std::string eps_list = "0.3,0.5,0.7,0.9";
  } sweep_;

  struct {
    double op_tol = 1e-6, model_tol = 1e-4;
  } grad_;
};

inline int run(int argc, const char* const* argv) {
  Runner r;
  return r.run(argc, argv);
}

}  // namespace corpg::cli
