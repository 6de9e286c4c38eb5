// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "corpg/corpus_io.hpp"
#include "corpg/pseudo_corpus.hpp"
#include "corpg/vocab.hpp"

using namespace corpg;

namespace {

TextDocument make_doc(const std::string& id, const std::vector<std::string>& sentences) {
  TextDocument d{id, {}};
  for (const auto& s : sentences) d.sentences.push_back(tokenize(s));
  return d;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("corpg_textpipe_" + name)).string();
}

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("Hello, world."), (Tokens{"hello", ",", "world", "."}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("don't stop"), (Tokens{"don't", "stop"}));
  EXPECT_EQ(tokenize("(\"Quoted!\")"), (Tokens{"(", "\"", "quoted", "!", "\"", ")"}));
}

TEST(Tokenize, DetokenizeRoundTripsTokenLists) {
  for (const char* text : {"The cat, the dog; and (maybe) more!", "a  b\tc", "Why? Because.", ""}) {
    Tokens t = tokenize(text);
    EXPECT_EQ(detail::split_ws(detokenize(t)), t);
  }
}

TEST(SplitSentences, Examples) {
  EXPECT_EQ(split_sentences("A cat. A dog."), (std::vector<std::string>{"A cat.", "A dog."}));
  EXPECT_EQ(split_sentences("Dr. Smith left.").size(), 1u);
  EXPECT_EQ(split_sentences("Why? Because."), (std::vector<std::string>{"Why?", "Because."}));
  EXPECT_EQ(split_sentences("It costs 3.5 dollars. ok then").size(), 1u);
  EXPECT_EQ(split_sentences("Mr. and Mrs. Brown met e.g. Dr. Who.").size(), 1u);
}

TEST(SegmentDocuments, Sizes) {
  auto sizes = [](std::size_t n, std::size_t w) {
    std::vector<int> article(n);
    for (std::size_t i = 0; i < n; ++i) article[i] = static_cast<int>(i);
    std::vector<std::size_t> out;
    for (const auto& d : segment_documents(article, w)) out.push_back(d.size());
    return out;
  };
  EXPECT_EQ(sizes(12, 5), (std::vector<std::size_t>{5, 5, 2}));
  EXPECT_EQ(sizes(5, 5), (std::vector<std::size_t>{5}));
  EXPECT_EQ(sizes(6, 5), (std::vector<std::size_t>{5}));
  EXPECT_THROW(sizes(6, 1), ContractError);
}

TEST(SegmentDocuments, DropsAtMostOneTrailingSentence) {
  for (std::size_t n = 0; n < 30; ++n) {
    for (std::size_t w = 2; w < 7; ++w) {
      std::vector<int> article(n);
      for (std::size_t i = 0; i < n; ++i) article[i] = static_cast<int>(i);
      std::vector<int> flat;
      for (const auto& d : segment_documents(article, w)) flat.insert(flat.end(), d.begin(), d.end());
      ASSERT_LE(article.size() - flat.size(), 1u);
      ASSERT_TRUE(std::equal(flat.begin(), flat.end(), article.begin()));
    }
  }
}

TEST(Vocab, MinCountAndReservedIds) {
  Vocab v = Vocab::build(std::vector<Tokens>{{"a", "a", "b"}}, 2);
  EXPECT_EQ(v.encode("a"), 4);
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.encode("b"), kUnk);
  EXPECT_EQ(v.encode("<pad>"), 0);
  EXPECT_EQ(v.encode("<bos>"), 1);
  EXPECT_EQ(v.encode("<eos>"), 2);
  EXPECT_EQ(v.encode("<unk>"), 3);
  EXPECT_EQ(v.boundary_id(), static_cast<int>(v.size()) - 1);
  EXPECT_THROW(Vocab::build(std::vector<Tokens>{}, 1), DataError);
}

TEST(Vocab, FrequencyThenLexicographicOrder) {
  Vocab v = Vocab::build(std::vector<Tokens>{{"z", "y", "y", "b", "c", "c", "a"}}, 1);
  EXPECT_EQ(v.decode(4), "c");
  EXPECT_EQ(v.decode(5), "y");
  EXPECT_EQ(v.decode(6), "a");
  EXPECT_EQ(v.decode(7), "b");
  EXPECT_EQ(v.decode(8), "z");
  for (int id = 0; id < static_cast<int>(v.size()); ++id) EXPECT_EQ(v.encode(v.decode(id)), id);
  EXPECT_THROW(v.decode(static_cast<int>(v.size())), IndexError);
}

TEST(Vocab, FileRoundTrip) {
  Vocab v = Vocab::build(std::vector<Tokens>{{"the", "cat", "sat", "the"}}, 1);
  std::istringstream in(v.serialize());
  EXPECT_EQ(Vocab::parse(in), v);
  std::istringstream dup("a\nb\na\n");
  EXPECT_THROW(Vocab::parse(dup), DataError);
}

TEST(PseudoParaphrase, NoOpConfiguration) {
  TextDocument d = make_doc("d", {"The cat sat on the mat.", "It was happy."});
  EXPECT_EQ(pseudo_paraphrase(d, NoiserConfig{}, 1), d);
}

TEST(PseudoParaphrase, SynonymSubstitution) {
  NoiserConfig cfg;
  cfg.p_syn = 1.0;
  cfg.lexicon["cat"] = {"feline"};
  TextDocument d = make_doc("d", {"the cat sat"});
  EXPECT_EQ(pseudo_paraphrase(d, cfg, 5).sentences[0], (Tokens{"the", "feline", "sat"}));
}

TEST(PseudoParaphrase, DeterministicPreservesCountAndNeverEmpties) {
  NoiserConfig cfg;
  cfg.p_syn = 0.5;
  cfg.p_drop = 0.9;
  cfg.p_swap = 0.5;
  cfg.lexicon["cat"] = {"feline", "kitty"};
  TextDocument d = make_doc("d", {"the cat sat on a warm mat today", "ok", "a b", "one two three four"});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    TextDocument a = pseudo_paraphrase(d, cfg, seed);
    EXPECT_EQ(a, pseudo_paraphrase(d, cfg, seed));
    ASSERT_EQ(a.sentences.size(), d.sentences.size());
    for (std::size_t i = 0; i < a.sentences.size(); ++i) {
      EXPECT_FALSE(a.sentences[i].empty());
      EXPECT_GE(a.sentences[i].size(), std::min<std::size_t>(3, d.sentences[i].size()));
    }
  }
  SentenceTransform wipe = [](const Tokens&, Rng&) { return Tokens{}; };
  EXPECT_EQ(pseudo_paraphrase(d, wipe, 0), d);
}

TEST(PseudoParaphrase, RejectsBadProbabilities) {
  NoiserConfig cfg;
  cfg.p_drop = 1.5;
  EXPECT_THROW(pseudo_paraphrase(make_doc("d", {"a b c"}), cfg, 0), ContractError);
}

TEST(ParallelCorpus, IdentityNoiserAllCoherentOracle) {
  std::vector<TextDocument> docs = {make_doc("a", {"one two.", "three four.", "five six."}),
                                    make_doc("b", {"seven.", "eight nine."})};
  ConstantOracle coherent(1.0);
  auto corpus = make_parallel_corpus(docs, NoiserConfig{}, coherent, 0.5, 7);
  ASSERT_EQ(corpus.size(), docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    EXPECT_EQ(corpus[i].source, docs[i]);
    EXPECT_EQ(corpus[i].target, docs[i]);
    const std::size_t n = docs[i].sentences.size();
    EXPECT_EQ(corpus[i].graph.edge_count(), n * (n - 1));
  }
}

TEST(ParallelCorpus, OutputIndependentOfJobs) {
  std::vector<TextDocument> docs;
  for (int i = 0; i < 20; ++i) {
    docs.push_back(make_doc("d" + std::to_string(i), {"the cat sat on the mat", "a dog ran far away", "birds sing"}));
  }
  NoiserConfig cfg;
  cfg.p_drop = 0.3;
  cfg.p_swap = 0.3;
  ConstantOracle half(0.5);
  auto one = make_parallel_corpus(docs, cfg, half, 0.5, 3, 1);
  auto four = make_parallel_corpus(docs, cfg, half, 0.5, 3, 4);
  EXPECT_EQ(parallel_jsonl(one), parallel_jsonl(four));
}

TEST(CorpusIo, JsonlRoundTrips) {
  std::vector<TextDocument> docs = {make_doc("x", {"Hello, world.", "Bye now!"})};
  const std::string p = temp_path("docs.jsonl");
  write_text_file_atomic(p, documents_jsonl(docs));
  EXPECT_EQ(read_documents(p), docs);

  ConstantOracle coherent(0.9);
  auto corpus = make_parallel_corpus(docs, NoiserConfig{}, coherent, 0.5, 1);
  const std::string q = temp_path("parallel.jsonl");
  write_text_file_atomic(q, parallel_jsonl(corpus));
  auto back = read_parallel(q);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].source, corpus[0].source);
  EXPECT_EQ(back[0].graph, corpus[0].graph);
  std::filesystem::remove(p);
  std::filesystem::remove(q);
}

TEST(CorpusIo, MalformedInputIsADataError) {
  const std::string p = temp_path("bad.jsonl");
  write_text_file_atomic(p, "{\"id\": \"a\", \"sentences\": [\"x\"]}\nnot json\n");
  EXPECT_THROW(read_documents(p), DataError);
  write_text_file_atomic(p, "{\"id\": \"a\", \"source\": [\"x\"], \"target\": [\"x\"], \"graph\": [[1]]}\n");
  EXPECT_THROW(read_parallel(p), DataError);
  EXPECT_THROW(read_documents(temp_path("missing.jsonl")), DataError);
  std::filesystem::remove(p);
}
