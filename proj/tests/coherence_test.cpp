// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "corpg/coherence.hpp"

using namespace corpg;

namespace {

TextDocument numbered_doc(const std::string& id, std::size_t n) {
  TextDocument d{id, {}};
  for (std::size_t i = 0; i < n; ++i) d.sentences.push_back({"s" + std::to_string(i), "w"});
  return d;
}

// Scores pairs by the index carried in each sentence's first token.
FunctionOracle matrix_oracle(ScoreMatrix m) {
  return FunctionOracle([m = std::move(m)](const Tokens& a, const Tokens& b) {
    const auto i = std::stoul(a[0].substr(1));
    const auto j = std::stoul(b[0].substr(1));
    return m[i][j];
  });
}

}  // namespace

TEST(OrderPairs, ConstructionRule) {
  TextDocument d{"d", {{"A"}, {"B"}, {"C"}}};
  auto pairs = make_order_pairs({d});
  ASSERT_EQ(pairs.size(), 4u);
  EXPECT_EQ(pairs[0].first, Tokens{"A"});
  EXPECT_EQ(pairs[0].second, Tokens{"B"});
  EXPECT_EQ(pairs[0].label, 1.0);
  EXPECT_EQ(pairs[1].first, Tokens{"B"});
  EXPECT_EQ(pairs[1].second, Tokens{"C"});
  EXPECT_EQ(pairs[2].first, Tokens{"B"});
  EXPECT_EQ(pairs[2].second, Tokens{"A"});
  EXPECT_EQ(pairs[2].label, 0.0);
  EXPECT_EQ(pairs[3].first, Tokens{"C"});
  EXPECT_EQ(pairs[3].second, Tokens{"B"});
}

TEST(OrderScorer, LearnsSeparableSyntheticOrder) {
  // Sentence i always contains marker token t<i>; documents list markers in
  // increasing order with random filler words.
  Rng rng(17);
  std::vector<TextDocument> corpus;
  for (int d = 0; d < 40; ++d) {
    TextDocument doc{"d" + std::to_string(d), {}};
    for (int i = 0; i < 5; ++i) {
      Tokens s{"t" + std::to_string(i)};
      for (int k = 0; k < 3; ++k) s.push_back("f" + std::to_string(uniform_index(rng, 20)));
      doc.sentences.push_back(s);
    }
    corpus.push_back(doc);
  }
  OrderScorerConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 150;
  OrderScorerTraining t = train_order_scorer(corpus, cfg);
  EXPECT_GE(t.accuracy, 0.9);
  for (const auto& doc : corpus) {
    for (std::size_t i = 0; i + 1 < doc.sentences.size(); ++i) {
      const double p = t.scorer.score(doc.sentences[i], doc.sentences[i + 1]);
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      EXPECT_GT(p, t.scorer.score(doc.sentences[i + 1], doc.sentences[i]));
    }
  }
}

TEST(OrderScorer, RequiresMultiSentenceDocuments) {
  EXPECT_THROW(train_order_scorer({}, {}), InsufficientDataError);
  EXPECT_THROW(train_order_scorer({numbered_doc("a", 1)}, {}), InsufficientDataError);
}

TEST(OrderScorer, SaveLoadRoundTrip) {
  OrderScorerConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 5;
  OrderScorerTraining t = train_order_scorer({numbered_doc("a", 3), numbered_doc("b", 4)}, cfg);
  const std::string path = (std::filesystem::temp_directory_path() / "corpg_order_scorer.bin").string();
  t.scorer.save(path);
  OrderScorer back = OrderScorer::load(path);
  const Tokens a{"s0", "w"}, b{"s2", "zzz"};
  EXPECT_EQ(back.score(a, b), t.scorer.score(a, b));
  EXPECT_EQ(back.vocab(), t.scorer.vocab());
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".vocab");
}

TEST(BuildGraph, WorkedThreeByThreeExample) {
  auto oracle = matrix_oracle({{0, 0.9, 0.2}, {0.4, 0, 0.7}, {0.6, 0.1, 0}});
  CoherenceGraph g = build_graph(numbered_doc("d", 3), oracle, 0.5);
  EXPECT_EQ(g, CoherenceGraph::from_rows({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}));
}

TEST(BuildGraph, SingleSentenceAndDiagonal) {
  ConstantOracle all(1.0);
  CoherenceGraph one = build_graph(numbered_doc("d", 1), all);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(one.edge_count(), 0u);
  CoherenceGraph g = build_graph(numbered_doc("d", 5), all);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_FALSE(g.edge(i, i));
  EXPECT_EQ(g.edge_count(), 20u);
  EXPECT_THROW(build_graph(numbered_doc("d", 2), all, 1.0), ContractError);
  EXPECT_THROW(build_graph(numbered_doc("d", 2), all, 0.0), ContractError);
}

TEST(BuildGraph, EdgeCountNonIncreasingInEps) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 7);
    ScoreMatrix m(n, std::vector<double>(n));
    for (auto& row : m) {
      for (double& v : row) v = uniform01(rng);
    }
    auto oracle = matrix_oracle(m);
    std::size_t prev = n * n;
    for (double eps : {0.3, 0.5, 0.7, 0.9}) {
      const std::size_t e = build_graph(numbered_doc("d", n), oracle, eps).edge_count();
      EXPECT_LE(e, prev);
      prev = e;
    }
  }
}

TEST(BuildGraph, OracleOutOfRangeIsRejected) {
  ConstantOracle bad(1.5);
  EXPECT_THROW(build_graph(numbered_doc("d", 2), bad), DataError);
}

TEST(PrecomputedOracle, UsesMatricesById) {
  PrecomputedOracle oracle({{"d", {{0, 0.9, 0.2}, {0.4, 0, 0.7}, {0.6, 0.1, 0}}}});
  EXPECT_EQ(build_graph(numbered_doc("d", 3), oracle).edge_count(), 3u);
  CohScores c = coh_metrics(numbered_doc("d", 3), oracle);
  EXPECT_DOUBLE_EQ(c.coh, 1.0);
  EXPECT_DOUBLE_EQ(c.coh_p, 0.8);
  EXPECT_THROW(build_graph(numbered_doc("other", 3), oracle), DataError);
  EXPECT_THROW(build_graph(numbered_doc("d", 2), oracle), DataError);
}

TEST(CohMetrics, HandComputedValues) {
  auto oracle = matrix_oracle({{0, 0.9, 0}, {0, 0, 0.4}, {0, 0, 0}});
  CohScores c = coh_metrics(numbered_doc("d", 3), oracle);
  EXPECT_DOUBLE_EQ(c.coh, 0.5);
  EXPECT_DOUBLE_EQ(c.coh_p, 0.65);
  ConstantOracle one(1.0);
  CohScores u = coh_metrics(numbered_doc("d", 4), one);
  EXPECT_EQ(u.coh, 1.0);
  EXPECT_EQ(u.coh_p, 1.0);
  EXPECT_THROW(coh_metrics(numbered_doc("d", 1), one), UndefinedMetricError);
}

TEST(CohMetrics, HalfCohImpliesEnoughGoodPairs) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 6);
    ScoreMatrix m(n, std::vector<double>(n));
    for (auto& row : m) {
      for (double& v : row) v = uniform01(rng);
    }
    auto oracle = matrix_oracle(m);
    CohScores c = coh_metrics(numbered_doc("d", n), oracle);
    EXPECT_GE(c.coh, 0.0);
    EXPECT_LE(c.coh, 1.0);
    EXPECT_GE(c.coh_p, 0.0);
    EXPECT_LE(c.coh_p, 1.0);
    if (c.coh >= 0.5) {
      std::size_t good = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) good += m[i][i + 1] >= 0.5;
      EXPECT_GE(good, (n - 1 + 1) / 2);
    }
  }
}

TEST(Shuffle, AcceptsFirstWhenAlwaysCoherent) {
  ConstantOracle one(1.0);
  ShuffleResult r = shuffle_paraphrase(numbered_doc("d", 5), one, 10, 3);
  EXPECT_EQ(r.attempts, 1);
  EXPECT_EQ(r.coh, 1.0);
}

TEST(Shuffle, ExhaustsTriesWhenNeverCoherent) {
  ConstantOracle zero(0.0);
  ShuffleResult r = shuffle_paraphrase(numbered_doc("d", 5), zero, 7, 3);
  EXPECT_EQ(r.attempts, 7);
}

TEST(Shuffle, OutputIsAPermutationAndDeterministic) {
  auto oracle = matrix_oracle({{0, 0.1, 0.9, 0.2}, {0.8, 0, 0.1, 0.3}, {0.2, 0.7, 0, 0.1}, {0.6, 0.1, 0.1, 0}});
  TextDocument d = numbered_doc("d", 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ShuffleResult r = shuffle_paraphrase(d, oracle, 5, seed);
    EXPECT_EQ(r.doc, shuffle_paraphrase(d, oracle, 5, seed).doc);
    auto a = r.doc.sentences, b = d.sentences;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    EXPECT_EQ(r.doc, permute_sentences(d, r.order));
  }
}
