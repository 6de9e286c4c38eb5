// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "corpg/metrics.hpp"
#include "support/oracles.hpp"

using namespace corpg;

namespace {

Tokens words(const std::string& s) { return tokenize(s); }

Tokens random_tokens(Rng& rng, std::size_t max_len, std::size_t alphabet, std::size_t min_len = 0) {
  Tokens t(min_len + uniform_index(rng, max_len - min_len + 1));
  for (auto& w : t) w = std::string(1, static_cast<char>('a' + uniform_index(rng, alphabet)));
  return t;
}

TextDocument doc(const std::string& id, std::vector<std::string> sentences) {
  TextDocument d{id, {}};
  for (const auto& s : sentences) d.sentences.push_back(words(s));
  return d;
}

}  // namespace

TEST(Bleu, Examples) {
  EXPECT_DOUBLE_EQ(bleu(words("the cat sat on the mat"), words("the cat sat on the mat")), 100.0);
  EXPECT_DOUBLE_EQ(bleu(words("a b"), words("a b")), 100.0);
  EXPECT_EQ(bleu(words("x y z w"), words("a b c d")), 0.0);
  EXPECT_EQ(bleu(words("the cat sat"), words("the cat slept")), 0.0);
  EXPECT_EQ(bleu(Tokens{}, words("a")), 0.0);
  EXPECT_THROW(bleu(words("a"), Tokens{}), UndefinedMetricError);
}

TEST(Bleu, HandComputedWithBrevityPenalty) {
  // cand "a b c d" vs ref "a b c d e": precisions all 1, BP = exp(1 - 5/4)
  EXPECT_NEAR(bleu(words("a b c d"), words("a b c d e")), 100.0 * std::exp(-0.25), 1e-12);
  // clipping: "a a a a" vs "a b c d" has p1 = 1/4 and no 2-gram match
  BleuStats s = bleu_stats(words("a a a a"), words("a b c d"));
  EXPECT_EQ(s.matches[0], 1u);
  EXPECT_EQ(s.totals[0], 4u);
  EXPECT_EQ(s.matches[1], 0u);
}

TEST(Bleu, ReversalLowersBigramPrecision) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    Tokens t;
    const std::size_t n = 4 + uniform_index(rng, 6);
    for (std::size_t k = 0; k < n; ++k) t.push_back("w" + std::to_string(k));
    Tokens r(t.rbegin(), t.rend());
    EXPECT_LT(bleu_stats(r, t).matches[1], bleu_stats(t, t).matches[1]);
    EXPECT_LT(bleu(r, t), 100.0);
  }
}

TEST(Wer, Examples) {
  EXPECT_EQ(wer(words("a b c"), words("a b c")), 0.0);
  EXPECT_DOUBLE_EQ(wer(words("a c d"), words("a b c d")), 0.25);
  EXPECT_DOUBLE_EQ(wer(words("b c"), words("a")), 2.0);
  EXPECT_THROW(wer(words("a"), Tokens{}), UndefinedMetricError);
}

TEST(Wer, MatchesRecursiveOracle) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    Tokens h = random_tokens(rng, 8, 4);
    Tokens r = random_tokens(rng, 8, 4, 1);
    EXPECT_EQ(levenshtein(h, r), oracle::edit_distance(h, r));
    EXPECT_EQ(wer(h, r), static_cast<double>(oracle::edit_distance(h, r)) / static_cast<double>(r.size()));
  }
}

TEST(Ter, Examples) {
  EXPECT_EQ(ter(words("a b c d"), words("a b c d")), 0.0);
  TerResult shifted = ter_detail(words("c d a b"), words("a b c d"));
  EXPECT_EQ(shifted.shifts, 1u);
  EXPECT_EQ(shifted.edits, 0u);
  EXPECT_DOUBLE_EQ(shifted.score, 0.25);
  EXPECT_DOUBLE_EQ(ter(words("a c"), words("a b")), 0.5);
  EXPECT_THROW(ter(words("a"), Tokens{}), UndefinedMetricError);
}

TEST(Ter, ApplyShift) {
  const Tokens h = words("a b c d e");
  EXPECT_EQ(apply_shift(h, 0, 2, 3), words("c d e a b"));
  EXPECT_EQ(apply_shift(h, 3, 1, 0), words("d a b c e"));
}

TEST(Ter, BoundedByWerAndByExhaustiveSearch) {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    Tokens h = random_tokens(rng, 6, 3);
    Tokens r = random_tokens(rng, 6, 3, 1);
    const double t = ter(h, r);
    EXPECT_LE(t, wer(h, r) + 1e-12);
    EXPECT_GE(t, oracle::exhaustive_ter(h, r) - 1e-12);
    EXPECT_EQ(ter(r, r), 0.0);
  }
}

TEST(Ter, GreedyCanMissTheOptimalShiftSequence) {
  // two shifts reach the reference; the best single first shift leads elsewhere
  const Tokens h = words("a a b a b"), r = words("b b a a a");
  EXPECT_DOUBLE_EQ(oracle::exhaustive_ter(h, r), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(ter(h, r), 3.0 / 5.0);
}

TEST(CorpusReport, IdentityCorpus) {
  std::vector<TextDocument> docs{doc("a", {"the cat sat .", "it was warm ."}), doc("b", {"one two three four ."})};
  ConstantOracle always(0.9);
  EvalReport r = corpus_report(docs, docs, &always);
  EXPECT_DOUBLE_EQ(r.aggregate.self_bleu, 100.0);
  EXPECT_EQ(r.aggregate.self_ter, 0.0);
  EXPECT_EQ(r.aggregate.self_wer, 0.0);
  EXPECT_EQ(r.coh_skipped, 1u);
  EXPECT_DOUBLE_EQ(r.aggregate.coh, 100.0);
  EXPECT_DOUBLE_EQ(r.aggregate.coh_p, 90.0);
}

TEST(CorpusReport, MacroAverage) {
  // WER 0.2 and 0.4
  std::vector<TextDocument> orig{doc("x", {"a b c d e"}), doc("y", {"a b c d e"})};
  std::vector<TextDocument> gen{doc("x", {"a b c d f"}), doc("y", {"a b c f g"})};
  EvalReport r = corpus_report(orig, gen, nullptr);
  EXPECT_NEAR(r.documents[0].self_wer, 20.0, 1e-12);
  EXPECT_NEAR(r.documents[1].self_wer, 40.0, 1e-12);
  EXPECT_NEAR(r.aggregate.self_wer, 30.0, 1e-12);
  EXPECT_FALSE(r.aggregate.has_coh);
}

TEST(CorpusReport, SinglePairAggregateAndMicroBleu) {
  std::vector<TextDocument> orig{doc("x", {"a b c d", "e f g h"})};
  std::vector<TextDocument> gen{doc("x", {"e f g h", "a b c d"})};
  ReportOptions micro;
  micro.micro_bleu = true;
  EvalReport r = corpus_report(orig, gen, nullptr, micro);
  EXPECT_DOUBLE_EQ(r.aggregate.self_bleu, r.documents[0].self_bleu);
  EXPECT_DOUBLE_EQ(r.aggregate.self_ter, r.documents[0].self_ter);
  EXPECT_DOUBLE_EQ(r.documents[0].self_ter, 100.0 / 8.0);
}

TEST(CorpusReport, CsvLayoutAndJobsInvariance) {
  Rng rng(4);
  std::vector<TextDocument> orig, gen;
  for (int i = 0; i < 12; ++i) {
    orig.push_back({"d" + std::to_string(i), {random_tokens(rng, 6, 4, 1), random_tokens(rng, 6, 4, 1)}});
    gen.push_back({"d" + std::to_string(i), {random_tokens(rng, 6, 4, 1), random_tokens(rng, 6, 4, 1)}});
  }
  ConstantOracle half(0.5);
  ReportOptions four;
  four.jobs = 4;
  const std::string a = report_csv(corpus_report(orig, gen, &half));
  EXPECT_EQ(a, report_csv(corpus_report(orig, gen, &half, four)));
  EXPECT_EQ(a.rfind("id,self_bleu,self_ter,self_wer,coh,coh_p\nd0,", 0), 0u);
  EXPECT_NE(a.find("\nAGGREGATE,"), std::string::npos);
  EXPECT_THROW(corpus_report({}, {}, nullptr), DataError);
  EXPECT_THROW(corpus_report(orig, {}, nullptr), DataError);
}
