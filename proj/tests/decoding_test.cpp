// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "corpg/decoding.hpp"
#include "support/oracles.hpp"

using namespace corpg;

namespace {

// Same distribution at every step.
StepFn fixed_step(std::vector<double> p) {
  return [p = std::move(p)](const std::vector<int>&) { return p; };
}

// Records every distribution the decoder saw.
struct RecordingStep {
  StepFn inner;
  std::vector<std::vector<double>>* seen;
  std::vector<double> operator()(const std::vector<int>& prefix) const {
    auto p = inner(prefix);
    seen->push_back(p);
    return p;
  }
};

double sequence_log_prob(const StepFn& step, const std::vector<int>& tokens) {
  std::vector<int> prefix{kBos};
  double lp = 0.0;
  for (int t : tokens) {
    lp += std::log(step(prefix)[static_cast<std::size_t>(t)]);
    prefix.push_back(t);
  }
  return lp;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 14;
  c.d_model = 8;
  c.heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.d_ff = 16;
  c.dropout = 0.0;
  c.boundary_id = 13;
  return c;
}

}  // namespace

TEST(Greedy, StopsAtEosAndRespectsMaxLen) {
  // argmax is EOS
  EXPECT_EQ(greedy_decode(fixed_step({0, 0, 0.6, 0.4}), 10), (std::vector<int>{kEos}));
  EXPECT_EQ(greedy_decode(fixed_step({0, 0, 0.1, 0.9}), 4), (std::vector<int>{3, 3, 3, 3}));
  // tie goes to the smaller id
  EXPECT_EQ(greedy_decode(fixed_step({0, 0, 0.0, 0.5, 0.5}), 2), (std::vector<int>{3, 3}));
  EXPECT_THROW(greedy_decode(fixed_step({1.0}), 0), ContractError);
}

TEST(Beam, WidthOneEqualsGreedy) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    StepFn step = oracle::random_step_model(7, seed, 0.5);
    for (double alpha : {0.0, 0.6}) {
      EXPECT_EQ(beam_search(step, 1, 12, alpha).tokens, greedy_decode(step, 12)) << seed;
    }
  }
}

TEST(Beam, FindsBestOfNineSequences) {
  // tokens 3, 4, 5; EOS unreachable, so all 9 two-token paths end at max_len
  StepFn step = [](const std::vector<int>& prefix) -> std::vector<double> {
    if (prefix.size() == 1) return {0, 0, 0, 0.5, 0.4, 0.1};
    switch (prefix.back()) {
      case 3: return {0, 0, 0, 0.34, 0.33, 0.33};
      case 4: return {0, 0, 0, 0.9, 0.05, 0.05};
      default: return {0, 0, 0, 0.2, 0.2, 0.6};
    }
  };
  std::vector<int> best;
  double best_lp = -1e300;
  for (int a = 3; a <= 5; ++a) {
    for (int b = 3; b <= 5; ++b) {
      const double lp = sequence_log_prob(step, {a, b});
      if (lp > best_lp) {
        best_lp = lp;
        best = {a, b};
      }
    }
  }
  EXPECT_EQ(best, (std::vector<int>{4, 3}));
  EXPECT_EQ(greedy_decode(step, 2), (std::vector<int>{3, 3}));
  Hypothesis h = beam_search(step, 2, 2, 0.0);
  EXPECT_EQ(h.tokens, best);
  EXPECT_NEAR(h.log_prob, best_lp, 1e-12);
}

TEST(Beam, WideBeamMatchesExhaustiveEnumeration) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t steps = 1 + seed % 3;
    StepFn step = oracle::random_step_model(5, seed);
    const auto truth = oracle::enumerate_best(step, steps, 0.0);
    const Hypothesis h = beam_search(step, 125, steps, 0.0);
    EXPECT_EQ(h.tokens, truth.tokens) << seed;
  }
}

// Holds for two steps: the kept set at step 2 always contains the narrower
// beam's best child. From three steps on, a wider beam can prune the line the
// narrower beam followed, so the property is not asserted there.
TEST(Beam, WiderBeamNeverScoresLowerOverTwoSteps) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    StepFn step = oracle::random_step_model(6, 1000 + seed, 0.5);
    double prev = -1e300;
    for (std::size_t b = 1; b <= 8; ++b) {
      const Hypothesis h = beam_search(step, b, 2, 0.0);
      EXPECT_GE(h.log_prob, prev - 1e-12) << "seed " << seed << " beam " << b;
      prev = h.log_prob;
    }
  }
}

TEST(Beam, LengthPenalty) {
  EXPECT_DOUBLE_EQ(length_penalty(1, 0.6), 1.0);
  EXPECT_DOUBLE_EQ(length_penalty(7, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(length_penalty(9, 0.0), 1.0);
}

TEST(Decoders, OutputsEndWithEosOrReachMaxLen) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    StepFn step = oracle::random_step_model(6, seed, 0.3);
    for (const auto& out : {greedy_decode(step, 6), beam_search(step, 3, 6).tokens, top_k_sample(step, 3, 1.0, 6, seed)}) {
      ASSERT_FALSE(out.empty());
      EXPECT_TRUE(out.back() == kEos || out.size() == 6);
      EXPECT_EQ(std::count(out.begin(), out.end(), kEos), out.back() == kEos ? 1 : 0);
      for (int t : out) EXPECT_TRUE(t != kPad && t != kBos);
    }
  }
}

TEST(TopK, KOneEqualsGreedy) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    StepFn step = oracle::random_step_model(7, seed, 0.5);
    EXPECT_EQ(top_k_sample(step, 1, 1.0, 10, seed), greedy_decode(step, 10));
  }
}

TEST(TopK, NeverLeavesTheTopKSet) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<std::vector<double>> seen;
    const std::size_t k = 1 + seed % 4;
    StepFn step = RecordingStep{oracle::random_step_model(9, seed, 0.2), &seen};
    const auto out = top_k_sample(step, k, 0.7, 10, seed);
    ASSERT_EQ(seen.size(), out.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
      const auto& p = seen[t];
      const double chosen = p[static_cast<std::size_t>(out[t])];
      const auto larger = std::count_if(p.begin(), p.end(), [&](double x) { return x > chosen; });
      EXPECT_LT(static_cast<std::size_t>(larger), k);
    }
  }
}

TEST(TopK, SeededAndMatchesFullDistribution) {
  StepFn step = fixed_step({0, 0, 0.0, 0.5, 0.3, 0.2});
  EXPECT_EQ(top_k_sample(step, 6, 1.0, 20, 7), top_k_sample(step, 6, 1.0, 20, 7));
  std::vector<double> freq(6, 0.0);
  const int draws = 400;
  for (int s = 0; s < draws; ++s) {
    for (int t : top_k_sample(step, 6, 1.0, 20, static_cast<std::uint64_t>(s))) freq[static_cast<std::size_t>(t)] += 1.0;
  }
  const double total = 20.0 * draws;
  EXPECT_NEAR(freq[3] / total, 0.5, 0.02);
  EXPECT_NEAR(freq[4] / total, 0.3, 0.02);
  EXPECT_NEAR(freq[5] / total, 0.2, 0.02);
  EXPECT_THROW(top_k_sample(step, 0, 1.0, 5, 1), ContractError);
  EXPECT_THROW(top_k_sample(step, 2, 0.0, 5, 1), ContractError);
}

TEST(Split, BoundaryAndEos) {
  EXPECT_EQ(split_at_boundary({4, 5, 9, 6, kEos}, 9), (std::vector<std::vector<int>>{{4, 5}, {6}}));
  EXPECT_EQ(split_at_boundary({4, 9, 9, 6}, 9), (std::vector<std::vector<int>>{{4}, {}, {6}}));
  EXPECT_EQ(split_at_boundary({kEos, 4}, 9), (std::vector<std::vector<int>>{{}}));
  Vocab v = Vocab::build(std::vector<Tokens>{{"a", "b", "c"}});
  TextDocument d = detokenize_output("x", {v.encode("a"), v.boundary_id(), v.encode("c"), kEos}, v);
  EXPECT_EQ(d.sentences, (std::vector<Tokens>{{"a"}, {"c"}}));
}

TEST(ModelDecoding, BeamOneEqualsGreedyAndIsDeterministic) {
  CorpgModel model(tiny_config(), 3);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Document src{"d", {}};
    const std::size_t n = 1 + uniform_index(rng, 3);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<int> sent(1 + uniform_index(rng, 4));
      for (int& t : sent) t = 4 + static_cast<int>(uniform_index(rng, 9));
      src.sentences.push_back(sent);
    }
    StepFn step = model_step_fn(model, src, CoherenceGraph::chain(n));
    const auto g = greedy_decode(step, 15);
    EXPECT_EQ(beam_search(step, 1, 15).tokens, g);
    EXPECT_EQ(greedy_decode(model_step_fn(model, src, CoherenceGraph::chain(n)), 15), g);
    for (int t : g) EXPECT_TRUE(t != kPad && t != kBos);
  }
}

TEST(ModelDecoding, DecodeConfigDispatch) {
  CorpgModel model(tiny_config(), 5);
  Document src{"d", {{4, 5}, {6}}};
  StepFn step = model_step_fn(model, src, CoherenceGraph::chain(2));
  DecodeConfig c;
  c.max_len = 8;
  c.method = DecodeMethod::greedy;
  const auto g = decode_tokens(step, c);
  c.method = DecodeMethod::beam;
  c.beam = 1;
  EXPECT_EQ(decode_tokens(step, c), g);
  c.method = DecodeMethod::topk;
  c.k = 1;
  EXPECT_EQ(decode_tokens(step, c), g);
  EXPECT_EQ(parse_decode_method("beam"), DecodeMethod::beam);
  EXPECT_THROW(parse_decode_method("nucleus"), UsageError);
}
