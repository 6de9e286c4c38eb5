// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "corpg/ops.hpp"
#include "corpg/tensor_io.hpp"

using namespace corpg;

TEST(Shape, RankAboveThreeIsRejected) {
  EXPECT_THROW((Shape{1, 2, 3, 4}), DimensionError);
  EXPECT_EQ((Shape{2, 3, 4}).numel(), 24u);
  EXPECT_EQ((Shape{2, 3, 4}).rows(), 6u);
  EXPECT_EQ((Shape{5}).rows(), 1u);
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor t(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(t.at(1, 0), 3.0);
}

TEST(Tensor, CopiesShareStorage) {
  Tensor a(Shape{2}, 1.0);
  Tensor b = a;
  b.mutable_values()[0] = 7.0;
  EXPECT_EQ(a.values()[0], 7.0);
  Tensor c = a.clone();
  c.mutable_values()[0] = 0.0;
  EXPECT_EQ(a.values()[0], 7.0);
}

TEST(Matmul, IdentityAndHandArithmetic) {
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor r = matmul(eye, m);
  EXPECT_EQ(std::vector<double>(r.values().begin(), r.values().end()), (std::vector<double>{1, 2, 3, 4}));
  Tensor dot = matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  EXPECT_EQ(dot.item(), 11.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor(Shape{2, 3}), Tensor(Shape{2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Elementwise, Identities) {
  Tensor x = Tensor::matrix(2, 2, {0.5, -1, 2, 3});
  Tensor zero(Shape{2, 2}, 0.0);
  Tensor one(Shape{2, 2}, 1.0);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(add(x, zero).values()[i], x.values()[i]);
    EXPECT_EQ(mul(x, one).values()[i], x.values()[i]);
  }
  EXPECT_THROW(add(x, Tensor(Shape{2, 3})), DimensionError);
}

TEST(Activation, AnalyticValues) {
  EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(corpg::tanh(Tensor::scalar(0.0)).item(), 0.0);
  EXPECT_EQ(relu(Tensor::scalar(-2.5)).item(), 0.0);
  EXPECT_EQ(relu(Tensor::scalar(3.1)).item(), 3.1);

  Tape tape;
  Tape::Scope scope(tape);
  Tensor x = Tensor::parameter(Shape{1}, {0.0});
  Tensor y = sigmoid(x);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Activation, ReluSubgradientAtZeroIsZero) {
  Tape tape;
  Tape::Scope scope(tape);
  Tensor x = Tensor::parameter(Shape{1}, {0.0});
  tape.backward(sum(relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Softmax, BasicProperties) {
  Tensor s = softmax_rows(Tensor::matrix(1, 2, {0, 0}));
  EXPECT_EQ(s.values()[0], 0.5);
  EXPECT_EQ(s.values()[1], 0.5);
  Tensor t = softmax_rows(Tensor::matrix(1, 3, {1, 2, 3}));
  EXPECT_NEAR(t.values()[0] + t.values()[1] + t.values()[2], 1.0, 1e-12);
}

TEST(Softmax, FullyMaskedRowIsExactlyZero) {
  Mask m(2, 3, true);
  for (std::size_t j = 0; j < 3; ++j) m.set(1, j, false);
  m.set(0, 2, false);
  Tensor s = softmax_rows(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}), &m);
  EXPECT_EQ(s.at(0, 2), 0.0);
  EXPECT_NEAR(s.at(0, 0) + s.at(0, 1), 1.0, 1e-12);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.at(1, j), 0.0);
}

TEST(Softmax, RandomRowsAreNormalized) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(4 * 7);
    for (double& x : v) x = uniform(rng, -30, 30);
    Mask m(4, 7, true);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 7; ++c) m.set(r, c, uniform01(rng) < 0.6);
    }
    Tensor s = softmax_rows(Tensor::matrix(4, 7, v), &m);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      bool any = false;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GE(s.at(r, c), 0.0);
        if (!m.allowed(r, c)) {
          EXPECT_EQ(s.at(r, c), 0.0);
        }
        any = any || m.allowed(r, c);
        total += s.at(r, c);
      }
      if (any) {
        EXPECT_NEAR(total, 1.0, 1e-12);
      } else {
        EXPECT_EQ(total, 0.0);
      }
    }
  }
}

TEST(LayerNorm, ConstantRowMapsToZeroAndMeansVanish) {
  Tensor gain(Shape{4}, 1.0), bias(Shape{4}, 0.0);
  Tensor y = layer_norm(Tensor::matrix(1, 4, {3, 3, 3, 3}), gain, bias);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);

  Rng rng(9);
  std::vector<double> v(5 * 8);
  for (double& x : v) x = uniform(rng, -2, 2);
  Tensor z = layer_norm(Tensor::matrix(5, 8, v), Tensor(Shape{8}, 1.0), Tensor(Shape{8}, 0.0));
  for (std::size_t r = 0; r < 5; ++r) {
    double m = 0.0;
    for (std::size_t c = 0; c < 8; ++c) m += z.at(r, c);
    EXPECT_LT(std::abs(m / 8.0), 1e-9);
  }
}

TEST(Embedding, LookupAndErrors) {
  Tensor table = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  Tensor row = embedding_lookup(table, std::vector<int>{0});
  EXPECT_EQ(row.at(0, 0), 1.0);
  EXPECT_EQ(row.at(0, 1), 2.0);
  Tensor empty = embedding_lookup(table, std::vector<int>{});
  EXPECT_EQ(empty.rows(), 0u);
  EXPECT_EQ(empty.cols(), 2u);
  try {
    embedding_lookup(table, std::vector<int>{1, 7});
    FAIL();
  } catch (const IndexError& e) {
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
}

TEST(Concat, ShapesAndEmptyIdentity) {
  Tensor a(Shape{3, 2}, 1.0), b(Shape{3, 3}, 2.0), e(Shape{3, 0});
  EXPECT_EQ(concat_cols(a, b).shape(), (Shape{3, 5}));
  Tensor same = concat_cols(a, e);
  EXPECT_EQ(same.shape(), a.shape());
  EXPECT_THROW(concat_cols(a, Tensor(Shape{2, 2})), DimensionError);
}

TEST(Tape, ClearZeroesGradients) {
  Tape tape;
  Tape::Scope scope(tape);
  Tensor x = Tensor::parameter(Shape{2}, {1.0, 2.0});
  tape.backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[1], 4.0);
  tape.clear();
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, ReverseOrderReplay) {
  Tape tape;
  std::vector<int> seen;
  for (int i = 0; i < 4; ++i) tape.record({}, [i, &seen] { seen.push_back(i); });
  Tensor root = Tensor::parameter(Shape{}, {0.0});
  tape.backward(root);
  EXPECT_EQ(seen, (std::vector<int>{3, 2, 1, 0}));
}

TEST(Tape, NothingRecordedWithoutActiveTape) {
  Tape tape;
  Tensor x = Tensor::parameter(Shape{2}, {1.0, 2.0});
  Tensor y = sum(x);
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Ops, Deterministic) {
  Rng rng(5);
  std::vector<double> v(6 * 6);
  for (double& x : v) x = uniform(rng, -2, 2);
  auto run = [&] {
    Tensor x = Tensor::matrix(6, 6, v);
    Tensor y = layer_norm(matmul(softmax_rows(x), corpg::tanh(x)), Tensor(Shape{6}, 1.0), Tensor(Shape{6}, 0.0));
    return std::vector<double>(y.values().begin(), y.values().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Dropout, IdentityAtEvalAndSeeded) {
  Tensor x(Shape{4, 4}, 1.0);
  EXPECT_TRUE(dropout(x, 0.5, 1, false).same_storage(x));
  Tensor a = dropout(x, 0.5, 11, true);
  Tensor b = dropout(x, 0.5, 11, true);
  EXPECT_EQ(std::vector<double>(a.values().begin(), a.values().end()),
            std::vector<double>(b.values().begin(), b.values().end()));
  for (double v : a.values()) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(WeightedNll, HandSums) {
  Tensor p = Tensor::matrix(3, 2, {0.5, 0.5, 0.25, 0.75, 0.9, 0.1});
  std::vector<int> y{0, 1, 0};
  std::vector<double> ones{1, 1, 1};
  const double base = weighted_nll(p, y, ones).item();
  EXPECT_DOUBLE_EQ(base, (-std::log(0.5) - std::log(0.75) - std::log(0.9)) / 3.0);
  std::vector<double> w{1, 2, 1};
  EXPECT_DOUBLE_EQ(weighted_nll(p, y, w).item(),
                   (-std::log(0.5) - 2 * std::log(0.75) - std::log(0.9)) / 3.0);
  Tensor perfect = Tensor::matrix(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(weighted_nll(perfect, std::vector<int>{0, 1}, std::vector<double>{1, 1}).item(), 0.0);
}

TEST(TensorFile, RoundTripIsBitExact) {
  Rng rng(2);
  std::vector<double> v(12);
  for (double& x : v) x = uniform(rng, -1e3, 1e3);
  v[3] = -0.0;
  v[4] = 1e-310;
  Tensor a(Shape{3, 4}, v);
  Tensor b(Shape{2}, std::vector<double>{1.5, -2.5});
  const std::string bytes = encode_tensor_file("TEST1\n", {{"k", "v"}}, {{"a", a}, {"b", b}});
  TensorFile f = decode_tensor_file(bytes, "TEST1\n");
  EXPECT_EQ(f.field("k"), "v");
  EXPECT_EQ(f.tensor("a").shape(), a.shape());
  EXPECT_EQ(encode_tensor_file("TEST1\n", {{"k", "v"}}, f.tensors), bytes);
  EXPECT_THROW(decode_tensor_file(bytes, "OTHER\n"), DataError);
  EXPECT_THROW(decode_tensor_file(bytes.substr(0, bytes.size() - 3), "TEST1\n"), DataError);
}
