// Copyright 2026 The figmtl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "figmtl/autodiff.hpp"
#include "figmtl/rng.hpp"

namespace {

using namespace figmtl;
using ad::Tensor;

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.normal(0.0, scale);
  return Tensor::matrix(r, c, std::move(v));
}

// Plain central differences over raw doubles, independent of the grad_check helper.
template <typename F>
std::vector<double> numeric_grad(F f, std::vector<double> x, double eps = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double o = x[i];
    x[i] = o + eps;
    const double fp = f(x);
    x[i] = o - eps;
    const double fm = f(x);
    x[i] = o;
    g[i] = (fp - fm) / (2 * eps);
  }
  return g;
}

TEST(Matmul, IdentityAndHandProduct) {
  auto i2 = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  auto r = ad::matmul(i2, m);
  EXPECT_EQ(r.to_vector(), (std::vector<double>{1, 2, 3, 4}));
  auto p = ad::matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  EXPECT_DOUBLE_EQ(p.item(), 11.0);
}

TEST(Matmul, GradientOfSum) {
  auto a = Tensor::matrix(1, 2, {1, 1}, true);
  auto b = Tensor::matrix(2, 1, {2, 5}, true);
  ad::sum(ad::matmul(a, b)).backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 5.0);
  EXPECT_DOUBLE_EQ(b.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(b.grad()[1], 1.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    ad::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Softmax, Examples) {
  auto s = ad::softmax(Tensor::row({0, 0}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  s = ad::softmax(Tensor::row({std::log(1.0), std::log(3.0)}));
  EXPECT_NEAR(s[0], 0.25, 1e-15);
  EXPECT_NEAR(s[1], 0.75, 1e-15);
  s = ad::softmax(Tensor::row({1000, 1000}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
}

TEST(Softmax, RejectsNonFinite) {
  EXPECT_THROW(ad::softmax(Tensor::row({0, NAN})), NumericError);
  EXPECT_THROW(ad::softmax(Tensor::row({INFINITY, 0})), NumericError);
}

TEST(Softmax, RowsAndColumnsSumToOne) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_matrix(3, 5, rng, trial < 100 ? 1.0 : 300.0);
    for (int axis : {0, 1}) {
      auto s = ad::softmax(x, axis);
      const std::size_t outer = axis == 1 ? 3 : 5, inner = axis == 1 ? 5 : 3;
      for (std::size_t o = 0; o < outer; ++o) {
        double total = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
          const double v = axis == 1 ? s.at(o, i) : s.at(i, o);
          EXPECT_GE(v, 0.0);
          total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
    }
  }
}

TEST(Sigmoid, Examples) {
  EXPECT_DOUBLE_EQ(ad::sigmoid(Tensor::scalar(0)).item(), 0.5);
  EXPECT_NEAR(ad::sigmoid(Tensor::scalar(40)).item(), 1.0, 1e-12);
  EXPECT_NEAR(ad::sigmoid(Tensor::scalar(std::log(3.0))).item(), 0.75, 1e-15);
  const double lo = ad::sigmoid(Tensor::scalar(-800)).item();
  EXPECT_GE(lo, 0.0);
  EXPECT_TRUE(std::isfinite(lo));
}

TEST(GradCheck, SumOfSquares) {
  auto x = Tensor::row({1, 2, 3});
  auto probe = x.clone(true);
  ad::sum(ad::mul(probe, probe)).backward();
  EXPECT_EQ(std::vector<double>(probe.grad().begin(), probe.grad().end()),
            (std::vector<double>{2, 4, 6}));
  auto r = ad::grad_check([](const Tensor& t) { return ad::sum(ad::mul(t, t)); }, x, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-6);
  EXPECT_EQ(r.coordinates_checked, 3u);
}

TEST(GradCheck, ConstantFunction) {
  auto r = ad::grad_check([](const Tensor&) { return Tensor::scalar(4.0); }, Tensor::row({1, 2}),
                          1e-5);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, Contracts) {
  auto id = [](const Tensor& t) { return t; };
  EXPECT_THROW(ad::grad_check(id, Tensor::row({1, 2})), ContractError);
  auto sq = [](const Tensor& t) { return ad::sum(t); };
  EXPECT_THROW(ad::grad_check(sq, Tensor::row({1}), 1e-3), ContractError);
  EXPECT_THROW(ad::grad_check(sq, Tensor::row({1}), 1e-8), ContractError);
}

// Every differentiable op against finite differences at random points.
class OpGradients : public ::testing::TestWithParam<int> {};

TEST_P(OpGradients, MatchFiniteDifferences) {
  Rng rng(derive_seed(1234, "op-grad", {static_cast<std::uint64_t>(GetParam())}));
  const auto a = random_matrix(3, 4, rng);
  const auto b = random_matrix(4, 2, rng);
  const auto c = random_matrix(3, 4, rng);
  const auto g = random_matrix(1, 4, rng);
  const auto bias = random_matrix(1, 4, rng);
  const auto w = random_matrix(3, 4, rng);  // fixed weights turn outputs into scalars
  auto wsum = [&](const Tensor& t) {
    return ad::sum(ad::mul(t, Tensor::from(t.shape(), std::vector<double>(
                                                           w.data().begin(),
                                                           w.data().begin() + t.size()))));
  };
  std::vector<std::pair<const char*, std::function<Tensor(const Tensor&)>>> cases = {
      {"matmul", [&](const Tensor& x) { return wsum(ad::matmul(x, b)); }},
      {"transpose", [&](const Tensor& x) { return wsum(ad::transpose(ad::transpose(x))); }},
      {"add", [&](const Tensor& x) { return wsum(ad::add(x, c)); }},
      {"sub", [&](const Tensor& x) { return wsum(ad::sub(c, x)); }},
      {"mul", [&](const Tensor& x) { return wsum(ad::mul(x, c)); }},
      {"scale", [&](const Tensor& x) { return wsum(ad::scale(x, -1.7)); }},
      {"add_row_bias", [&](const Tensor& x) { return wsum(ad::add_row_bias(c, ad::select_rows(x, std::vector<std::size_t>{1}))); }},
      {"sigmoid", [&](const Tensor& x) { return wsum(ad::sigmoid(x)); }},
      {"tanh", [&](const Tensor& x) { return wsum(ad::tanh(x)); }},
      {"exp", [&](const Tensor& x) { return wsum(ad::exp(ad::scale(x, 0.5))); }},
      {"log", [&](const Tensor& x) { return wsum(ad::log(ad::add_scalar(ad::mul(x, x), 0.5))); }},
      {"softplus", [&](const Tensor& x) { return wsum(ad::softplus(x)); }},
      {"gelu", [&](const Tensor& x) { return wsum(ad::gelu(x)); }},
      {"mean", [&](const Tensor& x) { return ad::mean(ad::mul(x, x)); }},
      {"softmax_rows", [&](const Tensor& x) { return wsum(ad::softmax(x, 1)); }},
      {"softmax_cols", [&](const Tensor& x) { return wsum(ad::softmax(x, 0)); }},
      {"layer_norm", [&](const Tensor& x) { return wsum(ad::layer_norm(x, g, bias)); }},
      {"layer_norm_params", [&](const Tensor& x) {
         return wsum(ad::layer_norm(c, ad::select_rows(x, std::vector<std::size_t>{0}),
                                    ad::select_rows(x, std::vector<std::size_t>{2})));
       }},
      {"embedding", [&](const Tensor& x) { return wsum(ad::embedding(x, std::vector<std::size_t>{2, 0, 2})); }},
      {"column", [&](const Tensor& x) { return ad::sum(ad::mul(ad::column(x, 2), ad::column(c, 1))); }},
      {"concat_rows", [&](const Tensor& x) {
         std::vector<Tensor> parts = {ad::select_rows(x, std::vector<std::size_t>{2}),
                                      ad::select_rows(x, std::vector<std::size_t>{0, 1})};
         return wsum(ad::concat_rows(parts));
       }},
  };
  for (auto& [name, f] : cases) {
    auto r = ad::grad_check(f, a, 1e-6);
    EXPECT_LT(r.max_rel_error, 1e-4) << name << " worst " << r.worst_index << " analytic "
                                     << r.worst_analytic << " numeric " << r.worst_numeric;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomSeeds, OpGradients, ::testing::Range(0, 100));

TEST(Attention, GradientsThroughQueryKeyValue) {
  Rng rng(99);
  const std::vector<ad::Segment> segs = {{0, 4, 3}, {4, 3, 3}};
  const auto k = random_matrix(7, 4, rng);
  const auto v = random_matrix(7, 4, rng);
  const auto w = random_matrix(7, 4, rng);
  for (int which = 0; which < 3; ++which) {
    auto f = [&](const Tensor& x) {
      const Tensor& q = which == 0 ? x : k;
      const Tensor& kk = which == 1 ? x : k;
      const Tensor& vv = which == 2 ? x : v;
      return ad::sum(ad::mul(ad::multi_head_attention(q, kk, vv, segs, 2), w));
    };
    auto r = ad::grad_check(f, random_matrix(7, 4, rng), 1e-6);
    EXPECT_LT(r.max_rel_error, 1e-4) << "input " << which;
  }
}

TEST(Attention, MaskedKeysGetZeroAndRowsSumToOne) {
  Rng rng(3);
  const std::vector<ad::Segment> segs = {{0, 5, 2}};
  ad::AttentionProbs rec;
  auto x = random_matrix(5, 4, rng);
  ad::multi_head_attention(x, x, x, segs, 2, &rec);
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < 2; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        const double p = rec[0][h][i * 5 + j];
        if (j >= 2) EXPECT_EQ(p, 0.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Backward, SharedSubexpressionAccumulates) {
  // y = x*x + x, used twice: L = sum(y) + sum(y * 3) -> dL/dx = 4 (2x + 1)
  auto x = Tensor::row({0.5, -2.0}, true);
  auto y = ad::add(ad::mul(x, x), x);
  ad::add(ad::sum(y), ad::sum(ad::scale(y, 3.0))).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 4 * (2 * 0.5 + 1));
  EXPECT_DOUBLE_EQ(x.grad()[1], 4 * (2 * -2.0 + 1));
}

TEST(Backward, DuplicatedInputEqualsPathSum) {
  Rng rng(5);
  auto a = random_matrix(2, 3, rng);
  auto same = a.clone(true);
  ad::sum(ad::mul(ad::tanh(same), same)).backward();
  // Path-wise: treat the two uses as independent leaves and add their gradients.
  auto l = a.clone(true), r = a.clone(true);
  ad::sum(ad::mul(ad::tanh(l), r)).backward();
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(same.grad()[i], l.grad()[i] + r.grad()[i], 1e-15);
}

TEST(Backward, LossGradientIsOne) {
  auto x = Tensor::row({1, 2}, true);
  auto loss = ad::sum(ad::mul(x, x));
  loss.backward();
  ASSERT_TRUE(loss.has_grad());
  EXPECT_EQ(loss.grad()[0], 1.0);
}

TEST(Backward, NoGradGuardBuildsNoGraph) {
  auto x = Tensor::row({1, 2}, true);
  {
    ad::NoGradGuard g;
    auto y = ad::sum(ad::mul(x, x));
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(ad::grad_enabled());
}

TEST(LayerNorm, AgainstDirectFormula) {
  auto x = Tensor::matrix(2, 3, {1, 2, 6, -1, 0, 1});
  auto out = ad::layer_norm(x, Tensor::row({1, 1, 1}), Tensor::row({0, 0, 0}));
  for (std::size_t r = 0; r < 2; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 3; ++c) m += x.at(r, c) / 3;
    for (std::size_t c = 0; c < 3; ++c) v += (x.at(r, c) - m) * (x.at(r, c) - m) / 3;
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_NEAR(out.at(r, c), (x.at(r, c) - m) / std::sqrt(v + 1e-5), 1e-12);
  }
}

TEST(Gelu, TanhApproximationValues) {
  auto y = ad::gelu(Tensor::row({0.0, 1.0, -1.0}));
  auto ref = [](double x) {
    return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x)));
  };
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], ref(1.0), 1e-15);
  EXPECT_NEAR(y[2], ref(-1.0), 1e-15);
}

TEST(Embedding, OutOfRangeIdIsVocabularyError) {
  auto t = Tensor::zeros({3, 2});
  EXPECT_THROW(ad::embedding(t, std::vector<std::size_t>{3}), VocabularyError);
}

TEST(Log, NonPositiveInputIsNumericError) {
  EXPECT_THROW(ad::log(Tensor::row({1.0, 0.0})), NumericError);
}

TEST(Dropout, ZeroRateIsIdentityAndMaskIsInverted) {
  Rng rng(1);
  auto x = Tensor::full({1, 1000}, 1.0);
  EXPECT_EQ(ad::dropout(x, 0.0, rng).to_vector(), x.to_vector());
  auto y = ad::dropout(x, 0.25, rng);
  std::size_t zeros = 0;
  for (double v : y.data()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_NEAR(v, 1.0 / 0.75, 1e-15);
    }
  }
  EXPECT_GT(zeros, 180u);
  EXPECT_LT(zeros, 320u);
}

TEST(NumericGrad, IndependentOracleForSoftplusChain) {
  std::vector<double> x0 = {0.3, -1.2, 2.0};
  auto f = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += std::log1p(std::exp(x)) * x;
    return s;
  };
  auto t = Tensor::row(x0, true);
  ad::sum(ad::mul(ad::softplus(t), t)).backward();
  const auto g = numeric_grad(f, x0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(t.grad()[i], g[i], 1e-7);
}

}  // namespace
