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

#include "figmtl/model.hpp"
#include "figmtl/objectives.hpp"

namespace {

using namespace figmtl;
using namespace figmtl::model;
using corpus::TokenIdSequence;
using corpus::Vocabulary;

EncoderConfig small_config(std::size_t vocab, std::size_t layers = 2) {
  EncoderConfig c;
  c.vocab_size = vocab;
  c.d_model = 16;
  c.n_heads = 4;
  c.n_layers = layers;
  c.max_len = 16;
  c.ffn_dim = 32;
  c.dropout = 0.1;
  return c;
}

TokenIdSequence seq(std::vector<std::size_t> words, std::size_t len) {
  TokenIdSequence s;
  s.ids.assign(len, corpus::kPadId);
  s.ids[0] = corpus::kClsId;
  for (std::size_t i = 0; i < words.size(); ++i) s.ids[i + 1] = words[i];
  s.valid = words.size() + 1;
  return s;
}

void zero_head_output(Head& h) {
  for (auto* t : {&h.w2, &h.b2})
    for (auto& v : t->mutable_data()) v = 0.0;
}

TEST(Config, Validation) {
  auto c = small_config(10);
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(0);
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(10);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_regime("mtl-x"), ConfigError);
  for (auto r : {Regime::StlHyperbole, Regime::StlMetaphor, Regime::MtlE, Regime::MtlF})
    EXPECT_EQ(parse_regime(to_string(r)), r);
}

TEST(Encode, AttentionRowsNormalizedAndPadKeysZero) {
  auto p = init_params(small_config(20), Regime::MtlF, 3, 0.3);
  for (bool trim : {true, false}) {
    auto [cls, att] = encode(p, seq({4, 5, 6, 7}, 12), {.trim_padding = trim});
    ASSERT_EQ(att.probs.size(), 2u);
    for (std::size_t l = 0; l < 2; ++l) {
      for (std::size_t h = 0; h < 4; ++h) {
        for (std::size_t q = 0; q < att.valid; ++q) {
          double total = 0.0;
          for (std::size_t k = 0; k < att.length; ++k) {
            if (k >= att.valid) EXPECT_EQ(att.at(l, h, q, k), 0.0);
            total += att.at(l, h, q, k);
          }
          EXPECT_NEAR(total, 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(Encode, PadLengthDoesNotChangeCls) {
  auto p = init_params(small_config(20), Regime::MtlF, 4, 0.3);
  auto [a, att_a] = encode(p, seq({9, 3, 11}, 4));
  auto [b, att_b] = encode(p, seq({9, 3, 11}, 16));
  auto [c, att_c] = encode(p, seq({9, 3, 11}, 16), {.trim_padding = false});
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-9);
    EXPECT_NEAR(a[i], c[i], 1e-9);
  }
}

TEST(Encode, ZeroLayersIsNormalizedClsEmbedding) {
  auto p = init_params(small_config(20, 0), Regime::MtlF, 5, 0.5);
  for (auto& v : p.lnf_g.mutable_data()) v = 1.5;
  for (auto& v : p.lnf_b.mutable_data()) v = -0.25;
  auto [cls, att] = encode(p, seq({4, 5}, 8));
  EXPECT_TRUE(att.probs.empty());
  const std::size_t d = 16;
  std::vector<double> x(d);
  double mean = 0, var = 0;
  for (std::size_t j = 0; j < d; ++j) {
    x[j] = p.tok_emb.at(corpus::kClsId, j) + p.pos_emb.at(0, j);
    mean += x[j] / d;
  }
  for (double v : x) var += (v - mean) * (v - mean) / d;
  for (std::size_t j = 0; j < d; ++j)
    EXPECT_NEAR(cls[j], 1.5 * (x[j] - mean) / std::sqrt(var + 1e-5) - 0.25, 1e-12);
}

TEST(Encode, Contracts) {
  auto p = init_params(small_config(10), Regime::MtlF, 1);
  EXPECT_THROW(encode(p, seq({10}, 4)), VocabularyError);
  auto bad = seq({3}, 4);
  bad.ids[0] = 5;
  EXPECT_THROW(encode(p, bad), ContractError);
  EXPECT_THROW(encode(p, seq({3}, 17)), ContractError);
}

TEST(PredictStl, ZeroHeadTiesToLabelZero) {
  auto p = init_params(small_config(10), Regime::StlHyperbole, 1, 0.2);
  zero_head_output(p.heads[0]);
  auto pr = predict_stl(p, seq({3, 4}, 6));
  EXPECT_EQ(pr.p0, 0.5);
  EXPECT_EQ(pr.p1, 0.5);
  EXPECT_EQ(pr.label(), 0);
}

TEST(PredictStl, ProbabilitiesSumToOne) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto p = init_params(small_config(10), Regime::StlMetaphor, s, 0.5);
    auto pr = predict_stl(p, seq({3, 4, 5}, 6));
    EXPECT_NEAR(pr.p0 + pr.p1, 1.0, 1e-9);
  }
}

TEST(Predict, RegimeMismatchIsContractError) {
  auto f = init_params(small_config(10), Regime::MtlF, 1);
  auto e = init_params(small_config(10), Regime::MtlE, 1);
  auto s = init_params(small_config(10), Regime::StlHyperbole, 1);
  const auto x = seq({3}, 4);
  EXPECT_THROW(predict_stl(f, x), ContractError);
  EXPECT_THROW(predict_mtle(s, x), ContractError);
  EXPECT_THROW(predict_mtlf(e, x), ContractError);
}

TEST(Decode, ShiftInvariantArgmax) {
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.normal(0, 3), b = rng.normal(0, 3), c = rng.normal(0, 50);
    EXPECT_EQ(detail::softmax_pair(a, b).label(), detail::softmax_pair(a + c, b + c).label());
  }
}

TEST(PredictMtle, HeadsAreIndependent) {
  auto p = init_params(small_config(12), Regime::MtlE, 2, 0.3);
  const auto x = seq({3, 7, 8}, 6);
  auto before = predict_mtle(p, x);
  for (auto& v : p.heads[1].w1.mutable_data()) v += 0.7;
  for (auto& v : p.heads[1].b2.mutable_data()) v -= 1.3;
  auto after = predict_mtle(p, x);
  EXPECT_EQ(before.first.p1, after.first.p1);
  EXPECT_NE(before.second.p1, after.second.p1);

  zero_head_output(p.heads[0]);
  zero_head_output(p.heads[1]);
  auto z = predict_mtle(p, x);
  EXPECT_EQ(z.first.p0, 0.5);
  EXPECT_EQ(z.second.p1, 0.5);
}

TEST(PredictMtle, TaskOneLossHasNoGradientOnHeadTwo) {
  auto p = init_params(small_config(12), Regime::MtlE, 2, 0.3);
  std::vector<TokenIdSequence> batch = {seq({3, 4}, 6), seq({5, 6, 7}, 6)};
  auto out = forward(p, batch);
  auto l1 = objectives::ce_loss(ad::column(ad::softmax(out.logits[0], 1), 1), std::vector<int>{1, 0});
  l1.backward();
  for (auto* t : {&p.heads[1].w1, &p.heads[1].b1, &p.heads[1].w2, &p.heads[1].b2}) {
    if (!t->has_grad()) continue;
    for (double g : t->grad()) EXPECT_EQ(g, 0.0);
  }
  bool any = false;
  for (double g : p.heads[0].w2.grad()) any |= g != 0.0;
  EXPECT_TRUE(any);
}

TEST(PredictMtlf, DecodeRules) {
  auto d = decode_mtlf(0, 0);
  EXPECT_EQ(d.p_hyperbole, 0.5);
  EXPECT_EQ(d.hyperbole, 1);
  EXPECT_EQ(d.metaphor, 1);
  d = decode_mtlf(10, -10);
  EXPECT_EQ(d.hyperbole, 1);
  EXPECT_EQ(d.metaphor, 0);
  std::set<std::pair<int, int>> seen;
  for (double a : {-3.0, 3.0})
    for (double b : {-3.0, 3.0}) {
      auto r = decode_mtlf(a, b);
      seen.insert({r.hyperbole, r.metaphor});
    }
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_THROW(decode_mtlf(0, 0, 0.0), ConfigError);
  EXPECT_THROW(decode_mtlf(0, 0, 1.0), ConfigError);
  auto p = init_params(small_config(10), Regime::MtlF, 1);
  EXPECT_THROW(predict_mtlf(p, seq({3}, 4), 1.5), ConfigError);
}

TEST(PredictMtlf, FullLossGradientOnTwoSentences) {
  auto p = init_params(small_config(12, 1), Regime::MtlF, 6, 0.3);
  std::vector<TokenIdSequence> batch = {seq({3, 4, 5}, 6), seq({6, 7}, 6)};
  const std::vector<int> y = {1, 0, 1, 1};
  auto tensors = p.tensors();
  // eps 1e-5 keeps cancellation noise below the floor on near-zero coordinates.
  auto r = ad::grad_check_parameters(
      [&] { return objectives::mtlf_loss(forward(p, batch).logits[0], y); }, tensors, 1e-5,
      {.floor = 1e-6, .max_coordinates = 400, .seed = 1});
  EXPECT_LT(r.max_rel_error, 1e-4) << "worst " << r.worst_index << " analytic " << r.worst_analytic
                                   << " numeric " << r.worst_numeric;
  EXPECT_GT(r.coordinates_checked, 1000u);
}

TEST(Eval, DropoutDisabledOutsideTraining) {
  auto c = small_config(12);
  c.dropout = 0.5;
  auto p = init_params(c, Regime::MtlF, 7, 0.3);
  const auto x = seq({3, 4, 5}, 8);
  auto a = predict_mtlf(p, x);
  auto b = predict_mtlf(p, x);
  EXPECT_EQ(a.p_hyperbole, b.p_hyperbole);
  EXPECT_EQ(a.p_metaphor, b.p_metaphor);
}

std::vector<TrainExample> separable_eight() {
  std::vector<TrainExample> out;
  for (std::size_t i = 0; i < 8; ++i) {
    const int h = static_cast<int>(i % 2), m = static_cast<int>((i / 2) % 2);
    out.push_back({seq({3 + i, h ? 20u : 21u, m ? 22u : 23u}, 8), h, m});
  }
  return out;
}

TEST(Train, OverfitsEightSeparableSentences) {
  auto c = small_config(24);
  c.dropout = 0.0;
  const auto data = separable_eight();
  for (auto regime : {Regime::StlHyperbole, Regime::MtlE, Regime::MtlF}) {
    auto p = init_params(c, regime, 11);
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.batch_size = 4;
    tc.epochs = 200;
    train(p, data, tc);
    std::vector<TokenIdSequence> x;
    for (const auto& e : data) x.push_back(e.tokens);
    auto pred = predict_labels(p, x);
    for (std::size_t i = 0; i < data.size(); ++i) {
      EXPECT_EQ(pred[i].hyperbole, data[i].hyperbole) << to_string(regime) << " row " << i;
      if (regime != Regime::StlHyperbole) EXPECT_EQ(pred[i].metaphor, data[i].metaphor);
    }
  }
}

TEST(Train, SingleExampleLossGoesBelowOneHundredth) {
  auto c = small_config(10);
  std::vector<TrainExample> one = {{seq({3, 4}, 6), 1, 0}};
  auto p = init_params(c, Regime::MtlF, 1);
  TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 1e-2;
  auto trace = train(p, one, tc);
  EXPECT_LT(trace.epoch_loss.back(), 0.01);
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  auto c = small_config(24);
  c.dropout = 0.0;  // with dropout the epoch loss would vary through the masks
  auto p = init_params(c, Regime::MtlE, 2);
  const auto before = p.clone();
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.epochs = 4;
  tc.batch_size = 3;
  auto trace = train(p, separable_eight(), tc);
  auto a = before.named(), b = p.named();
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(a[i].second.to_vector(), b[i].second.to_vector()) << a[i].first;
  for (double l : trace.epoch_loss) EXPECT_NEAR(l, trace.epoch_loss[0], 1e-12);
}

TEST(Train, SameSeedSameTrace) {
  auto c = small_config(24);
  auto run = [&](std::uint64_t seed) {
    auto p = init_params(c, Regime::MtlF, 3);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 3;
    tc.seed = seed;
    auto t = train(p, separable_eight(), tc);
    return std::make_pair(t, p.tok_emb.to_vector());
  };
  EXPECT_EQ(run(5), run(5));
  EXPECT_NE(run(5).first, run(6).first);
}

TEST(Train, MtleWithLambdaOneMatchesStlHyperbole) {
  auto c = small_config(24);
  auto stl = init_params(c, Regime::StlHyperbole, 9);
  auto mtle = init_params(c, Regime::MtlE, 9);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 3;
  tc.lambda = 1.0;
  tc.seed = 4;
  auto ts = train(stl, separable_eight(), tc);
  auto te = train(mtle, separable_eight(), tc);
  auto a = stl.named(), b = mtle.named();
  ASSERT_EQ(b.size(), a.size() + 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].first, b[i].first);
    const auto va = a[i].second.to_vector(), vb = b[i].second.to_vector();
    for (std::size_t j = 0; j < va.size(); ++j) EXPECT_NEAR(va[j], vb[j], 1e-9) << a[i].first;
  }
  for (std::size_t e = 0; e < ts.epoch_loss.size(); ++e)
    EXPECT_NEAR(ts.epoch_loss[e], te.epoch_loss[e], 1e-9);
}

TEST(Train, Errors) {
  auto c = small_config(24);
  auto p = init_params(c, Regime::MtlF, 1);
  auto data = separable_eight();
  data[3].metaphor.reset();
  EXPECT_THROW(train(p, data, {}), DataError);
  auto s = init_params(c, Regime::StlHyperbole, 1);
  EXPECT_NO_THROW(train(s, data, {.epochs = 1}));
  EXPECT_THROW(train(p, {}, {}), DataError);
  TrainConfig bad;
  bad.lambda = 2.0;
  EXPECT_THROW(train(p, separable_eight(), bad), ConfigError);
  auto nan = init_params(c, Regime::MtlF, 1);
  nan.tok_emb.mutable_data()[corpus::kClsId * 16] = NAN;
  EXPECT_THROW(train(nan, separable_eight(), {.epochs = 1}), NumericError);
}

TEST(Init, SharedSeedSharesEncoderAndFirstHead) {
  auto c = small_config(12);
  auto a = init_params(c, Regime::StlMetaphor, 21);
  auto b = init_params(c, Regime::MtlE, 21);
  EXPECT_EQ(a.tok_emb.to_vector(), b.tok_emb.to_vector());
  EXPECT_EQ(a.layers[1].w2.to_vector(), b.layers[1].w2.to_vector());
  EXPECT_EQ(a.heads[0].w1.to_vector(), b.heads[0].w1.to_vector());
  EXPECT_NE(b.heads[0].w1.to_vector(), b.heads[1].w1.to_vector());
  auto z = init_params(c, Regime::MtlF, 21, 0.0);
  for (double v : z.layers[0].wq.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(init_params(c, Regime::MtlF, 1, -1.0), ConfigError);
}

}  // namespace
