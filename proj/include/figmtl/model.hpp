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

#pragma once

// Transformer sentence encoder and the classification heads of the three
// learning regimes.
//
//   STL    one head, softmax over two classes for a single label
//   MTL-E  shared encoder, one softmax head per label
//   MTL-F  one head emitting a sigmoid logit per label
//
// Encoder blocks are pre-layer-norm with learned absolute positions. Every
// head is a one-hidden-layer network (d -> d, tanh, -> 2) over the final
// CLS representation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "figmtl/autodiff.hpp"
#include "figmtl/corpus.hpp"
#include "figmtl/errors.hpp"
#include "figmtl/objectives.hpp"
#include "figmtl/rng.hpp"

namespace figmtl::model {

using ad::Tensor;
using corpus::TokenIdSequence;

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t max_len = 64;
  std::size_t ffn_dim = 256;
  double dropout = 0.1;

  bool operator==(const EncoderConfig&) const = default;

  void validate() const {
    if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
    if (d_model == 0) throw ConfigError("d_model must be positive");
    if (n_heads == 0) throw ConfigError("n_heads must be positive");
    if (d_model % n_heads != 0) {
      throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
    }
    if (max_len == 0) throw ConfigError("max_len must be positive");
    if (ffn_dim == 0) throw ConfigError("ffn_dim must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  }
};

enum class Regime { StlHyperbole, StlMetaphor, MtlE, MtlF };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::StlHyperbole: return "stl-hyperbole";
    case Regime::StlMetaphor: return "stl-metaphor";
    case Regime::MtlE: return "mtle";
    case Regime::MtlF: return "mtlf";
  }
  return "?";
}

inline Regime parse_regime(const std::string& s) {
  if (s == "stl-hyperbole" || s == "stl-h") return Regime::StlHyperbole;
  if (s == "stl-metaphor" || s == "stl-m") return Regime::StlMetaphor;
  if (s == "mtle" || s == "mtl-e") return Regime::MtlE;
  if (s == "mtlf" || s == "mtl-f") return Regime::MtlF;
  throw ConfigError("unknown regime '" + s + "'");
}

inline std::size_t head_count(Regime r) { return r == Regime::MtlE ? 2 : 1; }

inline bool uses_label(Regime r, corpus::Label l) {
  switch (r) {
    case Regime::StlHyperbole: return l == corpus::Label::Hyperbole;
    case Regime::StlMetaphor: return l == corpus::Label::Metaphor;
    default: return true;
  }
}

struct EncoderLayer {
  Tensor ln1_g, ln1_b;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_g, ln2_b;
  Tensor w1, b1, w2, b2;
};

struct Head {
  Tensor w1, b1, w2, b2;
};

/// All learnable weights of one model. Copies share tensors; use clone() for
/// an independent snapshot.
struct ModelParams {
  EncoderConfig config;
  Regime regime = Regime::MtlF;
  Tensor tok_emb, pos_emb;
  std::vector<EncoderLayer> layers;
  Tensor lnf_g, lnf_b;
  std::vector<Head> heads;

  /// Stable, named view of every parameter tensor.
  std::vector<std::pair<std::string, Tensor>> named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("tok_emb", tok_emb);
    out.emplace_back("pos_emb", pos_emb);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string p = "layer" + std::to_string(i) + ".";
      for (auto& [n, t] : std::vector<std::pair<const char*, const Tensor*>>{
               {"ln1_g", &l.ln1_g}, {"ln1_b", &l.ln1_b}, {"wq", &l.wq},       {"bq", &l.bq},
               {"wk", &l.wk},       {"bk", &l.bk},       {"wv", &l.wv},       {"bv", &l.bv},
               {"wo", &l.wo},       {"bo", &l.bo},       {"ln2_g", &l.ln2_g}, {"ln2_b", &l.ln2_b},
               {"w1", &l.w1},       {"b1", &l.b1},       {"w2", &l.w2},       {"b2", &l.b2}}) {
        out.emplace_back(p + n, *t);
      }
    }
    out.emplace_back("lnf_g", lnf_g);
    out.emplace_back("lnf_b", lnf_b);
    for (std::size_t k = 0; k < heads.size(); ++k) {
      const std::string p = "head" + std::to_string(k) + ".";
      out.emplace_back(p + "w1", heads[k].w1);
      out.emplace_back(p + "b1", heads[k].b1);
      out.emplace_back(p + "w2", heads[k].w2);
      out.emplace_back(p + "b2", heads[k].b2);
    }
    return out;
  }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (auto& [n, t] : named()) out.push_back(t);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto& [name, t] : named()) n += t.size();
    return n;
  }

  ModelParams clone() const {
    ModelParams c = *this;
    auto cp = [](Tensor& t) { t = t.clone(); };
    cp(c.tok_emb);
    cp(c.pos_emb);
    for (auto& l : c.layers) {
      for (Tensor* t : {&l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo,
                        &l.bo, &l.ln2_g, &l.ln2_b, &l.w1, &l.b1, &l.w2, &l.b2})
        cp(*t);
    }
    cp(c.lnf_g);
    cp(c.lnf_b);
    for (auto& h : c.heads)
      for (Tensor* t : {&h.w1, &h.b1, &h.w2, &h.b2}) cp(*t);
    return c;
  }

  bool all_finite() const {
    for (auto& [n, t] : named())
      for (double v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
  }
};

namespace detail {

inline Tensor normal_matrix(std::size_t r, std::size_t c, double std, Rng& rng) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = std == 0.0 ? 0.0 : rng.normal(0.0, std);
  return Tensor::from({r, c}, std::move(v), true);
}

inline Tensor zeros_row(std::size_t c) { return Tensor::zeros({1, c}, true); }
inline Tensor ones_row(std::size_t c) { return Tensor::full({1, c}, 1.0, true); }

}  // namespace detail

inline Head init_head(std::size_t d, double init_std, Rng& rng) {
  Head h;
  h.w1 = detail::normal_matrix(d, d, init_std, rng);
  h.b1 = detail::zeros_row(d);
  h.w2 = detail::normal_matrix(d, 2, init_std, rng);
  h.b2 = detail::zeros_row(2);
  return h;
}

/// Gaussian(0, init_std) weights, zero biases, unit layer-norm scales. The
/// encoder and each head draw from their own seed-derived stream, so regimes
/// sharing a seed share the encoder and first-head initialization.
/// init_std = 0 zero-initializes every weight matrix.
inline ModelParams init_params(const EncoderConfig& cfg, Regime regime, std::uint64_t seed,
                               double init_std = 0.02) {
  cfg.validate();
  if (!(init_std >= 0.0)) throw ConfigError("init_std must be non-negative");
  ModelParams p;
  p.config = cfg;
  p.regime = regime;
  const std::size_t d = cfg.d_model;
  Rng rng(derive_seed(seed, "init.encoder"));
  p.tok_emb = detail::normal_matrix(cfg.vocab_size, d, init_std, rng);
  p.pos_emb = detail::normal_matrix(cfg.max_len, d, init_std, rng);
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    EncoderLayer l;
    l.ln1_g = detail::ones_row(d);
    l.ln1_b = detail::zeros_row(d);
    l.wq = detail::normal_matrix(d, d, init_std, rng);
    l.bq = detail::zeros_row(d);
    l.wk = detail::normal_matrix(d, d, init_std, rng);
    l.bk = detail::zeros_row(d);
    l.wv = detail::normal_matrix(d, d, init_std, rng);
    l.bv = detail::zeros_row(d);
    l.wo = detail::normal_matrix(d, d, init_std, rng);
    l.bo = detail::zeros_row(d);
    l.ln2_g = detail::ones_row(d);
    l.ln2_b = detail::zeros_row(d);
    l.w1 = detail::normal_matrix(d, cfg.ffn_dim, init_std, rng);
    l.b1 = detail::zeros_row(cfg.ffn_dim);
    l.w2 = detail::normal_matrix(cfg.ffn_dim, d, init_std, rng);
    l.b2 = detail::zeros_row(d);
    p.layers.push_back(std::move(l));
  }
  p.lnf_g = detail::ones_row(d);
  p.lnf_b = detail::zeros_row(d);
  for (std::size_t k = 0; k < head_count(regime); ++k) {
    Rng head_rng(derive_seed(seed, "init.head", {k}));
    p.heads.push_back(init_head(d, init_std, head_rng));
  }
  return p;
}

// ---------------------------------------------------------------------------
// encoder

struct ForwardOptions {
  /// Enables dropout; requires dropout_rng when the configured rate is positive.
  bool train = false;
  Rng* dropout_rng = nullptr;
  /// Run only over non-pad positions. Exact: pad keys receive zero attention,
  /// so dropping them cannot change any non-pad output.
  bool trim_padding = true;
  bool record_attention = false;
};

/// Attention probabilities of one sentence: probs[layer][head] is a
/// length x length row-major matrix over the padded sequence. Pad keys hold
/// zero; pad query rows are zero when padding was trimmed.
struct AttentionRecord {
  std::size_t length = 0;
  std::size_t valid = 0;
  std::vector<std::vector<std::vector<double>>> probs;

  double at(std::size_t layer, std::size_t head, std::size_t query, std::size_t key) const {
    return probs[layer][head][query * length + key];
  }
};

struct EncodeResult {
  Tensor cls;  // [B x d_model]
  std::vector<AttentionRecord> attention;
};

/// Seam for alternative sentence encoders (e.g. a pretrained contextual model).
class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::size_t width() const = 0;
  virtual EncodeResult encode(std::span<const TokenIdSequence> batch,
                              const ForwardOptions& opts) const = 0;
};

class TransformerEncoder final : public SentenceEncoder {
 public:
  explicit TransformerEncoder(const ModelParams& params) : p_(params) {}

  std::size_t width() const override { return p_.config.d_model; }

  EncodeResult encode(std::span<const TokenIdSequence> batch,
                      const ForwardOptions& opts) const override {
    const auto& cfg = p_.config;
    if (batch.empty()) throw ContractError("encode: empty batch");
    const bool use_dropout = opts.train && cfg.dropout > 0.0;
    if (use_dropout && opts.dropout_rng == nullptr) {
      throw ContractError("encode: training with dropout requires a dropout generator");
    }
    std::vector<ad::Segment> segments;
    std::vector<std::size_t> ids, positions, cls_rows;
    for (const auto& seq : batch) {
      if (seq.ids.empty() || seq.ids[0] != corpus::kClsId) {
        throw ContractError("encode: sequence must start with the CLS id");
      }
      if (seq.ids.size() > cfg.max_len) {
        throw ContractError("encode: sequence length " + std::to_string(seq.ids.size()) +
                            " exceeds max_len " + std::to_string(cfg.max_len));
      }
      if (seq.valid == 0 || seq.valid > seq.ids.size()) {
        throw ContractError("encode: invalid padding mask");
      }
      const std::size_t len = opts.trim_padding ? seq.valid : seq.ids.size();
      segments.push_back({ids.size(), len, seq.valid});
      cls_rows.push_back(ids.size());
      for (std::size_t t = 0; t < len; ++t) {
        ids.push_back(seq.ids[t]);
        positions.push_back(t);
      }
    }
    auto drop = [&](const Tensor& t) {
      return use_dropout ? ad::dropout(t, cfg.dropout, *opts.dropout_rng) : t;
    };

    Tensor x = ad::add(ad::embedding(p_.tok_emb, ids), ad::embedding(p_.pos_emb, positions));
    x = drop(x);
    std::vector<ad::AttentionProbs> layer_probs(cfg.n_layers);
    for (std::size_t li = 0; li < cfg.n_layers; ++li) {
      const auto& l = p_.layers[li];
      Tensor h = ad::layer_norm(x, l.ln1_g, l.ln1_b);
      Tensor q = ad::add_row_bias(ad::matmul(h, l.wq), l.bq);
      Tensor k = ad::add_row_bias(ad::matmul(h, l.wk), l.bk);
      Tensor v = ad::add_row_bias(ad::matmul(h, l.wv), l.bv);
      Tensor a = ad::multi_head_attention(q, k, v, segments, cfg.n_heads,
                                          opts.record_attention ? &layer_probs[li] : nullptr);
      x = ad::add(x, drop(ad::add_row_bias(ad::matmul(a, l.wo), l.bo)));
      Tensor h2 = ad::layer_norm(x, l.ln2_g, l.ln2_b);
      Tensor f = ad::gelu(ad::add_row_bias(ad::matmul(h2, l.w1), l.b1));
      f = ad::add_row_bias(ad::matmul(f, l.w2), l.b2);
      x = ad::add(x, drop(f));
    }
    x = ad::layer_norm(x, p_.lnf_g, p_.lnf_b);

    EncodeResult res;
    res.cls = ad::select_rows(x, cls_rows);
    if (opts.record_attention) {
      res.attention.resize(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        auto& rec = res.attention[b];
        rec.length = batch[b].ids.size();
        rec.valid = batch[b].valid;
        const std::size_t L = segments[b].length;
        rec.probs.assign(cfg.n_layers,
                         std::vector<std::vector<double>>(
                             cfg.n_heads, std::vector<double>(rec.length * rec.length, 0.0)));
        for (std::size_t li = 0; li < cfg.n_layers; ++li)
          for (std::size_t h = 0; h < cfg.n_heads; ++h)
            for (std::size_t i = 0; i < L; ++i)
              for (std::size_t j = 0; j < L; ++j)
                rec.probs[li][h][i * rec.length + j] = layer_probs[li][b][h][i * L + j];
      }
    }
    return res;
  }

 private:
  const ModelParams& p_;
};

/// Single-sentence encode: CLS vector [1 x d_model] plus attention for all layers.
inline std::pair<Tensor, AttentionRecord> encode(const ModelParams& params,
                                                 const TokenIdSequence& tokens,
                                                 ForwardOptions opts = {}) {
  opts.record_attention = true;
  TransformerEncoder enc(params);
  auto res = enc.encode(std::span(&tokens, 1), opts);
  return {res.cls, std::move(res.attention.front())};
}

// ---------------------------------------------------------------------------
// heads and predictions

inline Tensor apply_head(const Head& h, const Tensor& cls) {
  Tensor z = ad::tanh(ad::add_row_bias(ad::matmul(cls, h.w1), h.b1));
  return ad::add_row_bias(ad::matmul(z, h.w2), h.b2);
}

struct ForwardResult {
  std::vector<Tensor> logits;  // one [B x 2] tensor per head
  EncodeResult encoded;
};

inline ForwardResult forward(const SentenceEncoder& encoder, std::span<const Head> heads,
                             std::span<const TokenIdSequence> batch, const ForwardOptions& opts) {
  ForwardResult out;
  out.encoded = encoder.encode(batch, opts);
  for (const auto& h : heads) out.logits.push_back(apply_head(h, out.encoded.cls));
  return out;
}

inline ForwardResult forward(const ModelParams& params, std::span<const TokenIdSequence> batch,
                             const ForwardOptions& opts = {}) {
  TransformerEncoder enc(params);
  return forward(enc, params.heads, batch, opts);
}

struct ProbabilityPair {
  double p0 = 0.5;
  double p1 = 0.5;
  /// Argmax decoding; ties go to label 0.
  int label() const { return p1 > p0 ? 1 : 0; }
};

namespace detail {

inline ProbabilityPair softmax_pair(double l0, double l1) {
  ad::NoGradGuard g;
  auto s = ad::softmax(Tensor::row({l0, l1}));
  return {s[0], s[1]};
}

inline void require_regime(const ModelParams& p, std::initializer_list<Regime> allowed,
                           const char* op) {
  for (auto r : allowed)
    if (p.regime == r) return;
  throw ContractError(std::string(op) + ": model regime is " + to_string(p.regime));
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace detail

inline void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
}

inline ProbabilityPair predict_stl(const ModelParams& params, const TokenIdSequence& tokens) {
  detail::require_regime(params, {Regime::StlHyperbole, Regime::StlMetaphor}, "predict_stl");
  ad::NoGradGuard g;
  auto out = forward(params, std::span(&tokens, 1));
  return detail::softmax_pair(out.logits[0][0], out.logits[0][1]);
}

inline std::pair<ProbabilityPair, ProbabilityPair> predict_mtle(const ModelParams& params,
                                                                const TokenIdSequence& tokens) {
  detail::require_regime(params, {Regime::MtlE}, "predict_mtle");
  ad::NoGradGuard g;
  auto out = forward(params, std::span(&tokens, 1));
  return {detail::softmax_pair(out.logits[0][0], out.logits[0][1]),
          detail::softmax_pair(out.logits[1][0], out.logits[1][1])};
}

struct MtlfPrediction {
  double p_hyperbole = 0.5;
  double p_metaphor = 0.5;
  int hyperbole = 0;
  int metaphor = 0;
};

/// label_j = 1 iff sigmoid(logit_j) >= threshold.
inline MtlfPrediction decode_mtlf(double logit_h, double logit_m, double threshold = 0.5) {
  check_threshold(threshold);
  MtlfPrediction p;
  p.p_hyperbole = detail::sigmoid(logit_h);
  p.p_metaphor = detail::sigmoid(logit_m);
  p.hyperbole = p.p_hyperbole >= threshold ? 1 : 0;
  p.metaphor = p.p_metaphor >= threshold ? 1 : 0;
  return p;
}

inline MtlfPrediction predict_mtlf(const ModelParams& params, const TokenIdSequence& tokens,
                                   double threshold = 0.5) {
  detail::require_regime(params, {Regime::MtlF}, "predict_mtlf");
  check_threshold(threshold);
  ad::NoGradGuard g;
  auto out = forward(params, std::span(&tokens, 1));
  return decode_mtlf(out.logits[0][0], out.logits[0][1], threshold);
}

struct PredictedLabels {
  std::optional<int> hyperbole;
  std::optional<int> metaphor;
};

/// Evaluation-mode predictions for a batch, in chunks of `chunk` sentences.
inline std::vector<PredictedLabels> predict_labels(const ModelParams& params,
                                                   std::span<const TokenIdSequence> batch,
                                                   double threshold = 0.5,
                                                   std::size_t chunk = 64) {
  check_threshold(threshold);
  ad::NoGradGuard g;
  std::vector<PredictedLabels> out;
  out.reserve(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += chunk) {
    const auto part = batch.subspan(start, std::min(chunk, batch.size() - start));
    auto res = forward(params, part);
    for (std::size_t b = 0; b < part.size(); ++b) {
      PredictedLabels pl;
      const auto& l0 = res.logits[0];
      switch (params.regime) {
        case Regime::StlHyperbole:
          pl.hyperbole = detail::softmax_pair(l0.at(b, 0), l0.at(b, 1)).label();
          break;
        case Regime::StlMetaphor:
          pl.metaphor = detail::softmax_pair(l0.at(b, 0), l0.at(b, 1)).label();
          break;
        case Regime::MtlE: {
          const auto& l1 = res.logits[1];
          pl.hyperbole = detail::softmax_pair(l0.at(b, 0), l0.at(b, 1)).label();
          pl.metaphor = detail::softmax_pair(l1.at(b, 0), l1.at(b, 1)).label();
          break;
        }
        case Regime::MtlF: {
          auto d = decode_mtlf(l0.at(b, 0), l0.at(b, 1), threshold);
          pl.hyperbole = d.hyperbole;
          pl.metaphor = d.metaphor;
          break;
        }
      }
      out.push_back(pl);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// training

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-4;
  /// Weight of the hyperbole loss under MTL-E.
  double lambda = 0.5;
  bool mean_over_labels = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
    objectives::check_lambda(lambda);
  }
};

struct TrainExample {
  TokenIdSequence tokens;
  std::optional<int> hyperbole;
  std::optional<int> metaphor;
};

struct LossTrace {
  std::vector<double> epoch_loss;
  bool operator==(const LossTrace&) const = default;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, const TrainConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (!p.has_grad()) continue;
      const auto g = p.grad();
      auto w = p.mutable_data();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        if (cfg_.learning_rate == 0.0) continue;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// Loss of one forward pass under the model's regime.
inline Tensor regime_loss(Regime regime, const ForwardResult& out,
                          std::span<const TrainExample* const> batch, const TrainConfig& cfg) {
  auto bits = [&](corpus::Label l) {
    std::vector<int> y;
    y.reserve(batch.size());
    for (const auto* ex : batch) {
      const auto& v = l == corpus::Label::Hyperbole ? ex->hyperbole : ex->metaphor;
      if (!v) throw DataError("training example is missing its " +
                              std::string(corpus::label_name(l)) + " label");
      y.push_back(*v);
    }
    return y;
  };
  auto stl = [&](const Tensor& logits, corpus::Label l) {
    return objectives::ce_loss(ad::column(ad::softmax(logits, 1), 1), bits(l));
  };
  switch (regime) {
    case Regime::StlHyperbole: return stl(out.logits[0], corpus::Label::Hyperbole);
    case Regime::StlMetaphor: return stl(out.logits[0], corpus::Label::Metaphor);
    case Regime::MtlE:
      return objectives::mtle_loss(stl(out.logits[0], corpus::Label::Hyperbole),
                                   stl(out.logits[1], corpus::Label::Metaphor), cfg.lambda);
    case Regime::MtlF: {
      const auto h = bits(corpus::Label::Hyperbole);
      const auto m = bits(corpus::Label::Metaphor);
      std::vector<int> y(2 * h.size());
      for (std::size_t i = 0; i < h.size(); ++i) {
        y[2 * i] = h[i];
        y[2 * i + 1] = m[i];
      }
      return objectives::mtlf_loss(out.logits[0], y, {cfg.mean_over_labels});
    }
  }
  throw ContractError("unknown regime");
}

/// Called after every optimizer step with the 1-based step count.
using StepCallback = std::function<void(std::size_t step, const ModelParams&)>;

/// Minibatch Adam. Data order and dropout come from streams derived from
/// cfg.seed, so equal seeds give identical runs. Returns the per-epoch mean loss.
inline LossTrace train(ModelParams& params, std::span<const TrainExample> data,
                       const TrainConfig& cfg, const StepCallback& on_step = {}) {
  cfg.validate();
  if (data.empty()) throw DataError("training set is empty");
  for (const auto& ex : data) {
    if ((uses_label(params.regime, corpus::Label::Hyperbole) && !ex.hyperbole) ||
        (uses_label(params.regime, corpus::Label::Metaphor) && !ex.metaphor)) {
      throw DataError("training example is missing a label required by regime " +
                      to_string(params.regime));
    }
  }
  Rng order_rng(derive_seed(cfg.seed, "train.order"));
  Rng dropout_rng(derive_seed(cfg.seed, "train.dropout"));
  Adam adam(params.tensors(), cfg);
  adam.zero_grad();
  ForwardOptions fwd;
  fwd.train = true;
  fwd.dropout_rng = &dropout_rng;

  LossTrace trace;
  std::vector<std::size_t> order(data.size());
  std::vector<TokenIdSequence> tokens;
  std::vector<const TrainExample*> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(std::span(order));
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      tokens.clear();
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        tokens.push_back(data[order[i]].tokens);
        batch.push_back(&data[order[i]]);
      }
      auto out = forward(params, tokens, fwd);
      Tensor loss = regime_loss(params.regime, out, batch, cfg);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index + 1));
      }
      total += value * static_cast<double>(end - start);
      loss.backward();
      adam.step();
      adam.zero_grad();
      if (!params.all_finite()) {
        throw NumericError("training diverged: non-finite parameters after epoch " +
                           std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index + 1));
      }
      if (on_step) on_step(adam.steps(), params);
    }
    trace.epoch_loss.push_back(total / static_cast<double>(data.size()));
  }
  return trace;
}

/// Tokenizes labeled sentences into training examples.
inline std::vector<TrainExample> make_examples(const corpus::Dataset& data,
                                               const corpus::Vocabulary& vocab,
                                               std::size_t max_len) {
  std::vector<TrainExample> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    out.push_back({corpus::tokenize(vocab, s.text, max_len), s.hyperbole, s.metaphor});
  }
  return out;
}

}  // namespace figmtl::model
