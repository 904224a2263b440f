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

// Final-layer CLS attention salience and side-by-side comparison of two
// models' salience on the same sentence.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmtl/autodiff.hpp"
#include "figmtl/corpus.hpp"
#include "figmtl/errors.hpp"
#include "figmtl/model.hpp"

namespace figmtl::attnprobe {

using json = nlohmann::ordered_json;

/// Per-token attention mass. tokens[i] is the surface form of position i
/// ("[CLS]" first); pads are excluded.
struct SalienceMap {
  std::vector<std::string> tokens;
  std::vector<double> weights;
  std::string regime;
  std::string id;
};

struct SalienceOptions {
  /// Skip pad masking and renormalization: plain head mean of the CLS row over
  /// the untrimmed sequence, restricted to non-pad positions.
  bool raw = false;
};

/// CLS row of the final layer, averaged over heads, pad keys zeroed and the
/// result renormalized to sum to 1.
inline SalienceMap cls_salience(const model::ModelParams& params,
                                const corpus::TokenIdSequence& tokens, std::string id = {},
                                const SalienceOptions& opts = {}) {
  if (params.config.n_layers == 0) throw ContractError("cls_salience: model has no attention layers");
  if (!params.all_finite()) throw NumericError("cls_salience: model has non-finite parameters");
  if (tokens.pieces.size() != tokens.valid) {
    throw ContractError("cls_salience: token pieces do not match the valid length");
  }
  ad::NoGradGuard guard;
  model::ForwardOptions fwd;
  fwd.trim_padding = !opts.raw;
  auto [cls, rec] = model::encode(params, tokens, fwd);
  const std::size_t last = rec.probs.size() - 1;
  const std::size_t heads = rec.probs[last].size();

  std::vector<double> row(rec.length, 0.0);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t j = 0; j < rec.length; ++j) row[j] += rec.at(last, h, 0, j);
  for (auto& w : row) w /= static_cast<double>(heads);

  SalienceMap m;
  m.tokens = tokens.pieces;
  m.regime = model::to_string(params.regime);
  m.id = std::move(id);
  m.weights.assign(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(rec.valid));
  for (double w : m.weights)
    if (!std::isfinite(w)) throw NumericError("cls_salience: non-finite attention weight");
  if (!opts.raw) {
    const double total = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
    if (!(total > 0.0)) throw NumericError("cls_salience: CLS row has no mass on real tokens");
    for (auto& w : m.weights) w /= total;
  }
  return m;
}

inline SalienceMap cls_salience(const model::ModelParams& params, const corpus::Vocabulary& vocab,
                                const std::string& sentence, std::string id = {},
                                const SalienceOptions& opts = {}) {
  return cls_salience(params, corpus::tokenize(vocab, sentence, params.config.max_len),
                      std::move(id), opts);
}

/// Half the L1 distance between two probability vectors.
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ContractError("total_variation: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

struct SalienceComparison {
  SalienceMap a;
  SalienceMap b;
  std::vector<double> deltas;  // b - a
  double tv_distance = 0.0;
};

inline SalienceComparison compare_salience(const SalienceMap& a, const SalienceMap& b) {
  if (a.tokens != b.tokens || a.weights.size() != a.tokens.size() ||
      b.weights.size() != b.tokens.size()) {
    throw ContractError("compare_salience: maps are over different token sequences");
  }
  SalienceComparison c{a, b, {}, 0.0};
  for (std::size_t i = 0; i < a.weights.size(); ++i) c.deltas.push_back(b.weights[i] - a.weights[i]);
  c.tv_distance = total_variation(a.weights, b.weights);
  return c;
}

// ---------------------------------------------------------------------------
// rendering

inline constexpr std::size_t kBuckets = 8;
/// Lightest to darkest.
inline constexpr std::string_view kShades = " .:-=+*#";

/// Intensity bucket in [0, 7] over [0, max_weight].
inline std::size_t bucket(double w, double max_weight) {
  if (!(max_weight > 0.0) || w <= 0.0) return 0;
  const auto b = static_cast<std::size_t>(std::floor(w / max_weight * kBuckets));
  return std::min(b, kBuckets - 1);
}

namespace detail {

inline double max_weight(std::initializer_list<const SalienceMap*> maps) {
  double m = 0.0;
  for (const auto* s : maps)
    for (double w : s->weights) m = std::max(m, w);
  return m;
}

inline std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void strip_row(std::ostringstream& os, const std::string& label, std::size_t label_w,
                      const SalienceMap& m, const std::vector<std::size_t>& widths, double mx) {
  os << std::left << std::setw(static_cast<int>(label_w)) << label;
  for (std::size_t i = 0; i < m.weights.size(); ++i)
    os << ' ' << std::string(widths[i], kShades[bucket(m.weights[i], mx)]);
  os << '\n';
}

inline std::string html_row(const SalienceMap& m, double mx) {
  std::ostringstream os;
  os << "<div class=\"strip\"><span class=\"regime\">" << html_escape(m.regime) << "</span>";
  for (std::size_t i = 0; i < m.tokens.size(); ++i) {
    const auto b = bucket(m.weights[i], mx);
    os << "<span class=\"tok b" << b << "\" title=\"" << std::setprecision(6) << m.weights[i]
       << "\" style=\"background:rgba(192,32,32," << std::setprecision(3)
       << static_cast<double>(b + 1) / kBuckets << ")\">" << html_escape(m.tokens[i]) << "</span>";
  }
  os << "</div>";
  return os.str();
}

}  // namespace detail

/// One map as token / shade rows.
inline std::string heat_strip(const SalienceMap& m) {
  std::vector<std::size_t> widths;
  for (const auto& t : m.tokens) widths.push_back(std::max<std::size_t>(t.size(), 1));
  std::ostringstream os;
  const std::size_t lw = std::max<std::size_t>(m.regime.size(), 6);
  os << std::left << std::setw(static_cast<int>(lw)) << "";
  for (std::size_t i = 0; i < m.tokens.size(); ++i)
    os << ' ' << std::setw(static_cast<int>(widths[i])) << m.tokens[i];
  os << '\n';
  detail::strip_row(os, m.regime, lw, m, widths, detail::max_weight({&m}));
  return os.str();
}

/// Token row followed by one shade row per model. Both rows share one scale.
inline std::string heat_strip(const SalienceComparison& c) {
  std::vector<std::size_t> widths;
  for (const auto& t : c.a.tokens) widths.push_back(std::max<std::size_t>(t.size(), 1));
  const double mx = detail::max_weight({&c.a, &c.b});
  const std::size_t lw = std::max({c.a.regime.size(), c.b.regime.size(), std::size_t{6}});
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(lw)) << "";
  for (std::size_t i = 0; i < c.a.tokens.size(); ++i)
    os << ' ' << std::setw(static_cast<int>(widths[i])) << c.a.tokens[i];
  os << '\n';
  detail::strip_row(os, c.a.regime, lw, c.a, widths, mx);
  detail::strip_row(os, c.b.regime, lw, c.b, widths, mx);
  os << "TV distance " << std::fixed << std::setprecision(4) << c.tv_distance << '\n';
  return os.str();
}

inline std::string html_fragment(const SalienceMap& m) {
  return detail::html_row(m, detail::max_weight({&m}));
}

inline std::string html_fragment(const SalienceComparison& c) {
  const double mx = detail::max_weight({&c.a, &c.b});
  std::ostringstream os;
  os << "<div class=\"pair\">" << detail::html_row(c.a, mx) << detail::html_row(c.b, mx)
     << "<div class=\"tv\">TV distance " << std::fixed << std::setprecision(4) << c.tv_distance
     << "</div></div>";
  return os.str();
}

/// Standalone page from pre-rendered fragments.
inline std::string html_report(const std::vector<std::string>& fragments,
                               const std::string& title = "CLS attention") {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << detail::html_escape(title)
     << "</title>\n<style>body{font-family:sans-serif}.strip{margin:2px 0}"
        ".regime{display:inline-block;width:8em;color:#555}"
        ".tok{padding:2px 4px;margin-right:2px}.pair{margin-bottom:1em}</style>\n"
        "</head><body>\n<h1>"
     << detail::html_escape(title) << "</h1>\n";
  for (const auto& f : fragments) os << f << '\n';
  os << "</body></html>\n";
  return os.str();
}

inline json to_json(const SalienceMap& m) {
  return json{{"id", m.id}, {"regime", m.regime}, {"tokens", m.tokens}, {"weights", m.weights}};
}

inline json to_json(const SalienceComparison& c) {
  return json{{"a", to_json(c.a)}, {"b", to_json(c.b)}, {"deltas", c.deltas},
              {"tv_distance", c.tv_distance}};
}

}  // namespace figmtl::attnprobe
