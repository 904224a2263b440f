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

// Inter-annotator agreement: pairwise Cohen's kappa and Fleiss' kappa over
// binary label tables.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmtl/corpus.hpp"
#include "figmtl/errors.hpp"

namespace figmtl::agreement {

using json = nlohmann::ordered_json;
using Rating = std::optional<int>;

/// labels[item][annotator]; absent ratings are nullopt.
struct AgreementTable {
  std::vector<std::string> annotators;
  std::vector<std::string> items;
  std::vector<std::vector<Rating>> labels;

  std::vector<Rating> column(std::size_t annotator) const {
    std::vector<Rating> out;
    out.reserve(labels.size());
    for (const auto& row : labels) out.push_back(row.at(annotator));
    return out;
  }

  void validate() const {
    if (annotators.size() < 2) throw DataError("agreement table needs at least 2 annotators");
    if (labels.size() != items.size()) throw DataError("agreement table: item count mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].size() != annotators.size()) {
        throw DataError("agreement table: item '" + items[i] + "' has the wrong number of columns");
      }
      for (const auto& r : labels[i]) {
        if (r && *r != 0 && *r != 1) {
          throw DataError("agreement table: item '" + items[i] + "' has a non-binary label");
        }
      }
    }
  }

  /// Dense table with every rating present; rows are items.
  static AgreementTable from_matrix(const std::vector<std::vector<int>>& m) {
    AgreementTable t;
    if (m.empty()) throw DataError("agreement table is empty");
    for (std::size_t a = 0; a < m.front().size(); ++a) t.annotators.push_back("a" + std::to_string(a + 1));
    for (std::size_t i = 0; i < m.size(); ++i) {
      t.items.push_back("item-" + std::to_string(i + 1));
      std::vector<Rating> row;
      for (int v : m[i]) row.emplace_back(v);
      t.labels.push_back(std::move(row));
    }
    t.validate();
    return t;
  }
};

/// Long-form CSV with header item_id,annotator_id,label. Items and annotators
/// keep their first-appearance order. An empty label cell means "not rated".
inline AgreementTable parse_table(std::string_view content) {
  std::size_t pos = 0, line = 1;
  auto header = corpus::detail::read_csv_record(content, pos, line);
  for (auto& h : header) h = corpus::detail::trim(h);
  const std::vector<std::string> expected = {"item_id", "annotator_id", "label"};
  if (header != expected) throw DataError("agreement CSV header must be item_id,annotator_id,label");
  AgreementTable t;
  std::map<std::string, std::size_t> item_index, annotator_index;
  struct Entry {
    std::size_t item, annotator;
    Rating value;
  };
  std::vector<Entry> entries;
  while (pos < content.size()) {
    const std::size_t row_line = line + 1;
    auto f = corpus::detail::read_csv_record(content, pos, line);
    if (f.size() == 1 && corpus::detail::trim(f[0]).empty()) continue;
    if (f.size() != 3) {
      throw DataError("line " + std::to_string(row_line) + ": expected 3 fields, got " +
                      std::to_string(f.size()));
    }
    const auto item = corpus::detail::trim(f[0]);
    const auto ann = corpus::detail::trim(f[1]);
    if (item.empty() || ann.empty()) {
      throw DataError("line " + std::to_string(row_line) + ": empty item or annotator id");
    }
    bool bad = false;
    const auto v = corpus::detail::parse_label_text(f[2], bad);
    if (bad) throw DataError("line " + std::to_string(row_line) + ": label must be 0, 1 or empty");
    auto [it, new_item] = item_index.try_emplace(item, t.items.size());
    if (new_item) t.items.push_back(item);
    auto [at, new_ann] = annotator_index.try_emplace(ann, t.annotators.size());
    if (new_ann) t.annotators.push_back(ann);
    entries.push_back({it->second, at->second, v});
  }
  t.labels.assign(t.items.size(), std::vector<Rating>(t.annotators.size()));
  std::vector<std::vector<bool>> seen(t.items.size(), std::vector<bool>(t.annotators.size(), false));
  for (const auto& e : entries) {
    if (seen[e.item][e.annotator]) {
      throw DataError("item '" + t.items[e.item] + "' rated twice by annotator '" +
                      t.annotators[e.annotator] + "'");
    }
    seen[e.item][e.annotator] = true;
    t.labels[e.item][e.annotator] = e.value;
  }
  t.validate();
  return t;
}

inline AgreementTable load_table(const std::filesystem::path& path) {
  return parse_table(corpus::detail::read_file(path));
}

inline std::string to_csv(const AgreementTable& t) {
  std::ostringstream os;
  os << "item_id,annotator_id,label\n";
  for (std::size_t i = 0; i < t.items.size(); ++i) {
    for (std::size_t a = 0; a < t.annotators.size(); ++a) {
      if (!t.labels[i][a]) continue;
      os << corpus::detail::csv_escape(t.items[i]) << ','
         << corpus::detail::csv_escape(t.annotators[a]) << ',' << *t.labels[i][a] << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Cohen

struct CohenResult {
  double kappa = 0.0;
  double observed = 0.0;  // p_o
  double chance = 0.0;    // p_e
  std::size_t overlap = 0;
  std::size_t dropped = 0;
};

/// Items either annotator skipped are dropped. p_e == 1 (both annotators
/// constant on the same class) is defined as kappa 1.
inline CohenResult cohen(std::span<const Rating> a, std::span<const Rating> b) {
  if (a.size() != b.size()) {
    throw ContractError("cohen_kappa: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + " ratings");
  }
  CohenResult r;
  double agree = 0.0, a1 = 0.0, b1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i] || !b[i]) {
      ++r.dropped;
      continue;
    }
    ++r.overlap;
    agree += (*a[i] == *b[i]) ? 1.0 : 0.0;
    a1 += *a[i];
    b1 += *b[i];
  }
  if (r.overlap == 0) throw DataError("cohen_kappa: the two annotators share no rated item");
  const double n = static_cast<double>(r.overlap);
  r.observed = agree / n;
  const double pa = a1 / n, pb = b1 / n;
  r.chance = pa * pb + (1.0 - pa) * (1.0 - pb);
  r.kappa = (r.chance == 1.0) ? 1.0 : (r.observed - r.chance) / (1.0 - r.chance);
  return r;
}

inline double cohen_kappa(std::span<const Rating> a, std::span<const Rating> b) {
  return cohen(a, b).kappa;
}

inline double cohen_kappa(std::span<const int> a, std::span<const int> b) {
  std::vector<Rating> ra(a.begin(), a.end()), rb(b.begin(), b.end());
  return cohen(ra, rb).kappa;
}

// ---------------------------------------------------------------------------
// Fleiss

struct FleissResult {
  double kappa = 0.0;
  double mean_agreement = 0.0;  // P-bar
  double chance = 0.0;          // P-bar_e
  std::size_t raters = 0;
  std::size_t items_used = 0;
  std::size_t items_dropped = 0;
  std::vector<std::string> warnings;
};

/// The rater count per item is pinned to the most common count over the
/// table (ties go to the larger count); items with a different count are
/// dropped with a warning.
inline FleissResult fleiss(const AgreementTable& t) {
  t.validate();
  FleissResult r;
  std::map<std::size_t, std::size_t> count_freq;
  std::vector<std::size_t> counts(t.labels.size());
  for (std::size_t i = 0; i < t.labels.size(); ++i) {
    counts[i] = static_cast<std::size_t>(std::count_if(
        t.labels[i].begin(), t.labels[i].end(), [](const Rating& x) { return x.has_value(); }));
    if (counts[i] >= 2) ++count_freq[counts[i]];
  }
  if (count_freq.empty()) throw DataError("fleiss_kappa: no item has at least 2 ratings");
  std::size_t n = 0, best = 0;
  for (auto [c, f] : count_freq) {
    if (f >= best) {
      best = f;
      n = c;
    }
  }
  r.raters = n;
  const double nd = static_cast<double>(n);
  double sum_p = 0.0, ones = 0.0;
  for (std::size_t i = 0; i < t.labels.size(); ++i) {
    if (counts[i] != n) {
      ++r.items_dropped;
      continue;
    }
    double k1 = 0.0;
    for (const auto& x : t.labels[i])
      if (x) k1 += *x;
    const double k0 = nd - k1;
    sum_p += (k0 * k0 + k1 * k1 - nd) / (nd * (nd - 1.0));
    ones += k1;
    ++r.items_used;
  }
  if (r.items_dropped > 0) {
    r.warnings.push_back(std::to_string(r.items_dropped) + " item(s) without exactly " +
                         std::to_string(n) + " ratings were excluded");
  }
  const double N = static_cast<double>(r.items_used);
  r.mean_agreement = sum_p / N;
  const double p1 = ones / (N * nd);
  r.chance = p1 * p1 + (1.0 - p1) * (1.0 - p1);
  if (r.chance == 1.0) {
    if (r.mean_agreement != 1.0) throw NumericError("fleiss_kappa: degenerate category distribution");
    r.kappa = 1.0;
  } else {
    r.kappa = (r.mean_agreement - r.chance) / (1.0 - r.chance);
  }
  return r;
}

inline double fleiss_kappa(const AgreementTable& t) { return fleiss(t).kappa; }

// ---------------------------------------------------------------------------
// interpretation

struct Band {
  double upper;  // inclusive
  const char* name;
};

/// Landis and Koch bands. Negative values are "poor"; each band includes its
/// upper edge, so 0.0 is "slight" and 0.80 is "substantial".
inline constexpr std::array<Band, 5> kBands = {{{0.20, "slight"},
                                                {0.40, "fair"},
                                                {0.60, "moderate"},
                                                {0.80, "substantial"},
                                                {1.00, "almost perfect"}}};

inline std::string interpret(double kappa) {
  if (!(kappa >= -1.0 && kappa <= 1.0)) {
    throw ContractError("interpret: kappa must lie in [-1, 1]");
  }
  if (kappa < 0.0) return "poor";
  for (const auto& b : kBands)
    if (kappa <= b.upper) return b.name;
  return kBands.back().name;
}

// ---------------------------------------------------------------------------
// report

struct AgreementReport {
  std::vector<std::string> annotators;
  /// pairwise[i][j] for i != j; nullopt when the pair shares no item.
  std::vector<std::vector<std::optional<CohenResult>>> pairwise;
  FleissResult fleiss;
  std::size_t items = 0;
};

inline AgreementReport report(const AgreementTable& t) {
  t.validate();
  AgreementReport r;
  r.annotators = t.annotators;
  r.items = t.items.size();
  const std::size_t A = t.annotators.size();
  r.pairwise.assign(A, std::vector<std::optional<CohenResult>>(A));
  for (std::size_t i = 0; i < A; ++i) {
    const auto ci = t.column(i);
    for (std::size_t j = i + 1; j < A; ++j) {
      const auto cj = t.column(j);
      try {
        r.pairwise[i][j] = r.pairwise[j][i] = cohen(ci, cj);
      } catch (const DataError&) {
        // no overlap: left empty
      }
    }
    CohenResult self;
    self.kappa = 1.0;
    self.observed = 1.0;
    r.pairwise[i][i] = self;
  }
  r.fleiss = fleiss(t);
  return r;
}

inline json to_json(const AgreementReport& r) {
  json j;
  j["annotators"] = r.annotators;
  j["items"] = r.items;
  json matrix = json::array();
  json pairs = json::array();
  for (std::size_t i = 0; i < r.annotators.size(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < r.annotators.size(); ++k) {
      const auto& c = r.pairwise[i][k];
      row.push_back(c ? json(c->kappa) : json(nullptr));
      if (k > i && c) {
        pairs.push_back({{"a", r.annotators[i]},
                         {"b", r.annotators[k]},
                         {"kappa", c->kappa},
                         {"band", interpret(c->kappa)},
                         {"observed", c->observed},
                         {"chance", c->chance},
                         {"overlap", c->overlap},
                         {"dropped", c->dropped}});
      }
    }
    matrix.push_back(row);
  }
  j["cohen_matrix"] = matrix;
  j["pairs"] = pairs;
  j["fleiss"] = {{"kappa", r.fleiss.kappa},
                 {"band", interpret(r.fleiss.kappa)},
                 {"mean_agreement", r.fleiss.mean_agreement},
                 {"chance", r.fleiss.chance},
                 {"raters", r.fleiss.raters},
                 {"items_used", r.fleiss.items_used},
                 {"items_dropped", r.fleiss.items_dropped}};
  j["warnings"] = r.fleiss.warnings;
  return j;
}

/// Lower-triangular kappa matrix followed by the Fleiss line.
inline std::string to_text(const AgreementReport& r) {
  std::ostringstream os;
  std::size_t w = 6;
  for (const auto& a : r.annotators) w = std::max(w, a.size() + 1);
  os << std::left << std::setw(static_cast<int>(w)) << "";
  for (std::size_t k = 0; k + 1 < r.annotators.size(); ++k)
    os << std::setw(static_cast<int>(w)) << r.annotators[k];
  os << '\n' << std::fixed << std::setprecision(3);
  for (std::size_t i = 1; i < r.annotators.size(); ++i) {
    os << std::setw(static_cast<int>(w)) << r.annotators[i];
    for (std::size_t k = 0; k < i; ++k) {
      const auto& c = r.pairwise[i][k];
      if (c) {
        os << std::setw(static_cast<int>(w)) << c->kappa;
      } else {
        os << std::setw(static_cast<int>(w)) << "-";
      }
    }
    os << '\n';
  }
  os << "Fleiss' K = " << r.fleiss.kappa << " (" << interpret(r.fleiss.kappa) << "), "
     << r.fleiss.items_used << " items x " << r.fleiss.raters << " raters";
  if (r.fleiss.items_dropped) os << ", " << r.fleiss.items_dropped << " dropped";
  os << '\n';
  return os.str();
}

}  // namespace figmtl::agreement
