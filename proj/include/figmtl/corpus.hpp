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

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmtl/errors.hpp"
#include "figmtl/rng.hpp"

namespace figmtl::corpus {

using json = nlohmann::ordered_json;

inline const std::array<std::string_view, 6> kSources = {"HYPO", "HYPO-L", "TroFi",
                                                         "LCC",  "synthetic", "other"};

/// One corpus row with optional binary hyperbole / metaphor labels.
struct LabeledSentence {
  std::string id;
  std::string text;
  std::optional<int> hyperbole;
  std::optional<int> metaphor;
  std::string source = "other";

  bool operator==(const LabeledSentence&) const = default;
};

using Dataset = std::vector<LabeledSentence>;

enum class Label { Hyperbole, Metaphor };

inline std::string_view label_name(Label l) {
  return l == Label::Hyperbole ? "hyperbole" : "metaphor";
}

inline const std::optional<int>& label_of(const LabeledSentence& s, Label l) {
  return l == Label::Hyperbole ? s.hyperbole : s.metaphor;
}

// ---------------------------------------------------------------------------
// loading and saving

enum class Format { Jsonl, Csv };

inline Format format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".csv") return Format::Csv;
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return Format::Jsonl;
  throw ConfigError("cannot infer dataset format from extension '" + ext +
                    "' (expected .jsonl or .csv)");
}

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct LoadReport {
  Dataset rows;
  std::vector<RowError> errors;

  bool ok() const { return errors.empty(); }
  std::string summary() const {
    std::ostringstream os;
    for (const auto& e : errors) os << "line " << e.line << ": " << e.message << '\n';
    return os.str();
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Splits one CSV record (RFC 4180 quoting) starting at `pos`. Advances `pos`
/// past the record terminator and counts consumed newlines in `lines`.
inline std::vector<std::string> read_csv_record(std::string_view in, std::size_t& pos,
                                                std::size_t& lines) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  while (pos < in.size()) {
    const char c = in[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < in.size() && in[pos] == '"') {
          fields.back() += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++lines;
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c == '\n') {
      ++lines;
      break;
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::optional<int> parse_label_text(const std::string& raw, bool& bad) {
  const auto v = trim(raw);
  if (v.empty()) return std::nullopt;
  if (v == "0") return 0;
  if (v == "1") return 1;
  bad = true;
  return std::nullopt;
}

inline std::optional<int> parse_label_json(const json& obj, const char* key, bool& bad) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  const auto& v = obj[key];
  if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
  if (v.is_number_integer() || v.is_number_unsigned()) {
    const auto x = v.get<std::int64_t>();
    if (x == 0 || x == 1) return static_cast<int>(x);
  }
  bad = true;
  return std::nullopt;
}

inline std::string validate_row(const LabeledSentence& s) {
  if (trim(s.text).empty()) return "text is empty";
  if (!s.hyperbole && !s.metaphor) return "row carries no label";
  if (std::find(kSources.begin(), kSources.end(), s.source) == kSources.end()) {
    return "unknown source tag '" + s.source + "'";
  }
  return {};
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Order-preserving parse. Rows that fail validation are reported in
/// LoadReport::errors (with 1-based line numbers) and left out of `rows`.
inline LoadReport parse(std::string_view content, Format format) {
  LoadReport report;
  std::set<std::string> seen_ids;
  auto accept = [&](LabeledSentence s, std::size_t line) {
    if (s.id.empty()) s.id = "row-" + std::to_string(line);
    if (auto msg = detail::validate_row(s); !msg.empty()) {
      report.errors.push_back({line, msg});
    } else if (!seen_ids.insert(s.id).second) {
      report.errors.push_back({line, "duplicate id '" + s.id + "'"});
    } else {
      report.rows.push_back(std::move(s));
    }
  };

  if (format == Format::Jsonl) {
    std::size_t line_no = 0, start = 0;
    while (start < content.size()) {
      auto end = content.find('\n', start);
      if (end == std::string_view::npos) end = content.size();
      const auto line = detail::trim(content.substr(start, end - start));
      start = end + 1;
      ++line_no;
      if (line.empty()) continue;
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        report.errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
        continue;
      }
      if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
        report.errors.push_back({line_no, "missing string field 'text'"});
        continue;
      }
      bool bad_h = false, bad_m = false;
      LabeledSentence s;
      s.text = obj["text"].get<std::string>();
      s.hyperbole = detail::parse_label_json(obj, "hyperbole", bad_h);
      s.metaphor = detail::parse_label_json(obj, "metaphor", bad_m);
      if (bad_h || bad_m) {
        report.errors.push_back(
            {line_no, std::string("unknown label value for '") +
                          (bad_h ? "hyperbole" : "metaphor") + "'"});
        continue;
      }
      if (obj.contains("id") && !obj["id"].is_null()) {
        s.id = obj["id"].is_string() ? obj["id"].get<std::string>() : obj["id"].dump();
      }
      if (obj.contains("source") && obj["source"].is_string()) {
        s.source = obj["source"].get<std::string>();
      }
      accept(std::move(s), line_no);
    }
  } else {
    std::size_t pos = 0, lines = 0;
    const auto header = detail::read_csv_record(content, pos, lines);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[detail::trim(header[i])] = i;
    for (const char* required : {"text", "hyperbole", "metaphor"}) {
      if (!col.count(required)) {
        throw DataError(std::string("CSV header is missing required column '") + required +
                        "'");
      }
    }
    auto field = [&](const std::vector<std::string>& rec, const char* name) -> std::string {
      auto it = col.find(name);
      if (it == col.end() || it->second >= rec.size()) return {};
      return rec[it->second];
    };
    while (pos < content.size()) {
      const std::size_t line_no = lines + 1;
      const auto rec = detail::read_csv_record(content, pos, lines);
      if (rec.size() == 1 && detail::trim(rec[0]).empty()) continue;
      if (rec.size() != header.size()) {
        report.errors.push_back({line_no, "expected " + std::to_string(header.size()) +
                                              " fields, got " + std::to_string(rec.size())});
        continue;
      }
      bool bad_h = false, bad_m = false;
      LabeledSentence s;
      s.text = field(rec, "text");
      s.hyperbole = detail::parse_label_text(field(rec, "hyperbole"), bad_h);
      s.metaphor = detail::parse_label_text(field(rec, "metaphor"), bad_m);
      if (bad_h || bad_m) {
        report.errors.push_back(
            {line_no, std::string("unknown label value for '") +
                          (bad_h ? "hyperbole" : "metaphor") + "'"});
        continue;
      }
      s.id = detail::trim(field(rec, "id"));
      if (auto src = detail::trim(field(rec, "source")); !src.empty()) s.source = src;
      accept(std::move(s), line_no);
    }
  }
  if (report.rows.empty() && report.errors.empty()) {
    throw DataError("dataset is empty");
  }
  return report;
}

inline LoadReport load(const std::filesystem::path& path, Format format) {
  return parse(detail::read_file(path), format);
}

inline LoadReport load(const std::filesystem::path& path) {
  return load(path, format_from_path(path));
}

/// Loads a file and throws DataError listing every malformed row.
inline Dataset load_strict(const std::filesystem::path& path) {
  auto report = load(path);
  if (!report.ok()) {
    throw DataError("malformed rows in " + path.string() + ":\n" + report.summary());
  }
  return std::move(report.rows);
}

inline json to_json(const LabeledSentence& s) {
  json j;
  j["id"] = s.id;
  j["text"] = s.text;
  j["hyperbole"] = s.hyperbole ? json(*s.hyperbole) : json(nullptr);
  j["metaphor"] = s.metaphor ? json(*s.metaphor) : json(nullptr);
  j["source"] = s.source;
  return j;
}

/// Canonical JSONL serialization, one object per line.
inline std::string to_jsonl(const Dataset& data) {
  std::string out;
  for (const auto& s : data) out += to_json(s).dump() + '\n';
  return out;
}

inline std::string to_csv(const Dataset& data) {
  std::string out = "id,text,hyperbole,metaphor,source\n";
  auto bit = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& s : data) {
    out += detail::csv_escape(s.id) + ',' + detail::csv_escape(s.text) + ',' + bit(s.hyperbole) +
           ',' + bit(s.metaphor) + ',' + detail::csv_escape(s.source) + '\n';
  }
  return out;
}

inline void save(const std::filesystem::path& path, const Dataset& data,
                 Format format = Format::Jsonl) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << (format == Format::Jsonl ? to_jsonl(data) : to_csv(data));
}

/// Stable 64-bit fingerprint of the canonical serialization.
inline std::uint64_t corpus_hash(const Dataset& data) { return fnv1a64(to_jsonl(data)); }

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// tokenization

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kClsId = 1;
inline constexpr std::size_t kUnkId = 2;
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kUnkToken = "[UNK]";

/// Lowercases ASCII letters and splits on whitespace; ASCII punctuation becomes
/// single-character tokens. Non-ASCII bytes are kept inside words.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur += (c < 0x80) ? static_cast<char>(std::tolower(c)) : ch;
    }
  }
  flush();
  return out;
}

class Vocabulary {
 public:
  Vocabulary() : tokens_{std::string(kPadToken), std::string(kClsToken), std::string(kUnkToken)} {
    reindex();
  }

  /// Frequency-descending, then lexicographic. max_size counts the reserved ids
  /// (0 = unlimited).
  static Vocabulary build(const std::vector<std::string>& texts, std::size_t max_size = 0) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& t : texts)
      for (auto& w : split_words(t)) ++counts[w];
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    Vocabulary v;
    for (auto& [w, n] : items) {
      if (max_size != 0 && v.tokens_.size() >= max_size) break;
      if (w == kPadToken || w == kClsToken || w == kUnkToken) continue;
      v.tokens_.push_back(w);
    }
    v.reindex();
    return v;
  }

  static Vocabulary build(const Dataset& data, std::size_t max_size = 0) {
    std::vector<std::string> texts;
    texts.reserve(data.size());
    for (const auto& s : data) texts.push_back(s.text);
    return build(texts, max_size);
  }

  /// Restores a vocabulary from its ordered token list (ids are positions).
  static Vocabulary from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 3 || tokens[kPadId] != kPadToken || tokens[kClsId] != kClsToken ||
        tokens[kUnkId] != kUnkToken) {
      throw DataError("vocabulary token list does not start with the reserved tokens");
    }
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.reindex();
    if (v.index_.size() != v.tokens_.size()) throw DataError("vocabulary has duplicate tokens");
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkId : it->second;
  }
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens_) h = fnv1a64(t + '\n', h);
    return h;
  }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Token ids padded to a fixed length. Positions [0, valid) hold CLS followed
/// by word ids; the rest are PAD.
struct TokenIdSequence {
  std::vector<std::size_t> ids;
  std::size_t valid = 0;
  /// Surface form for each valid position ("[CLS]" first).
  std::vector<std::string> pieces;

  std::size_t length() const { return ids.size(); }
  std::vector<int> mask() const {
    std::vector<int> m(ids.size(), 0);
    std::fill_n(m.begin(), valid, 1);
    return m;
  }
};

inline TokenIdSequence tokenize(const Vocabulary& vocab, std::string_view text,
                                std::size_t max_len) {
  if (max_len == 0) throw ConfigError("max_len must be positive");
  TokenIdSequence seq;
  seq.ids.assign(max_len, kPadId);
  seq.ids[0] = kClsId;
  seq.pieces.emplace_back(kClsToken);
  std::size_t pos = 1;
  for (auto& w : split_words(text)) {
    if (pos >= max_len) break;
    seq.ids[pos++] = vocab.id(w);
    seq.pieces.push_back(std::move(w));
  }
  seq.valid = pos;
  return seq;
}

// ---------------------------------------------------------------------------
// statistics

/// Joint label counts, hyperbole-major: (H,M), (H,notM), (notH,M), (notH,notM).
struct QuadrantStats {
  std::size_t h_m = 0;
  std::size_t h_nm = 0;
  std::size_t nh_m = 0;
  std::size_t nh_nm = 0;
  std::size_t total = 0;

  bool operator==(const QuadrantStats&) const = default;
  std::size_t sum() const { return h_m + h_nm + nh_m + nh_nm; }
  /// Metaphor-major ordering: (M,H), (M,notH), (notM,H), (notM,notH).
  std::array<std::size_t, 4> metaphor_major() const { return {h_m, nh_m, h_nm, nh_nm}; }
  std::array<std::size_t, 4> hyperbole_major() const { return {h_m, h_nm, nh_m, nh_nm}; }
};

/// Quadrant index 0..3 in hyperbole-major order.
inline int quadrant_of(int hyperbole, int metaphor) {
  return (hyperbole ? 0 : 2) + (metaphor ? 0 : 1);
}

inline QuadrantStats quadrant_stats(const Dataset& data) {
  std::vector<std::string> missing;
  QuadrantStats q;
  for (const auto& s : data) {
    if (!s.hyperbole || !s.metaphor) {
      missing.push_back(s.id);
      continue;
    }
    switch (quadrant_of(*s.hyperbole, *s.metaphor)) {
      case 0: ++q.h_m; break;
      case 1: ++q.h_nm; break;
      case 2: ++q.nh_m; break;
      default: ++q.nh_nm; break;
    }
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size(); ++i) ids += (i ? ", " : "") + missing[i];
    throw DataError("rows missing a label: " + ids);
  }
  q.total = data.size();
  return q;
}

/// Published joint label statistics for the four annotated source corpora.
struct DatasetReference {
  std::string_view name;
  std::size_t declared_total;
  QuadrantStats quadrants;  // hyperbole-major
};

inline const std::array<DatasetReference, 4>& dataset_references() {
  static const std::array<DatasetReference, 4> refs = {{
      {"HYPO", 1418, {515, 194, 107, 602, 1418}},
      {"HYPO-L", 3326, {237, 770, 19, 2200, 3226}},
      {"TroFi", 3838, {209, 235, 1710, 1684, 3838}},
      {"LCC", 7542, {615, 144, 3187, 3596, 7542}},
  }};
  return refs;
}

inline const DatasetReference* find_reference(std::string_view name) {
  for (const auto& r : dataset_references())
    if (r.name == name) return &r;
  return nullptr;
}

struct ReferenceCheck {
  std::string dataset;
  bool quadrants_match = false;
  std::vector<std::string> mismatches;
  std::vector<std::string> warnings;
};

inline ReferenceCheck check_reference(const QuadrantStats& observed, const DatasetReference& ref) {
  ReferenceCheck out;
  out.dataset = std::string(ref.name);
  const auto got = observed.hyperbole_major();
  const auto want = ref.quadrants.hyperbole_major();
  static const std::array<const char*, 4> names = {"H/M", "H/notM", "notH/M", "notH/notM"};
  for (std::size_t i = 0; i < 4; ++i) {
    if (got[i] != want[i]) {
      out.mismatches.push_back(std::string(names[i]) + ": observed " + std::to_string(got[i]) +
                               ", reference " + std::to_string(want[i]));
    }
  }
  out.quadrants_match = out.mismatches.empty();
  if (ref.declared_total != ref.quadrants.sum()) {
    out.warnings.push_back("declared size " + std::to_string(ref.declared_total) +
                           " differs from the quadrant sum " +
                           std::to_string(ref.quadrants.sum()));
  }
  if (observed.total != ref.declared_total && observed.total != ref.quadrants.sum()) {
    out.mismatches.push_back("row count " + std::to_string(observed.total) +
                             " matches neither the declared size nor the quadrant sum");
  }
  return out;
}

inline json stats_report(const QuadrantStats& q, const ReferenceCheck* ref = nullptr) {
  json j;
  j["quadrants"] = {{"H_M", q.h_m}, {"H_notM", q.h_nm}, {"notH_M", q.nh_m}, {"notH_notM", q.nh_nm}};
  j["total"] = q.total;
  j["hyperbole"] = {{"positive", q.h_m + q.h_nm}, {"negative", q.nh_m + q.nh_nm}};
  j["metaphor"] = {{"positive", q.h_m + q.nh_m}, {"negative", q.h_nm + q.nh_nm}};
  if (ref) {
    j["reference"] = {{"dataset", ref->dataset},
                      {"quadrants_match", ref->quadrants_match},
                      {"mismatches", ref->mismatches},
                      {"warnings", ref->warnings}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// balancing

/// Majority/minority ratios of the published label-balanced metaphor corpora.
inline constexpr double kTroFiBalanceRatio = 1100.0 / 444.0;
inline constexpr double kLccBalanceRatio = 1400.0 / 634.0;

/// Keeps every row positive for `minority`, then uniformly downsamples the
/// negative rows until negatives / positives <= ratio. Survivors keep their
/// original order.
inline Dataset balance(const Dataset& data, Label minority, double ratio, std::uint64_t seed) {
  if (!(ratio >= 1.0)) throw ConfigError("balance ratio must be >= 1");
  std::vector<std::size_t> majority;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& v = label_of(data[i], minority);
    if (!v) {
      throw DataError("row '" + data[i].id + "' has no " + std::string(label_name(minority)) +
                      " label");
    }
    if (*v) {
      ++positives;
    } else {
      majority.push_back(i);
    }
  }
  if (positives == 0) {
    throw DataError("no " + std::string(label_name(minority)) + "-positive rows to balance on");
  }
  const auto cap = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(positives)));
  std::vector<bool> keep(data.size(), true);
  if (majority.size() > cap) {
    Rng rng(seed);
    rng.shuffle(std::span(majority));
    for (std::size_t i = cap; i < majority.size(); ++i) keep[majority[i]] = false;
  }
  Dataset out;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (keep[i]) out.push_back(data[i]);
  return out;
}

// ---------------------------------------------------------------------------
// synthetic corpus

/// Word lists for template sentences. Hyperbole cues are exaggerations,
/// metaphor cues are predicate nouns for copular "X is a Y" frames.
struct SynthSpec {
  std::vector<std::string> subjects = {
      "my sister", "the teacher", "our neighbour", "this city", "the meeting", "my boss",
      "the old car", "her voice",  "the exam",     "his office", "the kitchen", "our team",
      "the river",  "my phone",    "the library", "the garden"};
  std::vector<std::string> literal_predicates = {
      "was quite busy today",      "arrived a little late", "needs some repairs",
      "is open until six",         "looked tired",          "was mentioned in the report",
      "seemed calm this morning",  "cost more than expected", "is near the station",
      "was cleaned on monday",     "felt warm",             "has two windows",
      "was moved last week",       "sounded familiar",      "is painted blue",
      "took an hour"};
  std::vector<std::string> hyperbole_cues = {
      "a million times", "the size of a house",  "older than the hills", "the best in the universe",
      "forever and ever", "a thousand miles long", "heavier than a truck", "louder than a jet",
      "the worst ever",  "a billion years"};
  std::vector<std::string> metaphor_cues = {
      "a volcano", "a prison", "a zoo",     "a rollercoaster", "a maze",   "a battlefield",
      "a jungle",  "a desert", "a furnace", "a circus",        "a garden", "a storm"};
  /// Probability that a positive label surfaces its cue in the sentence.
  double hyperbole_cue_rate = 0.85;
  double metaphor_cue_rate = 0.85;
  double hyperbole_rate = 0.5;
  double metaphor_rate = 0.5;
};

/// Metaphor cues for synthetic corpora with a larger cue inventory. The first
/// twelve are the SynthSpec defaults.
inline const std::vector<std::string>& metaphor_vehicles() {
  static const std::vector<std::string> v = {
      "a volcano",     "a prison",       "a zoo",          "a rollercoaster", "a maze",
      "a battlefield", "a jungle",       "a desert",       "a furnace",       "a circus",
      "a garden",      "a storm",        "a minefield",    "a fortress",      "a beehive",
      "a swamp",       "a lighthouse",   "a magnet",       "a sponge",        "a treadmill",
      "a puzzle",      "a graveyard",    "a goldmine",     "a wildfire",      "a glacier",
      "a marathon",    "a soap opera",   "a fairy tale",   "a nightmare",     "a powder keg",
      "a rock",        "a brick wall",   "a black hole",   "a tornado",       "a ghost town",
      "a snake pit",   "a melting pot",  "a pressure cooker", "a house of cards", "a sinking ship",
      "a ticking bomb", "an iceberg",    "an anchor",      "an oasis",        "a compass",
      "a lion",        "a snail",        "a time machine"};
  return v;
}

/// Template corpus with joint labels. With probability rho the metaphor label
/// copies the hyperbole label; otherwise both are independent Bernoulli draws.
/// With equal 0.5 marginals the expected label correlation is rho.
inline Dataset synth_corpus(const SynthSpec& spec, double rho, std::size_t size,
                            std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (spec.subjects.empty() || spec.literal_predicates.empty() || spec.hyperbole_cues.empty() ||
      spec.metaphor_cues.empty()) {
    throw ConfigError("synthetic corpus cue lists must be non-empty");
  }
  Rng label_rng(derive_seed(seed, "synth.labels"));
  Rng text_rng(derive_seed(seed, "synth.text"));
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
    return v[text_rng.uniform_index(v.size())];
  };
  Dataset out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const int h = label_rng.bernoulli(spec.hyperbole_rate) ? 1 : 0;
    int m;
    if (label_rng.bernoulli(rho)) {
      m = h;
    } else {
      m = label_rng.bernoulli(spec.metaphor_rate) ? 1 : 0;
    }
    const bool show_h = h && text_rng.bernoulli(spec.hyperbole_cue_rate);
    const bool show_m = m && text_rng.bernoulli(spec.metaphor_cue_rate);
    std::string text = pick(spec.subjects);
    if (show_m) {
      text += " is " + pick(spec.metaphor_cues);
    } else {
      text += " " + pick(spec.literal_predicates);
    }
    if (show_h) text += " " + pick(spec.hyperbole_cues);
    text += ".";
    text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
    LabeledSentence s;
    s.id = "synth-" + std::to_string(i);
    s.text = std::move(text);
    s.hyperbole = h;
    s.metaphor = m;
    s.source = "synthetic";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace figmtl::corpus
