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

// Stratified k-fold cross-validation over several runs, precision/recall/F1
// aggregation and STL-vs-MTL significance testing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmtl/corpus.hpp"
#include "figmtl/errors.hpp"
#include "figmtl/model.hpp"
#include "figmtl/rng.hpp"
#include "figmtl/stats.hpp"

namespace figmtl::eval {

using corpus::Dataset;
using corpus::Label;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// folds

/// Fold assignment of one run. fold_of[i] is the test fold of dataset row i.
struct FoldAssignment {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;
  /// "joint", "hyperbole", "metaphor" or "none".
  std::string stratified_on;
  std::vector<std::string> warnings;

  std::vector<std::size_t> test_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> train_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] != fold) out.push_back(i);
    return out;
  }
  std::map<std::string, std::size_t> by_id(const Dataset& data) const {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < data.size(); ++i) out[data[i].id] = fold_of[i];
    return out;
  }
};

struct FoldPlan {
  std::size_t k = 10;
  std::vector<std::uint64_t> run_seeds;
  std::vector<FoldAssignment> runs;
};

/// Stratified assignment: rows are grouped by stratum, each group is shuffled
/// and the concatenated groups are dealt round-robin over the folds. Every
/// fold then holds floor or ceil of each stratum's share, and fold sizes
/// differ by at most one.
///
/// Strata are the four joint label quadrants when both labels are present on
/// every row; otherwise the single label present everywhere (with a warning).
inline FoldAssignment make_folds(const Dataset& data, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (k > data.size()) {
    throw ConfigError("fold count " + std::to_string(k) + " exceeds dataset size " +
                      std::to_string(data.size()));
  }
  FoldAssignment fa;
  fa.seed = seed;
  fa.k = k;
  const bool all_h = std::all_of(data.begin(), data.end(), [](auto& s) { return s.hyperbole.has_value(); });
  const bool all_m = std::all_of(data.begin(), data.end(), [](auto& s) { return s.metaphor.has_value(); });
  std::vector<std::vector<std::size_t>> strata;
  if (all_h && all_m) {
    fa.stratified_on = "joint";
    strata.resize(4);
    for (std::size_t i = 0; i < data.size(); ++i)
      strata[corpus::quadrant_of(*data[i].hyperbole, *data[i].metaphor)].push_back(i);
    static const char* names[] = {"H/M", "H/notM", "notH/M", "notH/notM"};
    for (std::size_t q = 0; q < 4; ++q) {
      if (strata[q].size() < k) {
        fa.warnings.push_back(std::string("quadrant ") + names[q] + " has " +
                              std::to_string(strata[q].size()) + " rows, fewer than " +
                              std::to_string(k) + " folds");
      }
    }
  } else if (all_h || all_m) {
    const Label l = all_h ? Label::Hyperbole : Label::Metaphor;
    fa.stratified_on = std::string(corpus::label_name(l));
    fa.warnings.push_back("not every row carries both labels; stratifying on " +
                          fa.stratified_on + " only");
    strata.resize(2);
    for (std::size_t i = 0; i < data.size(); ++i) strata[*corpus::label_of(data[i], l)].push_back(i);
  } else {
    fa.stratified_on = "none";
    fa.warnings.push_back("no label is present on every row; folds are not stratified");
    strata.resize(1);
    strata[0].resize(data.size());
    std::iota(strata[0].begin(), strata[0].end(), std::size_t{0});
  }
  Rng rng(derive_seed(seed, "folds"));
  fa.fold_of.assign(data.size(), 0);
  std::size_t pos = 0;
  for (auto& s : strata) {
    rng.shuffle(std::span(s));
    for (std::size_t i : s) fa.fold_of[i] = pos++ % k;
  }
  return fa;
}

inline FoldPlan make_fold_plan(const Dataset& data, std::size_t k,
                               const std::vector<std::uint64_t>& run_seeds) {
  FoldPlan plan;
  plan.k = k;
  plan.run_seeds = run_seeds;
  for (auto s : run_seeds) plan.runs.push_back(make_folds(data, k, s));
  return plan;
}

// ---------------------------------------------------------------------------
// metrics

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  bool no_predicted_positives = false;  // precision set to 0
  bool no_gold_positives = false;       // recall set to 0
  bool f1_undefined = false;            // P + R == 0, F1 set to 0
};

/// Positive-class precision, recall and F1 with pinned zero-division rules.
inline PrfResult prf(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.size() != gold.size()) {
    throw ContractError("prf: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) throw ContractError("prf: empty input");
  PrfResult r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] != 0, g = gold[i] != 0;
    if (p && g) ++r.tp;
    else if (p) ++r.fp;
    else if (g) ++r.fn;
    else ++r.tn;
  }
  if (r.tp + r.fp == 0) {
    r.no_predicted_positives = true;
  } else {
    r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  }
  if (r.tp + r.fn == 0) {
    r.no_gold_positives = true;
  } else {
    r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  }
  if (r.precision + r.recall == 0.0) {
    r.f1_undefined = true;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

// ---------------------------------------------------------------------------
// experiment

/// Regime as reported in a comparison table. STL trains one single-task model
/// per label.
enum class RegimeGroup { Stl, MtlE, MtlF };

inline std::string to_string(RegimeGroup g) {
  switch (g) {
    case RegimeGroup::Stl: return "STL";
    case RegimeGroup::MtlE: return "MTL-E";
    case RegimeGroup::MtlF: return "MTL-F";
  }
  return "?";
}

inline RegimeGroup parse_regime_group(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "stl") return RegimeGroup::Stl;
  if (s == "mtle" || s == "mtl-e") return RegimeGroup::MtlE;
  if (s == "mtlf" || s == "mtl-f") return RegimeGroup::MtlF;
  throw ConfigError("unknown regime '" + s + "' (expected stl, mtle or mtlf)");
}

inline std::vector<model::Regime> model_regimes(RegimeGroup g) {
  switch (g) {
    case RegimeGroup::Stl: return {model::Regime::StlHyperbole, model::Regime::StlMetaphor};
    case RegimeGroup::MtlE: return {model::Regime::MtlE};
    case RegimeGroup::MtlF: return {model::Regime::MtlF};
  }
  return {};
}

struct ExperimentConfig {
  std::size_t folds = 10;
  std::vector<std::uint64_t> run_seeds = {1, 2, 3};
  std::vector<RegimeGroup> regimes = {RegimeGroup::Stl, RegimeGroup::MtlF};
  /// vocab_size is filled per fold from the training split.
  model::EncoderConfig encoder;
  model::TrainConfig train;
  double init_std = 0.02;
  double threshold = 0.5;
  std::size_t vocab_max = 0;
  std::size_t jobs = 1;
  stats::TestVariant variant = stats::TestVariant::Paired;
};

struct FoldScore {
  std::size_t run = 0;
  std::size_t fold = 0;
  RegimeGroup regime = RegimeGroup::Stl;
  Label task = Label::Hyperbole;
  PrfResult prf;
  bool failed = false;
  std::string error;
};

struct TaskSummary {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f1_sd = 0.0;
  double precision_sd = 0.0;
  double recall_sd = 0.0;
  std::size_t observations = 0;
  std::size_t failures = 0;
};

struct Comparison {
  RegimeGroup baseline = RegimeGroup::Stl;
  RegimeGroup candidate = RegimeGroup::MtlF;
  Label task = Label::Hyperbole;
  stats::SignificanceResult result;
};

struct ComparisonReport {
  ExperimentConfig config;
  std::size_t dataset_size = 0;
  std::uint64_t corpus_hash = 0;
  std::vector<FoldScore> scores;
  std::map<std::pair<RegimeGroup, Label>, TaskSummary> summary;
  std::vector<Comparison> comparisons;
  std::vector<std::string> warnings;

  std::vector<double> f1_values(RegimeGroup g, Label task) const {
    std::vector<double> out;
    for (const auto& s : scores)
      if (s.regime == g && s.task == task && !s.failed) out.push_back(s.prf.f1);
    return out;
  }
};

namespace detail {

struct Job {
  std::size_t run = 0;
  std::size_t fold = 0;
  RegimeGroup group = RegimeGroup::Stl;
  model::Regime regime = model::Regime::MtlF;
};

struct JobResult {
  std::vector<FoldScore> scores;
};

inline std::vector<int> bits(const Dataset& data, const std::vector<std::size_t>& rows, Label l) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto i : rows) out.push_back(*corpus::label_of(data[i], l));
  return out;
}

inline JobResult run_job(const Dataset& data, const FoldAssignment& fa, const Job& job,
                         const ExperimentConfig& cfg) {
  const auto train_rows = fa.train_rows(job.fold);
  const auto test_rows = fa.test_rows(job.fold);
  Dataset train_set;
  train_set.reserve(train_rows.size());
  for (auto i : train_rows) train_set.push_back(data[i]);
  const auto vocab = corpus::Vocabulary::build(train_set, cfg.vocab_max);
  auto enc = cfg.encoder;
  enc.vocab_size = vocab.size();

  // Identical init and data-order seeds for every regime within one (run, fold),
  // so regimes are compared on matched folds and matched initializations.
  const std::uint64_t cell_seed = derive_seed(fa.seed, "cell", {job.fold});
  std::vector<Label> tasks;
  for (Label l : {Label::Hyperbole, Label::Metaphor})
    if (model::uses_label(job.regime, l)) tasks.push_back(l);

  JobResult res;
  auto record_failure = [&](const std::string& msg) {
    for (Label l : tasks) {
      FoldScore s{job.run, job.fold, job.group, l, {}, true, msg};
      res.scores.push_back(s);
    }
  };
  try {
    auto params = model::init_params(enc, job.regime, cell_seed, cfg.init_std);
    auto tcfg = cfg.train;
    tcfg.seed = cell_seed;
    const auto examples = model::make_examples(train_set, vocab, enc.max_len);
    model::train(params, examples, tcfg);
    std::vector<corpus::TokenIdSequence> test_tokens;
    test_tokens.reserve(test_rows.size());
    for (auto i : test_rows) test_tokens.push_back(corpus::tokenize(vocab, data[i].text, enc.max_len));
    const auto preds = model::predict_labels(params, test_tokens, cfg.threshold);
    for (Label l : tasks) {
      std::vector<int> p;
      p.reserve(preds.size());
      for (const auto& pl : preds) p.push_back(*(l == Label::Hyperbole ? pl.hyperbole : pl.metaphor));
      FoldScore s{job.run, job.fold, job.group, l, prf(p, bits(data, test_rows, l)), false, {}};
      res.scores.push_back(s);
    }
  } catch (const NumericError& e) {
    record_failure(e.what());
  }
  return res;
}

inline double sd(const std::vector<double>& v, double m) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

/// Runs jobs on `jobs` worker threads. Results are placed by job index, so the
/// output does not depend on completion order.
template <typename Result, typename Fn>
std::vector<Result> run_parallel(std::size_t count, std::size_t jobs, Fn fn) {
  std::vector<Result> results(count);
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < std::min(jobs, count); ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          results[i] = fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

/// Cross-validated comparison of the requested regimes. Every regime sees the
/// same folds within a run; training divergence is recorded per cell.
inline ComparisonReport run_experiment(const Dataset& data, const ExperimentConfig& cfg) {
  if (cfg.regimes.empty()) throw ConfigError("no regimes requested");
  if (cfg.run_seeds.empty()) throw ConfigError("at least one run seed is required");
  if (cfg.jobs == 0) throw ConfigError("jobs must be positive");
  model::check_threshold(cfg.threshold);
  cfg.train.validate();
  {
    auto enc = cfg.encoder;
    enc.vocab_size = 1;
    enc.validate();
  }
  for (auto g : cfg.regimes) {
    for (auto r : model_regimes(g)) {
      for (Label l : {Label::Hyperbole, Label::Metaphor}) {
        if (!model::uses_label(r, l)) continue;
        for (const auto& s : data) {
          if (!corpus::label_of(s, l)) {
            throw DataError("row '" + s.id + "' lacks the " + std::string(corpus::label_name(l)) +
                            " label required by " + to_string(g));
          }
        }
      }
    }
  }

  ComparisonReport report;
  report.config = cfg;
  report.dataset_size = data.size();
  report.corpus_hash = corpus::corpus_hash(data);
  const auto plan = make_fold_plan(data, cfg.folds, cfg.run_seeds);
  for (std::size_t r = 0; r < plan.runs.size(); ++r)
    for (const auto& w : plan.runs[r].warnings)
      report.warnings.push_back("run " + std::to_string(r + 1) + ": " + w);

  std::vector<detail::Job> jobs;
  for (std::size_t r = 0; r < plan.runs.size(); ++r)
    for (std::size_t f = 0; f < cfg.folds; ++f)
      for (auto g : cfg.regimes)
        for (auto m : model_regimes(g)) jobs.push_back({r, f, g, m});

  const auto results = run_parallel<detail::JobResult>(jobs.size(), cfg.jobs, [&](std::size_t i) {
    return detail::run_job(data, plan.runs[jobs[i].run], jobs[i], cfg);
  });
  for (const auto& jr : results)
    for (const auto& s : jr.scores) report.scores.push_back(s);

  for (auto g : cfg.regimes) {
    for (Label l : {Label::Hyperbole, Label::Metaphor}) {
      std::vector<double> p, rcl, f;
      std::size_t failures = 0;
      for (const auto& s : report.scores) {
        if (s.regime != g || s.task != l) continue;
        if (s.failed) {
          ++failures;
          continue;
        }
        p.push_back(s.prf.precision);
        rcl.push_back(s.prf.recall);
        f.push_back(s.prf.f1);
      }
      TaskSummary ts;
      ts.precision = detail::mean_of(p);
      ts.recall = detail::mean_of(rcl);
      ts.f1 = detail::mean_of(f);
      ts.precision_sd = detail::sd(p, ts.precision);
      ts.recall_sd = detail::sd(rcl, ts.recall);
      ts.f1_sd = detail::sd(f, ts.f1);
      ts.observations = f.size();
      ts.failures = failures;
      report.summary[{g, l}] = ts;
    }
  }

  // Fold-matched F1 comparisons of each multi-task regime against STL (or
  // MTL-F against MTL-E when STL was not requested).
  auto has = [&](RegimeGroup g) {
    return std::find(cfg.regimes.begin(), cfg.regimes.end(), g) != cfg.regimes.end();
  };
  std::vector<std::pair<RegimeGroup, RegimeGroup>> pairs;
  if (has(RegimeGroup::Stl)) {
    for (auto g : {RegimeGroup::MtlE, RegimeGroup::MtlF})
      if (has(g)) pairs.emplace_back(RegimeGroup::Stl, g);
  } else if (has(RegimeGroup::MtlE) && has(RegimeGroup::MtlF)) {
    pairs.emplace_back(RegimeGroup::MtlE, RegimeGroup::MtlF);
  }
  for (auto [base, cand] : pairs) {
    for (Label l : {Label::Hyperbole, Label::Metaphor}) {
      std::vector<double> a, b;
      for (std::size_t r = 0; r < plan.runs.size(); ++r) {
        for (std::size_t f = 0; f < cfg.folds; ++f) {
          auto find = [&](RegimeGroup g) -> const FoldScore* {
            for (const auto& s : report.scores)
              if (s.run == r && s.fold == f && s.regime == g && s.task == l) return &s;
            return nullptr;
          };
          const auto* sa = find(base);
          const auto* sb = find(cand);
          if (sa && sb && !sa->failed && !sb->failed) {
            a.push_back(sa->prf.f1);
            b.push_back(sb->prf.f1);
          }
        }
      }
      if (a.size() < 2) {
        report.warnings.push_back("too few matched folds to test " + to_string(cand) + " vs " +
                                  to_string(base));
        continue;
      }
      report.comparisons.push_back({base, cand, l, stats::t_test(a, b, cfg.variant)});
    }
  }
  return report;
}

/// MTL-E experiments for each lambda in `lambdas`.
inline std::vector<std::pair<double, ComparisonReport>> run_lambda_sweep(
    const Dataset& data, ExperimentConfig cfg, const std::vector<double>& lambdas) {
  cfg.regimes = {RegimeGroup::MtlE};
  std::vector<std::pair<double, ComparisonReport>> out;
  for (double l : lambdas) {
    cfg.train.lambda = l;
    out.emplace_back(l, run_experiment(data, cfg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// rendering

inline std::string format_p(const stats::SignificanceResult& r) {
  if (r.degenerate) return "< 1e-15";
  std::ostringstream os;
  os << std::setprecision(4) << r.p_value;
  return os.str();
}

inline json to_json(const PrfResult& p) {
  return json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
              {"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}, {"tn", p.tn},
              {"no_predicted_positives", p.no_predicted_positives},
              {"no_gold_positives", p.no_gold_positives}, {"f1_undefined", p.f1_undefined}};
}

inline json to_json(const stats::SignificanceResult& r) {
  json j;
  j["t_statistic"] = std::isfinite(r.t_statistic) ? json(r.t_statistic) : json(nullptr);
  j["degrees_of_freedom"] = r.degrees_of_freedom;
  j["p_value"] = r.p_value;
  j["sample_size"] = r.sample_size;
  j["variant"] = stats::to_string(r.variant);
  j["degenerate"] = r.degenerate;
  return j;
}

inline json to_json(const ComparisonReport& rep) {
  json j;
  const auto& c = rep.config;
  json regimes = json::array();
  for (auto g : c.regimes) regimes.push_back(to_string(g));
  j["config"] = {{"folds", c.folds},
                 {"run_seeds", c.run_seeds},
                 {"regimes", regimes},
                 {"d_model", c.encoder.d_model},
                 {"n_heads", c.encoder.n_heads},
                 {"n_layers", c.encoder.n_layers},
                 {"ffn_dim", c.encoder.ffn_dim},
                 {"max_len", c.encoder.max_len},
                 {"dropout", c.encoder.dropout},
                 {"learning_rate", c.train.learning_rate},
                 {"epochs", c.train.epochs},
                 {"batch_size", c.train.batch_size},
                 {"lambda", c.train.lambda},
                 {"threshold", c.threshold},
                 {"variant", stats::to_string(c.variant)}};
  j["dataset_size"] = rep.dataset_size;
  j["corpus_hash"] = corpus::hex64(rep.corpus_hash);
  json table = json::array();
  for (auto g : c.regimes) {
    json row{{"regime", to_string(g)}};
    for (Label l : {Label::Hyperbole, Label::Metaphor}) {
      const auto& s = rep.summary.at({g, l});
      row[std::string(corpus::label_name(l))] = {
          {"precision", s.precision}, {"recall", s.recall},       {"f1", s.f1},
          {"f1_sd", s.f1_sd},         {"observations", s.observations}, {"failures", s.failures}};
    }
    table.push_back(row);
  }
  j["table"] = table;
  json comps = json::array();
  for (const auto& cmp : rep.comparisons) {
    json o = to_json(cmp.result);
    o["baseline"] = to_string(cmp.baseline);
    o["candidate"] = to_string(cmp.candidate);
    o["task"] = std::string(corpus::label_name(cmp.task));
    o["metric"] = "f1";
    comps.push_back(o);
  }
  j["significance"] = comps;
  json folds = json::array();
  for (const auto& s : rep.scores) {
    json o{{"run", s.run + 1}, {"fold", s.fold + 1}, {"regime", to_string(s.regime)},
           {"task", std::string(corpus::label_name(s.task))}};
    if (s.failed) {
      o["error"] = s.error;
    } else {
      o["metrics"] = to_json(s.prf);
    }
    folds.push_back(o);
  }
  j["folds"] = folds;
  j["warnings"] = rep.warnings;
  return j;
}

/// Per-fold CSV: run,fold,regime,task,precision,recall,f1 (1-based run/fold).
inline std::string to_csv(const ComparisonReport& rep) {
  std::ostringstream os;
  os << "run,fold,regime,task,precision,recall,f1\n";
  os << std::setprecision(17);
  for (const auto& s : rep.scores) {
    os << s.run + 1 << ',' << s.fold + 1 << ',' << to_string(s.regime) << ','
       << corpus::label_name(s.task) << ',';
    if (s.failed) {
      os << ",,\n";
    } else {
      os << s.prf.precision << ',' << s.prf.recall << ',' << s.prf.f1 << '\n';
    }
  }
  return os.str();
}

inline std::string significance_line(const Comparison& c) {
  std::ostringstream os;
  os << "t-test (" << stats::to_string(c.result.variant) << ", " << corpus::label_name(c.task)
     << " F1, " << to_string(c.candidate) << " vs " << to_string(c.baseline) << "): t=";
  if (std::isfinite(c.result.t_statistic)) {
    os << std::fixed << std::setprecision(4) << c.result.t_statistic;
  } else {
    os << (c.result.t_statistic > 0 ? "inf" : "-inf");
  }
  os.unsetf(std::ios::floatfield);
  os << " df=" << std::setprecision(6) << c.result.degrees_of_freedom << " p=" << format_p(c.result)
     << " n=" << c.result.sample_size;
  return os.str();
}

/// Aligned plain-text table: regime rows, hyperbole and metaphor P/R/F1 blocks.
inline std::string to_text(const ComparisonReport& rep) {
  std::ostringstream os;
  const auto& c = rep.config;
  os << "Comparison over " << c.folds << "-fold cross-validation x " << c.run_seeds.size()
     << " runs (" << rep.dataset_size << " sentences)\n";
  os << std::left << std::setw(8) << "Regime" << " | " << std::setw(23) << "Hyperbole" << " | "
     << "Metaphor\n";
  os << std::setw(8) << "" << " | " << std::setw(7) << "P" << ' ' << std::setw(7) << "R" << ' '
     << std::setw(7) << "F1" << " | " << std::setw(7) << "P" << ' ' << std::setw(7) << "R" << ' '
     << "F1\n";
  os << std::string(8, '-') << "-+-" << std::string(23, '-') << "-+-" << std::string(23, '-')
     << '\n';
  os << std::fixed << std::setprecision(3);
  for (auto g : c.regimes) {
    const auto& h = rep.summary.at({g, Label::Hyperbole});
    const auto& m = rep.summary.at({g, Label::Metaphor});
    os << std::setw(8) << to_string(g) << " | " << std::setw(7) << h.precision << ' '
       << std::setw(7) << h.recall << ' ' << std::setw(7) << h.f1 << " | " << std::setw(7)
       << m.precision << ' ' << std::setw(7) << m.recall << ' ' << m.f1 << '\n';
  }
  os.unsetf(std::ios::floatfield);
  for (const auto& cmp : rep.comparisons) os << significance_line(cmp) << '\n';
  for (const auto& w : rep.warnings) os << "warning: " << w << '\n';
  return os.str();
}

}  // namespace figmtl::eval
