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

// Command implementations behind the figmtl executable. Configuration is a
// flat key=value map assembled from a preset, a config file and command-line
// flags (later sources win). Every command writes a manifest.cfg that replays
// it when passed back through --config.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmtl/agreement.hpp"
#include "figmtl/attnprobe.hpp"
#include "figmtl/checkpoint.hpp"
#include "figmtl/corpus.hpp"
#include "figmtl/errors.hpp"
#include "figmtl/evalharness.hpp"
#include "figmtl/model.hpp"
#include "figmtl/rng.hpp"

namespace figmtl::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

enum class Command { Train, Compare, Balance, Kappa, Attend, Stats };

inline std::string to_string(Command c) {
  switch (c) {
    case Command::Train: return "train";
    case Command::Compare: return "compare";
    case Command::Balance: return "balance";
    case Command::Kappa: return "kappa";
    case Command::Attend: return "attend";
    case Command::Stats: return "stats";
  }
  return "?";
}

inline Command parse_command(const std::string& s) {
  for (auto c : {Command::Train, Command::Compare, Command::Balance, Command::Kappa,
                 Command::Attend, Command::Stats})
    if (to_string(c) == s) return c;
  throw ConfigError("unknown command '" + s + "'");
}

// ---------------------------------------------------------------------------
// configuration

struct RunConfig {
  Command command = Command::Train;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::size_t jobs = 1;
  std::string format = "text";

  // data
  std::string data;
  std::size_t synthetic_size = 0;
  double synthetic_rho = 0.9;
  double synthetic_hyperbole_cue_rate = 0.85;
  double synthetic_metaphor_cue_rate = 0.85;
  std::size_t synthetic_metaphor_cues = 12;
  std::optional<std::string> corpus_hash;

  // model and training
  model::Regime regime = model::Regime::MtlF;
  std::vector<eval::RegimeGroup> regimes = {eval::RegimeGroup::Stl, eval::RegimeGroup::MtlF};
  model::EncoderConfig encoder;
  model::TrainConfig train;
  double init_std = 0.02;
  std::size_t vocab_max = 0;
  double threshold = 0.5;

  // compare
  std::size_t folds = 10;
  std::size_t runs = 3;
  stats::TestVariant variant = stats::TestVariant::Paired;

  // balance
  corpus::Label minority = corpus::Label::Hyperbole;
  double ratio = 1.0;

  // attend
  std::string checkpoint;
  std::string checkpoint_b;
  std::string sentence;
  std::string id;
  bool raw = false;

  // stats
  std::string reference;

  /// Keys set by a config file or flag (not by defaults or a preset).
  std::set<std::string> explicit_keys;
};

namespace detail {

inline std::string trim(std::string_view s) { return corpus::detail::trim(s); }

/// Shortest %g form that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct KeySpec {
  std::string name;
  std::set<Command> commands;
  Setter set;
  Getter get;
  std::string help;
};

inline const std::set<Command> kModelCommands = {Command::Train, Command::Compare};
inline const std::set<Command> kDataCommands = {Command::Train, Command::Compare,
                                                Command::Balance, Command::Stats};

inline std::string regimes_str(const std::vector<eval::RegimeGroup>& gs) {
  std::string out;
  for (auto g : gs) {
    if (!out.empty()) out += ',';
    auto s = eval::to_string(g);
    s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out += s;
  }
  return out;
}

// clang-format off
inline const std::vector<KeySpec>& key_table() {
  using C = Command;
  auto sz = [](std::size_t RunConfig::*f) -> std::pair<Setter, Getter> {
    return {[f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = to_u64(k, v); },
            [f](const RunConfig& c) { return std::to_string(c.*f); }};
  };
  auto dbl = [](double RunConfig::*f) -> std::pair<Setter, Getter> {
    return {[f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = to_double(k, v); },
            [f](const RunConfig& c) { return fmt_double(c.*f); }};
  };
  auto str = [](std::string RunConfig::*f) -> std::pair<Setter, Getter> {
    return {[f](RunConfig& c, const std::string&, const std::string& v) { c.*f = v; },
            [f](const RunConfig& c) { return c.*f; }};
  };
  auto enc_sz = [](std::size_t model::EncoderConfig::*f) -> std::pair<Setter, Getter> {
    return {[f](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.*f = to_u64(k, v); },
            [f](const RunConfig& c) { return std::to_string(c.encoder.*f); }};
  };
  auto mk = [](std::string name, std::set<Command> cmds, std::pair<Setter, Getter> sg, std::string help) {
    return KeySpec{std::move(name), std::move(cmds), std::move(sg.first), std::move(sg.second), std::move(help)};
  };
  static const std::vector<KeySpec> table = {
      mk("seed", {C::Train, C::Compare, C::Balance, C::Kappa, C::Attend, C::Stats},
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
         "master seed"),
      mk("data", {C::Train, C::Compare, C::Balance, C::Kappa, C::Stats}, str(&RunConfig::data),
         "dataset path (.jsonl or .csv; annotation csv for kappa)"),
      mk("synthetic_size", kDataCommands, sz(&RunConfig::synthetic_size),
         "generate a synthetic corpus of this size instead of reading --data"),
      mk("synthetic_rho", kDataCommands, dbl(&RunConfig::synthetic_rho), "synthetic label correlation"),
      mk("synthetic_hyperbole_cue_rate", kDataCommands, dbl(&RunConfig::synthetic_hyperbole_cue_rate),
         "probability a hyperbole-positive synthetic sentence shows its cue"),
      mk("synthetic_metaphor_cue_rate", kDataCommands, dbl(&RunConfig::synthetic_metaphor_cue_rate),
         "probability a metaphor-positive synthetic sentence shows its cue"),
      mk("synthetic_metaphor_cues", kDataCommands, sz(&RunConfig::synthetic_metaphor_cues),
         "number of distinct synthetic metaphor cues"),
      mk("corpus_hash", kDataCommands,
         {[](RunConfig& c, const std::string&, const std::string& v) { c.corpus_hash = v; },
          [](const RunConfig& c) { return c.corpus_hash.value_or(""); }},
         "expected corpus hash (checked before any compute)"),
      mk("regime", {C::Train},
         {[](RunConfig& c, const std::string&, const std::string& v) { c.regime = model::parse_regime(v); },
          [](const RunConfig& c) { return model::to_string(c.regime); }},
         "stl-hyperbole, stl-metaphor, mtle or mtlf"),
      mk("regimes", {C::Compare},
         {[](RunConfig& c, const std::string& k, const std::string& v) {
            c.regimes.clear();
            for (auto& s : split_list(v)) {
              const auto g = eval::parse_regime_group(s);
              if (std::find(c.regimes.begin(), c.regimes.end(), g) != c.regimes.end())
                throw ConfigError(k + ": regime '" + s + "' listed twice");
              c.regimes.push_back(g);
            }
            if (c.regimes.empty()) throw ConfigError(k + ": no regime given");
          },
          [](const RunConfig& c) { return regimes_str(c.regimes); }},
         "comma-separated subset of stl,mtle,mtlf"),
      mk("d_model", kModelCommands, enc_sz(&model::EncoderConfig::d_model), "encoder width"),
      mk("n_heads", kModelCommands, enc_sz(&model::EncoderConfig::n_heads), "attention heads"),
      mk("n_layers", kModelCommands, enc_sz(&model::EncoderConfig::n_layers), "encoder layers"),
      mk("ffn_dim", kModelCommands, enc_sz(&model::EncoderConfig::ffn_dim), "feed-forward width"),
      mk("max_len", kModelCommands, enc_sz(&model::EncoderConfig::max_len), "tokens per sentence including CLS"),
      mk("dropout", kModelCommands,
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.dropout = to_double(k, v); },
          [](const RunConfig& c) { return fmt_double(c.encoder.dropout); }},
         "dropout rate"),
      mk("init_std", kModelCommands, dbl(&RunConfig::init_std), "initial weight standard deviation"),
      mk("vocab_max", kModelCommands, sz(&RunConfig::vocab_max), "vocabulary cap (0 = unlimited)"),
      mk("learning_rate", kModelCommands,
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.learning_rate = to_double(k, v); },
          [](const RunConfig& c) { return fmt_double(c.train.learning_rate); }},
         "Adam learning rate"),
      mk("epochs", kModelCommands,
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_u64(k, v); },
          [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
         "training epochs"),
      mk("batch_size", kModelCommands,
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_u64(k, v); },
          [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
         "minibatch size"),
      mk("lambda", kModelCommands,
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.lambda = to_double(k, v); },
          [](const RunConfig& c) { return fmt_double(c.train.lambda); }},
         "hyperbole loss weight (mtle only)"),
      mk("mean_over_labels", kModelCommands,
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.mean_over_labels = to_bool(k, v); },
          [](const RunConfig& c) { return std::string(c.train.mean_over_labels ? "true" : "false"); }},
         "average the mtlf loss over labels as well as sentences"),
      mk("threshold", {C::Compare}, dbl(&RunConfig::threshold), "mtlf decision threshold"),
      mk("folds", {C::Compare}, sz(&RunConfig::folds), "cross-validation folds"),
      mk("runs", {C::Compare}, sz(&RunConfig::runs), "independent runs"),
      mk("variant", {C::Compare},
         {[](RunConfig& c, const std::string&, const std::string& v) { c.variant = stats::parse_variant(v); },
          [](const RunConfig& c) { return stats::to_string(c.variant); }},
         "t-test variant: paired or welch"),
      mk("minority", {C::Balance},
         {[](RunConfig& c, const std::string& k, const std::string& v) {
            if (v == "hyperbole") c.minority = corpus::Label::Hyperbole;
            else if (v == "metaphor") c.minority = corpus::Label::Metaphor;
            else throw ConfigError(k + ": expected hyperbole or metaphor, got '" + v + "'");
          },
          [](const RunConfig& c) { return std::string(corpus::label_name(c.minority)); }},
         "label whose positives are kept"),
      mk("ratio", {C::Balance},
         {[](RunConfig& c, const std::string& k, const std::string& v) {
            if (v == "trofi") c.ratio = corpus::kTroFiBalanceRatio;
            else if (v == "lcc") c.ratio = corpus::kLccBalanceRatio;
            else c.ratio = to_double(k, v);
          },
          [](const RunConfig& c) { return fmt_double(c.ratio); }},
         "max negatives per positive, or the trofi / lcc preset"),
      mk("checkpoint", {C::Attend}, str(&RunConfig::checkpoint), "checkpoint to probe"),
      mk("checkpoint_b", {C::Attend}, str(&RunConfig::checkpoint_b), "second checkpoint to compare against"),
      mk("sentence", {C::Attend}, str(&RunConfig::sentence), "sentence to probe"),
      mk("id", {C::Attend}, str(&RunConfig::id), "sentence id for the salience dump"),
      mk("raw", {C::Attend},
         {[](RunConfig& c, const std::string& k, const std::string& v) { c.raw = to_bool(k, v); },
          [](const RunConfig& c) { return std::string(c.raw ? "true" : "false"); }},
         "skip pad masking and renormalization"),
      mk("reference", {C::Stats}, str(&RunConfig::reference),
         "published dataset to check against (HYPO, HYPO-L, TroFi, LCC)"),
  };
  return table;
}
// clang-format on

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : key_table())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace detail

/// Keys accepted by a command, in manifest order.
inline std::vector<std::string> keys_for(Command c) {
  std::vector<std::string> out;
  for (const auto& k : detail::key_table())
    if (k.commands.count(c)) out.push_back(k.name);
  return out;
}

inline std::string key_help(const std::string& key) {
  const auto* k = detail::find_key(key);
  return k ? k->help : std::string{};
}

/// Parses "key = value" lines; '#' starts a comment. Keys are not validated here.
inline std::vector<std::pair<std::string, std::string>> parse_kv(std::string_view text,
                                                                 const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return out;
}

struct Preset {
  std::string name;
  std::vector<std::pair<std::string, std::string>> values;
};

/// Published fine-tuning hyperparameters, meant for a pretrained encoder plugged
/// in behind the encoder seam. The desk encoder trains with the library defaults.
inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> p = {
      {"hypo-stl", {{"learning_rate", "1e-4"}, {"epochs", "5"}, {"batch_size", "16"}}},
      {"hypo-mtle",
       {{"learning_rate", "1e-5"}, {"epochs", "20"}, {"batch_size", "32"}, {"lambda", "0.5"}}},
      {"hypo-mtlf", {{"learning_rate", "1e-5"}, {"epochs", "10"}, {"batch_size", "16"}}},
  };
  return p;
}

inline std::vector<std::pair<std::string, std::string>> preset_values(const std::string& name,
                                                                      Command cmd) {
  for (const auto& p : presets()) {
    if (p.name != name) continue;
    auto v = p.values;
    if (cmd == Command::Train) {
      v.emplace_back("regime", name == "hypo-stl"    ? "stl-hyperbole"
                               : name == "hypo-mtle" ? "mtle"
                                                     : "mtlf");
    } else {
      v.emplace_back("regimes", name == "hypo-stl" ? "stl" : name == "hypo-mtle" ? "mtle" : "mtlf");
    }
    return v;
  }
  throw ConfigError("preset: unknown preset '" + name + "' (hypo-stl, hypo-mtle, hypo-mtlf)");
}

/// Values gathered from the command line. "config", "preset", "out", "jobs" and
/// "format" are handled here; every other key goes through the key table.
using FlagValues = std::map<std::string, std::string>;

inline bool uses_mtle(const RunConfig& c) {
  if (c.command == Command::Train) return c.regime == model::Regime::MtlE;
  return std::find(c.regimes.begin(), c.regimes.end(), eval::RegimeGroup::MtlE) != c.regimes.end();
}

inline void validate(const RunConfig& c) {
  if (c.jobs == 0) throw ConfigError("jobs: must be positive");
  if (c.format != "text" && c.format != "json") {
    throw ConfigError("format: expected json or text, got '" + c.format + "'");
  }
  const bool model_cmd = c.command == Command::Train || c.command == Command::Compare;
  const bool data_cmd = detail::kDataCommands.count(c.command) > 0;
  if (data_cmd) {
    if (c.data.empty() && c.synthetic_size == 0) {
      throw ConfigError("missing dataset: pass --data <path> or --synthetic_size <n>");
    }
    if (!c.data.empty() && c.synthetic_size != 0) {
      throw ConfigError("data and synthetic_size are mutually exclusive");
    }
    if (c.synthetic_size) {
      if (!(c.synthetic_rho >= 0.0 && c.synthetic_rho <= 1.0))
        throw ConfigError("synthetic_rho: must lie in [0, 1]");
      for (double r : {c.synthetic_hyperbole_cue_rate, c.synthetic_metaphor_cue_rate})
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("synthetic cue rates must lie in [0, 1]");
      const auto most = corpus::metaphor_vehicles().size();
      if (c.synthetic_metaphor_cues == 0 || c.synthetic_metaphor_cues > most)
        throw ConfigError("synthetic_metaphor_cues: must lie in [1, " + std::to_string(most) + "]");
    }
  }
  if (model_cmd) {
    auto enc = c.encoder;
    enc.vocab_size = 1;
    enc.validate();
    c.train.validate();
    if (!(c.init_std >= 0.0)) throw ConfigError("init_std: must be non-negative");
    if (c.explicit_keys.count("lambda") && !uses_mtle(c)) {
      throw ConfigError("lambda: only valid when the mtle regime is used");
    }
  }
  if (c.command == Command::Compare) {
    if (c.folds < 2) throw ConfigError("folds: must be at least 2");
    if (c.runs == 0) throw ConfigError("runs: must be positive");
    model::check_threshold(c.threshold);
  }
  if (c.command == Command::Balance && !(c.ratio >= 1.0)) {
    throw ConfigError("ratio: must be >= 1");
  }
  if (c.command == Command::Kappa && c.data.empty()) {
    throw ConfigError("missing --data <path> for kappa");
  }
  if (c.command == Command::Attend) {
    if (c.checkpoint.empty()) throw ConfigError("missing --checkpoint <path>");
    if (c.sentence.empty()) throw ConfigError("missing --sentence <text>");
  }
  if (c.command == Command::Stats && !c.reference.empty() && !corpus::find_reference(c.reference)) {
    throw ConfigError("reference: unknown dataset '" + c.reference + "'");
  }
}

/// Defaults, then the preset, then the config file, then flags.
inline RunConfig resolve(Command cmd, const FlagValues& flags) {
  RunConfig c;
  c.command = cmd;
  if (cmd == Command::Kappa) c.data.clear();
  std::vector<std::pair<std::string, std::string>> file_values;
  if (auto it = flags.find("config"); it != flags.end()) {
    std::ifstream in(it->second);
    if (!in) throw ConfigError("config: cannot read '" + it->second + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    file_values = parse_kv(ss.str(), it->second);
  }
  std::string preset;
  for (auto& [k, v] : file_values)
    if (k == "preset") preset = v;
  if (auto it = flags.find("preset"); it != flags.end()) preset = it->second;

  auto apply = [&](const std::string& key, const std::string& value, bool is_explicit) {
    if (key == "preset") return;
    if (key == "command") {
      if (value != to_string(cmd)) {
        throw ConfigError("config was written for '" + value + "', not '" + to_string(cmd) + "'");
      }
      return;
    }
    if (key == "out") {
      c.out = value;
      return;
    }
    if (key == "format") {
      c.format = value;
      return;
    }
    if (key == "jobs") {
      c.jobs = detail::to_u64(key, value);
      return;
    }
    const auto* spec = detail::find_key(key);
    if (!spec) throw ConfigError("unknown configuration key '" + key + "'");
    if (!spec->commands.count(cmd)) {
      throw ConfigError("key '" + key + "' does not apply to the " + to_string(cmd) + " command");
    }
    spec->set(c, key, value);
    if (is_explicit) c.explicit_keys.insert(key);
  };
  if (!preset.empty()) {
    if (cmd != Command::Train && cmd != Command::Compare) {
      throw ConfigError("preset: only train and compare accept presets");
    }
    for (auto& [k, v] : preset_values(preset, cmd)) apply(k, v, false);
  }
  for (auto& [k, v] : file_values) apply(k, v, true);
  for (auto& [k, v] : flags) {
    if (k == "config" || k == "preset") continue;
    apply(k, v, true);
  }
  validate(c);
  return c;
}

/// key = value lines for every key of the command plus the command itself.
/// out, jobs and format are left out: they do not change any output file.
inline std::string manifest_text(const RunConfig& c) {
  std::ostringstream os;
  os << "# figmtl run manifest; replay with: figmtl " << to_string(c.command)
     << " --config <this file> --out <dir>\n";
  os << "command = " << to_string(c.command) << '\n';
  for (const auto& k : detail::key_table()) {
    if (!k.commands.count(c.command)) continue;
    if (k.name == "lambda" && !uses_mtle(c)) continue;
    const auto v = k.get(c);
    if (v.empty()) continue;
    os << k.name << " = " << v << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// commands

namespace detail {

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("failed writing " + path.string());
}

inline fs::path prepare_out(const RunConfig& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("out: cannot create directory '" + c.out + "': " + ec.message());
  return dir;
}

/// Loads or generates the dataset and verifies corpus_hash, filling it in
/// when absent.
inline corpus::Dataset dataset(RunConfig& c) {
  corpus::Dataset d;
  if (c.synthetic_size) {
    corpus::SynthSpec spec;
    spec.hyperbole_cue_rate = c.synthetic_hyperbole_cue_rate;
    spec.metaphor_cue_rate = c.synthetic_metaphor_cue_rate;
    const auto& vehicles = corpus::metaphor_vehicles();
    spec.metaphor_cues.assign(vehicles.begin(), vehicles.begin() + c.synthetic_metaphor_cues);
    d = corpus::synth_corpus(spec, c.synthetic_rho, c.synthetic_size, c.seed);
  } else {
    d = corpus::load_strict(c.data);
  }
  const auto h = corpus::hex64(corpus::corpus_hash(d));
  if (c.corpus_hash && *c.corpus_hash != h) {
    throw DataError("corpus hash mismatch: manifest has " + *c.corpus_hash + ", data hashes to " + h);
  }
  c.corpus_hash = h;
  return d;
}

inline void emit(std::ostream& out, const RunConfig& c, const json& j, const std::string& text) {
  if (c.format == "json") {
    out << j.dump(2) << '\n';
  } else {
    out << text;
  }
}

}  // namespace detail

/// Trains one model on the whole dataset.
/// Writes model.ckpt, loss_trace.json and manifest.cfg.
inline int cmd_train(RunConfig c, std::ostream& out) {
  auto data = detail::dataset(c);
  const auto dir = detail::prepare_out(c);
  const auto vocab = corpus::Vocabulary::build(data, c.vocab_max);
  auto enc = c.encoder;
  enc.vocab_size = vocab.size();
  auto params = model::init_params(enc, c.regime, c.seed, c.init_std);
  auto tcfg = c.train;
  tcfg.seed = c.seed;
  const auto examples = model::make_examples(data, vocab, enc.max_len);
  const auto trace = model::train(params, examples, tcfg);

  checkpoint::Checkpoint ck{params, vocab, json{{"corpus_hash", *c.corpus_hash}}};
  checkpoint::save(dir / "model.ckpt", ck);
  json tj{{"regime", model::to_string(c.regime)},
          {"epochs", c.train.epochs},
          {"examples", data.size()},
          {"epoch_loss", trace.epoch_loss}};
  detail::write_file(dir / "loss_trace.json", tj.dump(2) + "\n");
  detail::write_file(dir / "manifest.cfg", manifest_text(c));

  json summary{{"checkpoint", (dir / "model.ckpt").string()},
               {"corpus_hash", *c.corpus_hash},
               {"parameters", params.parameter_count()},
               {"final_loss", trace.epoch_loss.back()}};
  std::ostringstream text;
  text << "trained " << model::to_string(c.regime) << " on " << data.size() << " sentences, "
       << params.parameter_count() << " parameters\n";
  for (std::size_t e = 0; e < trace.epoch_loss.size(); ++e)
    text << "epoch " << e + 1 << " loss " << detail::fmt_double(trace.epoch_loss[e]) << '\n';
  text << "wrote " << (dir / "model.ckpt").string() << '\n';
  detail::emit(out, c, summary, text.str());
  return 0;
}

inline eval::ExperimentConfig experiment_config(const RunConfig& c) {
  eval::ExperimentConfig e;
  e.folds = c.folds;
  e.run_seeds.clear();
  for (std::size_t r = 0; r < c.runs; ++r) e.run_seeds.push_back(derive_seed(c.seed, "run", {r}));
  e.regimes = c.regimes;
  e.encoder = c.encoder;
  e.train = c.train;
  e.init_std = c.init_std;
  e.threshold = c.threshold;
  e.vocab_max = c.vocab_max;
  e.jobs = c.jobs;
  e.variant = c.variant;
  return e;
}

/// Cross-validated comparison. Writes report.json, report.txt, folds.csv and
/// manifest.cfg; prints the table and significance lines.
inline int cmd_compare(RunConfig c, std::ostream& out) {
  auto data = detail::dataset(c);
  const auto dir = detail::prepare_out(c);
  const auto report = eval::run_experiment(data, experiment_config(c));
  const auto text = eval::to_text(report);
  const auto j = eval::to_json(report);
  detail::write_file(dir / "report.json", j.dump(2) + "\n");
  detail::write_file(dir / "report.txt", text);
  detail::write_file(dir / "folds.csv", eval::to_csv(report));
  detail::write_file(dir / "manifest.cfg", manifest_text(c));
  json summary{{"table", j["table"]}, {"significance", j["significance"]}};
  detail::emit(out, c, summary, text);
  return 0;
}

/// Downsamples negatives of the minority label. Writes balanced.jsonl.
inline int cmd_balance(RunConfig c, std::ostream& out) {
  auto data = detail::dataset(c);
  const auto dir = detail::prepare_out(c);
  const auto balanced = corpus::balance(data, c.minority, c.ratio, derive_seed(c.seed, "balance"));
  corpus::save(dir / "balanced.jsonl", balanced, corpus::Format::Jsonl);
  detail::write_file(dir / "manifest.cfg", manifest_text(c));
  const auto q = corpus::quadrant_stats(balanced);
  json j{{"input_rows", data.size()}, {"output_rows", balanced.size()},
         {"stats", corpus::stats_report(q)}};
  std::ostringstream text;
  text << "kept " << balanced.size() << " of " << data.size() << " rows; wrote "
       << (dir / "balanced.jsonl").string() << '\n';
  detail::emit(out, c, j, text.str());
  return 0;
}

/// Pairwise Cohen and Fleiss agreement. Writes agreement.json and agreement.txt.
inline int cmd_kappa(RunConfig c, std::ostream& out) {
  const auto table = agreement::load_table(c.data);
  const auto dir = detail::prepare_out(c);
  const auto rep = agreement::report(table);
  const auto j = agreement::to_json(rep);
  const auto text = agreement::to_text(rep);
  detail::write_file(dir / "agreement.json", j.dump(2) + "\n");
  detail::write_file(dir / "agreement.txt", text);
  detail::write_file(dir / "manifest.cfg", manifest_text(c));
  detail::emit(out, c, j, text);
  return 0;
}

/// CLS salience for one sentence, optionally against a second checkpoint.
/// Writes salience.json, salience.txt and salience.html.
inline int cmd_attend(RunConfig c, std::ostream& out) {
  const auto a = checkpoint::load(c.checkpoint);
  const auto dir = detail::prepare_out(c);
  attnprobe::SalienceOptions opts;
  opts.raw = c.raw;
  const auto id = c.id.empty() ? std::string("sentence") : c.id;
  const auto ma = attnprobe::cls_salience(a.params, a.vocab, c.sentence, id, opts);
  json j;
  std::string text, html;
  if (!c.checkpoint_b.empty()) {
    const auto b = checkpoint::load(c.checkpoint_b);
    const auto mb = attnprobe::cls_salience(b.params, b.vocab, c.sentence, id, opts);
    const auto cmp = attnprobe::compare_salience(ma, mb);
    j = attnprobe::to_json(cmp);
    text = attnprobe::heat_strip(cmp);
    html = attnprobe::html_fragment(cmp);
  } else {
    j = attnprobe::to_json(ma);
    text = attnprobe::heat_strip(ma);
    html = attnprobe::html_fragment(ma);
  }
  detail::write_file(dir / "salience.json", j.dump(2) + "\n");
  detail::write_file(dir / "salience.txt", text);
  detail::write_file(dir / "salience.html", attnprobe::html_report({html}));
  detail::write_file(dir / "manifest.cfg", manifest_text(c));
  detail::emit(out, c, j, text);
  return 0;
}

/// Joint label quadrant counts. Writes stats.json.
inline int cmd_stats(RunConfig c, std::ostream& out) {
  auto data = detail::dataset(c);
  const auto dir = detail::prepare_out(c);
  const auto q = corpus::quadrant_stats(data);
  std::optional<corpus::ReferenceCheck> check;
  if (!c.reference.empty()) check = corpus::check_reference(q, *corpus::find_reference(c.reference));
  const auto j = corpus::stats_report(q, check ? &*check : nullptr);
  detail::write_file(dir / "stats.json", j.dump(2) + "\n");
  detail::write_file(dir / "manifest.cfg", manifest_text(c));
  std::ostringstream text;
  text << "          M     notM\n";
  text << "H     " << std::setw(5) << q.h_m << "  " << std::setw(5) << q.h_nm << '\n';
  text << "notH  " << std::setw(5) << q.nh_m << "  " << std::setw(5) << q.nh_nm << '\n';
  text << "total " << q.total << '\n';
  if (check) {
    text << c.reference << ": " << (check->quadrants_match ? "quadrants match" : "MISMATCH") << '\n';
    for (const auto& m : check->mismatches) text << "  " << m << '\n';
    for (const auto& w : check->warnings) text << "warning: " << w << '\n';
  }
  detail::emit(out, c, j, text.str());
  return 0;
}

inline int run_command(const RunConfig& c, std::ostream& out) {
  switch (c.command) {
    case Command::Train: return cmd_train(c, out);
    case Command::Compare: return cmd_compare(c, out);
    case Command::Balance: return cmd_balance(c, out);
    case Command::Kappa: return cmd_kappa(c, out);
    case Command::Attend: return cmd_attend(c, out);
    case Command::Stats: return cmd_stats(c, out);
  }
  return 1;
}

/// Resolves the configuration and runs the command. Library errors become
/// their exit codes with a one-line message on `err`.
inline int execute(Command cmd, const FlagValues& flags, std::ostream& out, std::ostream& err) {
  try {
    return run_command(resolve(cmd, flags), out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace figmtl::cli
