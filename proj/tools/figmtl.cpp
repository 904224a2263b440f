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

// figmtl command-line tool: train, compare, balance, kappa, attend, stats.

#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "figmtl/cli.hpp"

namespace {

using figmtl::cli::Command;

struct Sub {
  Command command;
  CLI::App* app;
  std::map<std::string, std::unique_ptr<std::string>> values;
};

std::string dashed(std::string s) {
  for (auto& c : s)
    if (c == '_') c = '-';
  return s;
}

const char* description(Command c) {
  switch (c) {
    case Command::Train: return "train one model on a dataset";
    case Command::Compare: return "cross-validated comparison of regimes";
    case Command::Balance: return "downsample the majority class of one label";
    case Command::Kappa: return "inter-annotator agreement from item_id,annotator_id,label CSV";
    case Command::Attend: return "CLS attention salience of a sentence";
    case Command::Stats: return "joint label quadrant counts";
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperbole and metaphor detection with single- and multi-task transformers"};
  app.require_subcommand(1);
  app.fallthrough();

  std::map<std::string, std::unique_ptr<std::string>> global;
  for (auto [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"config", "key = value configuration file (flags override it)"},
           {"seed", "master seed"},
           {"out", "output directory"},
           {"jobs", "worker threads for fold-level parallelism"},
           {"format", "stdout format: json or text"}}) {
    global[name] = std::make_unique<std::string>();
    app.add_option("--" + name, *global[name], help);
  }

  std::vector<Sub> subs;
  for (auto c : {Command::Train, Command::Compare, Command::Balance, Command::Kappa,
                 Command::Attend, Command::Stats}) {
    Sub s{c, app.add_subcommand(figmtl::cli::to_string(c), description(c)), {}};
    auto keys = figmtl::cli::keys_for(c);
    if (c == Command::Train || c == Command::Compare) keys.insert(keys.begin(), "preset");
    for (const auto& k : keys) {
      if (k == "seed") continue;
      s.values[k] = std::make_unique<std::string>();
      std::string names = "--" + k;
      if (dashed(k) != k) names += ",--" + dashed(k);
      const auto help = k == "preset" ? std::string("hypo-stl, hypo-mtle or hypo-mtlf")
                                      : figmtl::cli::key_help(k);
      s.app->add_option(names, *s.values[k], help);
    }
    subs.push_back(std::move(s));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  figmtl::cli::FlagValues flags;
  for (auto& [name, v] : global)
    if (app.count("--" + name)) flags[name] = *v;
  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    for (auto& [name, v] : s.values)
      if (s.app->count("--" + name)) flags[name] = *v;
    return figmtl::cli::execute(s.command, flags, std::cout, std::cerr);
  }
  return 2;
}
