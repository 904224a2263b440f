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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "figmtl/cli.hpp"

namespace {

using namespace figmtl;
using namespace figmtl::cli;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("figmtl-cli-") +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(Command cmd, FlagValues flags) {
    out_.str("");
    err_.str("");
    return execute(cmd, flags, out_, err_);
  }

  FlagValues tiny(const std::string& out) const {
    return {{"synthetic_size", "60"}, {"d_model", "8"},  {"n_heads", "2"},
            {"n_layers", "1"},        {"ffn_dim", "16"}, {"max_len", "16"},
            {"epochs", "1"},          {"out", (dir_ / out).string()}};
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, MissingDatasetIsConfigError) {
  EXPECT_EQ(run(Command::Train, {{"out", (dir_ / "o").string()}}), 2);
  EXPECT_NE(err_.str().find("--data"), std::string::npos) << err_.str();
  EXPECT_EQ(run(Command::Stats, {}), 2);
}

TEST_F(CliTest, ConfigErrorsNameTheField) {
  auto f = tiny("o");
  f["bogus"] = "1";
  EXPECT_EQ(run(Command::Train, f), 2);
  EXPECT_NE(err_.str().find("bogus"), std::string::npos);

  f = tiny("o");
  f["lambda"] = "0.3";
  EXPECT_EQ(run(Command::Train, f), 2);
  EXPECT_NE(err_.str().find("lambda"), std::string::npos);
  f["regime"] = "mtle";
  EXPECT_EQ(run(Command::Train, f), 0) << err_.str();

  f = tiny("o");
  f["epochs"] = "three";
  EXPECT_EQ(run(Command::Train, f), 2);
  EXPECT_NE(err_.str().find("epochs"), std::string::npos);

  f = tiny("o");
  f["n_heads"] = "3";
  EXPECT_EQ(run(Command::Train, f), 2);

  f = tiny("o");
  f["synthetic_metaphor_cues"] = "0";
  EXPECT_EQ(run(Command::Train, f), 2);
  f["synthetic_metaphor_cues"] = std::to_string(corpus::metaphor_vehicles().size() + 1);
  EXPECT_EQ(run(Command::Train, f), 2);

  f = tiny("o");
  f["folds"] = "5";
  EXPECT_EQ(run(Command::Train, f), 2);  // compare-only key
}

TEST_F(CliTest, DataErrorExitsThree) {
  write(dir_ / "bad.jsonl", "{\"text\":\"x\",\"hyperbole\":7}\n");
  auto f = tiny("o");
  f.erase("synthetic_size");
  f["data"] = (dir_ / "bad.jsonl").string();
  EXPECT_EQ(run(Command::Train, f), 3);
  EXPECT_NE(err_.str().find("line 1"), std::string::npos);
  f["data"] = (dir_ / "missing.jsonl").string();
  EXPECT_EQ(run(Command::Stats, {{"data", f["data"]}}), 3);
}

TEST_F(CliTest, DivergenceExitsFour) {
  auto f = tiny("o");
  f["init_std"] = "1e200";
  EXPECT_EQ(run(Command::Train, f), 4);
}

TEST_F(CliTest, TrainManifestRecordsCorpusHashAndReplays) {
  auto f = tiny("a");
  f["seed"] = "17";
  ASSERT_EQ(run(Command::Train, f), 0) << err_.str();
  const auto manifest = slurp(dir_ / "a" / "manifest.cfg");
  corpus::SynthSpec spec;
  const auto expect =
      corpus::hex64(corpus::corpus_hash(corpus::synth_corpus(spec, 0.9, 60, 17)));
  EXPECT_NE(manifest.find("corpus_hash = " + expect), std::string::npos) << manifest;
  EXPECT_EQ(manifest.find("lambda"), std::string::npos);

  ASSERT_EQ(run(Command::Train, {{"config", (dir_ / "a" / "manifest.cfg").string()},
                                 {"out", (dir_ / "b").string()}}),
            0)
      << err_.str();
  for (auto name : {"model.ckpt", "loss_trace.json", "manifest.cfg"})
    EXPECT_EQ(slurp(dir_ / "a" / name), slurp(dir_ / "b" / name)) << name;
}

TEST_F(CliTest, MetaphorCueCountWidensTheInventory) {
  auto f = tiny("a");
  f["synthetic_metaphor_cues"] = "48";
  ASSERT_EQ(run(Command::Train, f), 0) << err_.str();
  ASSERT_EQ(run(Command::Train, tiny("b")), 0);
  // 12 is the default inventory, so the default corpus is unchanged.
  f = tiny("c");
  f["synthetic_metaphor_cues"] = "12";
  ASSERT_EQ(run(Command::Train, f), 0);
  auto hash = [&](const char* d) {
    const auto m = slurp(dir_ / d / "manifest.cfg");
    return m.substr(m.find("corpus_hash = "), 30);
  };
  EXPECT_NE(hash("a"), hash("b"));
  EXPECT_EQ(hash("b"), hash("c"));
  const auto defaults = corpus::SynthSpec{}.metaphor_cues;
  EXPECT_TRUE(std::equal(defaults.begin(), defaults.end(), corpus::metaphor_vehicles().begin()));
}

TEST_F(CliTest, TamperedManifestHashIsDataError) {
  ASSERT_EQ(run(Command::Train, tiny("a")), 0);
  auto m = slurp(dir_ / "a" / "manifest.cfg");
  const auto at = m.find("corpus_hash = ") + 14;
  m[at] = m[at] == 'f' ? 'e' : 'f';
  write(dir_ / "m.cfg", m);
  EXPECT_EQ(run(Command::Train, {{"config", (dir_ / "m.cfg").string()}, {"out", (dir_ / "b").string()}}), 3);
  EXPECT_NE(err_.str().find("corpus hash mismatch"), std::string::npos);
}

TEST_F(CliTest, CompareWritesReportsAndReplaysWithJobs) {
  auto f = tiny("a");
  f["folds"] = "2";
  f["runs"] = "2";
  f["regimes"] = "stl,mtle,mtlf";
  ASSERT_EQ(run(Command::Compare, f), 0) << err_.str();
  const auto text = slurp(dir_ / "a" / "report.txt");
  for (auto r : {"STL ", "MTL-E", "MTL-F"}) EXPECT_NE(text.find(r), std::string::npos) << r;
  EXPECT_NE(out_.str().find("t-test (paired"), std::string::npos);
  auto j = json::parse(slurp(dir_ / "a" / "report.json"));
  EXPECT_EQ(j["table"].size(), 3u);
  EXPECT_EQ(j["significance"].size(), 4u);

  ASSERT_EQ(run(Command::Compare, {{"config", (dir_ / "a" / "manifest.cfg").string()},
                                   {"out", (dir_ / "b").string()},
                                   {"jobs", "3"}}),
            0)
      << err_.str();
  for (auto name : {"report.json", "report.txt", "folds.csv", "manifest.cfg"})
    EXPECT_EQ(slurp(dir_ / "a" / name), slurp(dir_ / "b" / name)) << name;
}

TEST_F(CliTest, StatsOnFourRowFixture) {
  write(dir_ / "four.jsonl",
        "{\"text\":\"a\",\"hyperbole\":1,\"metaphor\":1}\n{\"text\":\"b\",\"hyperbole\":1,\"metaphor\":0}\n"
        "{\"text\":\"c\",\"hyperbole\":0,\"metaphor\":1}\n{\"text\":\"d\",\"hyperbole\":0,\"metaphor\":0}\n");
  const auto before = slurp(dir_ / "four.jsonl");
  ASSERT_EQ(run(Command::Stats, {{"data", (dir_ / "four.jsonl").string()},
                                 {"out", (dir_ / "o").string()},
                                 {"format", "json"}}),
            0)
      << err_.str();
  auto j = json::parse(out_.str());
  EXPECT_EQ(j["quadrants"]["H_M"], 1);
  EXPECT_EQ(j["quadrants"]["H_notM"], 1);
  EXPECT_EQ(j["quadrants"]["notH_M"], 1);
  EXPECT_EQ(j["quadrants"]["notH_notM"], 1);
  EXPECT_EQ(slurp(dir_ / "four.jsonl"), before);
  EXPECT_EQ(run(Command::Stats, {{"data", (dir_ / "four.jsonl").string()}, {"reference", "XYZ"}}), 2);
}

TEST_F(CliTest, KappaIdenticalAnnotators) {
  std::string csv = "item_id,annotator_id,label\n";
  for (int i = 0; i < 6; ++i)
    for (auto a : {"A", "B", "C"}) csv += "s" + std::to_string(i) + "," + a + "," + std::to_string(i % 2) + "\n";
  write(dir_ / "ann.csv", csv);
  ASSERT_EQ(run(Command::Kappa, {{"data", (dir_ / "ann.csv").string()}, {"out", (dir_ / "o").string()}}), 0)
      << err_.str();
  auto j = json::parse(slurp(dir_ / "o" / "agreement.json"));
  for (const auto& row : j["cohen_matrix"])
    for (const auto& v : row) EXPECT_EQ(v.get<double>(), 1.0);
  EXPECT_EQ(j["fleiss"]["kappa"].get<double>(), 1.0);
  EXPECT_EQ(j["fleiss"]["band"], "almost perfect");
}

TEST_F(CliTest, AttendWithZeroInitCheckpointIsUniform) {
  auto f = tiny("m");
  f["init_std"] = "0";
  f["learning_rate"] = "0";
  ASSERT_EQ(run(Command::Train, f), 0) << err_.str();
  ASSERT_EQ(run(Command::Attend, {{"checkpoint", (dir_ / "m" / "model.ckpt").string()},
                                  {"sentence", "My sister is a volcano."},
                                  {"out", (dir_ / "o").string()}}),
            0)
      << err_.str();
  auto j = json::parse(slurp(dir_ / "o" / "salience.json"));
  const auto& w = j["weights"];
  ASSERT_EQ(w.size(), 7u);
  for (const auto& v : w) EXPECT_NEAR(v.get<double>(), 1.0 / 7.0, 1e-12);
  EXPECT_NE(slurp(dir_ / "o" / "salience.html").find("<html>"), std::string::npos);
  EXPECT_EQ(run(Command::Attend, {{"checkpoint", (dir_ / "m" / "model.ckpt").string()}}), 2);
}

TEST_F(CliTest, BalanceLeavesInputUntouched) {
  std::string rows;
  for (int i = 0; i < 40; ++i)
    rows += "{\"text\":\"t" + std::to_string(i) + "\",\"hyperbole\":" + (i < 5 ? "1" : "0") +
            ",\"metaphor\":0}\n";
  write(dir_ / "in.jsonl", rows);
  ASSERT_EQ(run(Command::Balance, {{"data", (dir_ / "in.jsonl").string()},
                                   {"ratio", "2"},
                                   {"out", (dir_ / "o").string()}}),
            0)
      << err_.str();
  EXPECT_EQ(slurp(dir_ / "in.jsonl"), rows);
  auto out = corpus::load_strict(dir_ / "o" / "balanced.jsonl");
  EXPECT_EQ(out.size(), 15u);
  EXPECT_EQ(run(Command::Balance, {{"data", (dir_ / "in.jsonl").string()}, {"ratio", "0.5"}}), 2);
}

TEST(Resolve, PresetsFileAndFlagPrecedence) {
  auto c = resolve(Command::Train, {{"preset", "hypo-mtle"}, {"synthetic_size", "10"}});
  EXPECT_EQ(c.regime, model::Regime::MtlE);
  EXPECT_EQ(c.train.learning_rate, 1e-5);
  EXPECT_EQ(c.train.epochs, 20u);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.train.lambda, 0.5);

  auto s = resolve(Command::Compare, {{"preset", "hypo-mtlf"}, {"synthetic_size", "10"}});
  EXPECT_EQ(s.regimes, std::vector<eval::RegimeGroup>{eval::RegimeGroup::MtlF});
  EXPECT_EQ(s.train.epochs, 10u);

  const auto path = fs::temp_directory_path() / "figmtl-resolve.cfg";
  write(path, "# comment\nepochs = 7\nlearning_rate = 0.01  # trailing\nsynthetic_size = 10\n");
  auto f = resolve(Command::Train, {{"config", path.string()}, {"epochs", "9"}});
  EXPECT_EQ(f.train.epochs, 9u);
  EXPECT_EQ(f.train.learning_rate, 0.01);
  write(path, "epochs 7\n");
  EXPECT_THROW(resolve(Command::Train, {{"config", path.string()}}), ConfigError);
  write(path, "command = compare\nsynthetic_size = 10\n");
  EXPECT_THROW(resolve(Command::Train, {{"config", path.string()}}), ConfigError);
  fs::remove(path);
  EXPECT_THROW(resolve(Command::Train, {{"preset", "hypo-large"}, {"synthetic_size", "1"}}), ConfigError);
  EXPECT_THROW(resolve(Command::Stats, {{"preset", "hypo-stl"}, {"synthetic_size", "1"}}), ConfigError);
}

TEST(Manifest, ShortestRoundTripNumbers) {
  auto c = resolve(Command::Train, {{"synthetic_size", "10"}, {"learning_rate", "0.1"}});
  const auto m = manifest_text(c);
  EXPECT_NE(m.find("learning_rate = 0.1\n"), std::string::npos) << m;
  EXPECT_NE(m.find("command = train\n"), std::string::npos);
  EXPECT_EQ(m.find("\nout ="), std::string::npos);
}

#ifdef FIGMTL_CLI_PATH
int shell(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(FIGMTL_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string buf;
  char chunk[256];
  while (std::fgets(chunk, sizeof chunk, p)) buf += chunk;
  const int status = pclose(p);
  if (output) *output = buf;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  std::string msg;
  EXPECT_EQ(shell("train", &msg), 2);
  EXPECT_NE(msg.find("missing dataset"), std::string::npos) << msg;
  EXPECT_EQ(shell("--help"), 0);
  EXPECT_EQ(shell("nonsense"), 2);
  EXPECT_EQ(shell("stats --data /nonexistent.jsonl"), 3);
  EXPECT_EQ(shell("train --synthetic-size 10 --lambda 0.2"), 2);
}
#endif

}  // namespace
