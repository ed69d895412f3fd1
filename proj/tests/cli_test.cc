// Copyright 2026 The privbias Authors
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gmock/gmock.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "privbias/privatizer.h"

namespace privbias {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;
using json = nlohmann::json;

const std::string kCli = PRIVBIAS_CLI;
const std::string kData = PRIVBIAS_TEST_DATA;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("privbias_cli_" + std::string(
                                  ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  int Run(const std::string& args) const {
    const std::string cmd = kCli + " " + args + " 2>" + Path("stderr.txt");
    return WEXITSTATUS(std::system(cmd.c_str()));
  }

  std::string Read(const std::string& name) const {
    std::ifstream in(Path(name), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void Write(const std::string& name, const std::string& text) const {
    std::ofstream(Path(name), std::ios::binary) << text;
  }

  void MakeEmbeddings(size_t n = 400, size_t d = 16) const {
    ASSERT_EQ(Run("synth-embeddings --vocabulary " + std::to_string(n) + " --dim " +
                  std::to_string(d) + " --out " + Path("emb.txt")),
              0);
  }

  void MakeCorpus(size_t docs) const {
    std::ostringstream out;
    for (size_t i = 0; i < docs; ++i) {
      out << json{{"id", i}, {"text", "W" + std::to_string(i % 400) + " w" +
                                          std::to_string((i * 7) % 400) + ", unknown-word w3."}}
                 .dump()
          << "\n";
    }
    Write("corpus.jsonl", out.str());
  }

  fs::path dir_;
};

TEST_F(CliTest, PrivatizeWritesOutputAndManifest) {
  MakeEmbeddings();
  MakeCorpus(20);
  ASSERT_EQ(Run("privatize --embeddings " + Path("emb.txt") + " --epsilon 2 --seed 9 --input " +
                Path("corpus.jsonl") + " --output " + Path("out.jsonl") +
                " --format jsonl --oov marker --parallelism 2"),
            0)
      << Read("stderr.txt");
  auto manifest = json::parse(Read("out.jsonl.manifest.json"));
  EXPECT_EQ(manifest["config"]["epsilon"], "2");
  EXPECT_EQ(manifest["config"]["oov_policy"], "marker");
  EXPECT_EQ(manifest["counts"]["documents"], 20);
  EXPECT_EQ(manifest["counts"]["tokens_perturbed"].get<int>() +
                manifest["counts"]["tokens_oov"].get<int>(),
            manifest["counts"]["tokens_total"].get<int>());
  EXPECT_EQ(manifest["embeddings"]["sha256"], Sha256File(Path("emb.txt")));
  EXPECT_THAT(Read("out.jsonl"), HasSubstr("<oov>"));
}

TEST_F(CliTest, InfiniteBudgetIsIdentityOnTextFormat) {
  MakeEmbeddings();
  Write("in.txt", "w1 w2 , w3 .\nw4 zzz w5\n");
  ASSERT_EQ(Run("privatize --embeddings " + Path("emb.txt") + " --epsilon inf --input " +
                Path("in.txt") + " --output " + Path("out.txt") + " --format txt"),
            0);
  EXPECT_EQ(Read("out.txt"), "w1 w2 , w3 .\nw4 zzz w5\n");
}

TEST_F(CliTest, ParallelismAndExactFlagsKeepBytes) {
  MakeEmbeddings();
  MakeCorpus(100);
  const std::string base = "privatize --embeddings " + Path("emb.txt") +
                           " --epsilon 3 --seed 4 --input " + Path("corpus.jsonl");
  ASSERT_EQ(Run(base + " --parallelism 1 --exact-nn --output " + Path("a.jsonl")), 0);
  ASSERT_EQ(Run(base + " --parallelism 8 --exact-nn --output " + Path("b.jsonl")), 0);
  EXPECT_EQ(Read("a.jsonl"), Read("b.jsonl"));
  EXPECT_TRUE(json::parse(Read("a.jsonl.manifest.json"))["config"]["exact_nn"].get<bool>());
}

TEST_F(CliTest, BadInputsFailWithMessages) {
  MakeEmbeddings(50, 4);
  Write("bad.jsonl", "{\"id\": 1, \"text\": \"w1\"}\n{\"id\": 1, \"text\": \"w2\"}\n");
  EXPECT_NE(Run("privatize --embeddings " + Path("emb.txt") + " --epsilon 1 --input " +
                Path("bad.jsonl") + " --output " + Path("o.jsonl")),
            0);
  EXPECT_THAT(Read("stderr.txt"), HasSubstr("duplicate doc_id 1"));
  EXPECT_NE(Run("privatize --embeddings " + Path("emb.txt") + " --dim 5 --epsilon 1 --input " +
                Path("bad.jsonl") + " --output " + Path("o.jsonl")),
            0);
  EXPECT_THAT(Read("stderr.txt"), HasSubstr(":1"));
  EXPECT_NE(Run("privatize --embeddings " + Path("emb.txt") + " --epsilon -1 --input " +
                Path("bad.jsonl") + " --output " + Path("o.jsonl")),
            0);
}

TEST_F(CliTest, CalibrateJsonLayout) {
  MakeEmbeddings(300, 10);
  ASSERT_EQ(Run("calibrate --embeddings " + Path("emb.txt") +
                " --epsilons 1,inf --sample-size 40 --queries 20 --seed 3 --bins 5 --out " +
                Path("cal.json") + " --csv-prefix " + Path("hist_")),
            0)
      << Read("stderr.txt");
  auto doc = json::parse(Read("cal.json"));
  ASSERT_TRUE(doc.contains("1"));
  ASSERT_TRUE(doc.contains("inf"));
  EXPECT_EQ(doc["1"]["n_w"].size(), 40u);
  EXPECT_EQ(doc["1"]["s_w"].size(), 40u);
  EXPECT_TRUE(doc["1"]["skew_nw"].is_number());
  EXPECT_TRUE(doc["1"]["exact_nn"].get<bool>());
  EXPECT_EQ(doc["1"]["histograms"]["n_w"]["counts"].size(), 5u);
  EXPECT_TRUE(doc["inf"]["skew_nw"].is_null());
  EXPECT_EQ(doc["inf"]["skew_criterion"], "not_evaluable");
  for (const auto& n : doc["inf"]["n_w"]) EXPECT_EQ(n, 20);
  EXPECT_THAT(Read("hist_eps1_nw.csv"), HasSubstr("bin_lo,bin_hi,count"));

  ASSERT_EQ(Run("calibrate --embeddings " + Path("emb.txt") +
                " --epsilons 5 --sample-size 30 --queries 10 --approximate-nn --ef-search 32 --out " +
                Path("approx.json")),
            0);
  EXPECT_FALSE(json::parse(Read("approx.json"))["5"]["exact_nn"].get<bool>());
}

TEST_F(CliTest, BenchWithMockScorerAndBaseline) {
  const std::string data = " --stereoset " + kData + "/stereoset_dev.json --crows " + kData +
                           "/crows_pairs.csv --wikitext " + kData + "/wikitext.txt";
  ASSERT_EQ(Run("bench" + data + " --scorer mock:uniform:1000 --out " + Path("base.json")), 0)
      << Read("stderr.txt");
  auto base = json::parse(Read("base.json"));
  const auto& run = base["runs"][0];
  EXPECT_EQ(run["epsilon"], "inf");
  EXPECT_NEAR(run["pseudo_perplexity"].get<double>(), 1000.0, 1e-6);
  for (const auto& c : run["sections"]["crows_pairs"]) EXPECT_EQ(c["score"], 0.5);
  ASSERT_TRUE(base["reports"].contains("stereoset_intrasentence"));

  Write("table.json", R"({"vocab_size": 1000, "bonus": {"poor": 1.0, "caring": 0.5}})");
  ASSERT_EQ(Run("bench" + data + " --scorer mock:table:" + Path("table.json") +
                " --epsilon-label 10 --baseline-run " + Path("base.json") + " --out " +
                Path("run.md") + " --report md"),
            0)
      << Read("stderr.txt");
  const auto md = Read("run.md");
  EXPECT_THAT(md, HasSubstr("### crows_pairs"));
  EXPECT_THAT(md, HasSubstr("| Epsilon | ∞ | 10 |"));
  EXPECT_THAT(md, HasSubstr("| Occupation | .5000 | 1.0000 (↑"));
  auto record = json::parse(Read("run.md.json"));
  const auto& report = record["reports"]["crows_pairs"];
  EXPECT_EQ(report["baseline_epsilon"], "inf");
  const auto& cat = report["runs"][1]["categories"][0];
  for (const char* key : {"category", "score", "count", "effect_size"}) EXPECT_TRUE(cat.contains(key));

  ASSERT_EQ(Run("report --runs " + Path("base.json") + " " + Path("run.md.json") +
                " --baseline inf --report json --out " + Path("combined.json")),
            0)
      << Read("stderr.txt");
  EXPECT_EQ(json::parse(Read("combined.json"))["runs"].size(), 2u);
}

TEST_F(CliTest, BenchOverChildProcessScorer) {
  ASSERT_EQ(Run("bench --crows " + kData + "/crows_pairs.csv --scorer 'cmd:" + kCli +
                " serve-mock --mock uniform:50' --out " + Path("r.json")),
            0)
      << Read("stderr.txt");
  auto r = json::parse(Read("r.json"));
  EXPECT_EQ(r["runs"][0]["sections"]["crows_pairs"].size(), 4u);
}

TEST_F(CliTest, BenchNeedsData) {
  EXPECT_NE(Run("bench --scorer mock:uniform:10 --out " + Path("x.json")), 0);
  EXPECT_NE(Run("bench --crows " + kData + "/crows_pairs.csv --scorer ftp://x --out " +
                Path("x.json")),
            0);
}

}  // namespace
}  // namespace privbias
