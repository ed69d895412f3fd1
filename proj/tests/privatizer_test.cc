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

#include "privbias/privatizer.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "privbias/errors.h"
#include "privbias/synthetic.h"

namespace privbias {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;

using Tokens = std::vector<std::string>;

TEST(TokenizeTest, LeadingAndTrailingPunctuationSplit) {
  EXPECT_THAT(Tokenize("Port-au-Prince, Haiti (CNN)"),
              ElementsAre("port-au-prince", ",", "haiti", "(", "cnn", ")"));
}

TEST(TokenizeTest, EmptyAndPlain) {
  EXPECT_TRUE(Tokenize("").empty());
  EXPECT_TRUE(Tokenize(" \t\n ").empty());
  EXPECT_THAT(Tokenize("doctors and nurses"), ElementsAre("doctors", "and", "nurses"));
}

TEST(TokenizeTest, ExampleSentenceTokenColumn) {
  const std::string text =
      "Port-au-Prince, Haiti (CNN) – Earthquake victims, writhing in pain and grasping at "
      "life, watched doctors and nurses walk away from a field hospital Friday night after "
      "a Belgian medical team evacuated the area, saying it was concerned about security.";
  const Tokens expected = {
      "port-au-prince", ",",      "haiti",   "(",        "cnn",      ")",       "–",
      "earthquake",     "victims", ",",      "writhing", "in",       "pain",    "and",
      "grasping",       "at",      "life",   ",",        "watched",  "doctors", "and",
      "nurses",         "walk",    "away",   "from",     "a",        "field",   "hospital",
      "friday",         "night",   "after",  "a",        "belgian",  "medical", "team",
      "evacuated",      "the",     "area",   ",",        "saying",   "it",      "was",
      "concerned",      "about",   "security", "."};
  EXPECT_EQ(Tokenize(text), expected);
}

TEST(TokenizeTest, PunctuationOnlyChunksStayWhole) {
  EXPECT_THAT(Tokenize("wait -- what ..."), ElementsAre("wait", "--", "what", "..."));
  EXPECT_THAT(Tokenize("(cnn)."), ElementsAre("(", "cnn", ")", "."));
  EXPECT_THAT(Tokenize("«bonjour»"), ElementsAre("«", "bonjour", "»"));
  EXPECT_THAT(Tokenize("don't"), ElementsAre("don't"));
}

TEST(TokenizeTest, CaseHandling) {
  EXPECT_THAT(Tokenize("Haiti CNN", false), ElementsAre("Haiti", "CNN"));
  // Non-ASCII letters are left alone.
  EXPECT_THAT(Tokenize("ÉCOLE Haiti"), ElementsAre("École", "haiti"));
}

TEST(DetokenizeTest, SingleSpaceJoin) {
  EXPECT_EQ(Detokenize(Tokens{"haiti", "(", "cnn", ")"}), "haiti ( cnn )");
  EXPECT_EQ(Detokenize(Tokens{}), "");
}

class PrivatizerFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    SyntheticSpec spec;
    spec.vocabulary = 300;
    spec.dimension = 8;
    store_ = std::make_shared<const EmbeddingStore>(MakeSyntheticStore(spec));
    search_ = std::make_unique<ExactSearch>(store_);
  }

  std::vector<Document> Corpus(size_t n) const {
    std::vector<Document> docs;
    for (size_t d = 0; d < n; ++d) {
      std::string text;
      for (size_t t = 0; t < 12; ++t) {
        text += "W" + std::to_string((d * 7 + t * 13) % 300) + (t % 5 == 4 ? ", " : " ");
      }
      text += "zxqv.";
      docs.push_back({d * 3 + 1, text});
    }
    return docs;
  }

  std::shared_ptr<const EmbeddingStore> store_;
  std::unique_ptr<ExactSearch> search_;
};

TEST_F(PrivatizerFixture, InfiniteBudgetPreservesTokens) {
  PrivatizationConfig cfg;
  for (const auto& doc : Corpus(5)) {
    auto out = PrivatizeDocument(*search_, doc, cfg);
    EXPECT_EQ(out.doc_id, doc.doc_id);
    EXPECT_EQ(Tokenize(out.text), Tokenize(doc.text));
  }
}

TEST_F(PrivatizerFixture, OovPassthroughAndLength) {
  PrivatizationConfig cfg;
  cfg.epsilon = PrivacyBudget(2);
  TokenCounts counts;
  const Document doc{9, "w1 zxqv w2 w3"};
  auto out = PrivatizeDocument(*search_, doc, cfg, &counts);
  auto tokens = Tokenize(out.text);
  ASSERT_EQ(tokens.size(), 4u);
  EXPECT_EQ(tokens[1], "zxqv");
  EXPECT_EQ(counts.perturbed, 3u);
  EXPECT_EQ(counts.oov_passthrough, 1u);
}

TEST_F(PrivatizerFixture, ParallelismDoesNotChangeOutput) {
  PrivatizationConfig cfg;
  cfg.epsilon = PrivacyBudget(1);
  cfg.seed = 77;
  const auto docs = Corpus(60);
  RunManifest m1, m8;
  auto serial = PrivatizeCorpus(*search_, docs, cfg, 1, &m1);
  auto parallel = PrivatizeCorpus(*search_, docs, cfg, 8, &m8);
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(m1.ToJson(), m8.ToJson());
  EXPECT_NE(serial[0].text, Detokenize(Tokenize(docs[0].text)));
}

TEST_F(PrivatizerFixture, StreamingMatchesInMemory) {
  PrivatizationConfig cfg;
  cfg.epsilon = PrivacyBudget(1.5);
  const auto docs = Corpus(30);
  std::ostringstream input;
  for (const auto& d : docs) WriteDocument(input, d, CorpusFormat::kJsonl);
  std::istringstream in(input.str());
  DocumentReader reader(in, CorpusFormat::kJsonl);
  std::ostringstream out;
  auto manifest = PrivatizeCorpus(*search_, reader, out, CorpusFormat::kJsonl, cfg, 3, 7);

  std::ostringstream expected;
  for (const auto& d : PrivatizeCorpus(*search_, docs, cfg, 1)) {
    WriteDocument(expected, d, CorpusFormat::kJsonl);
  }
  EXPECT_EQ(out.str(), expected.str());
  EXPECT_EQ(manifest.documents, 30u);
  EXPECT_EQ(manifest.counts.total(), manifest.tokens_total);
  // zxqv, the period and two commas per document.
  EXPECT_EQ(manifest.counts.oov_passthrough, 120u);
}

TEST_F(PrivatizerFixture, DuplicateDocIdIsError) {
  std::vector<Document> docs = {{1, "w1"}, {2, "w2"}, {1, "w3"}};
  EXPECT_THROW(PrivatizeCorpus(*search_, docs, {}, 2), InvalidArgument);
}

TEST_F(PrivatizerFixture, DropAndMarkerPolicies) {
  PrivatizationConfig cfg;
  cfg.oov_policy = OovPolicy::kDrop;
  EXPECT_EQ(PrivatizeDocument(*search_, {0, "w1 zxqv w2"}, cfg).text, "w1 w2");
  cfg.oov_policy = OovPolicy::kMarker;
  EXPECT_EQ(PrivatizeDocument(*search_, {0, "w1 zxqv w2"}, cfg).text, "w1 <oov> w2");
}

TEST(DocumentReaderTest, JsonlRecords) {
  std::istringstream in("{\"id\": 5, \"text\": \"a b\"}\n\n{\"id\": 2, \"text\": \"c\"}\n");
  DocumentReader reader(in, CorpusFormat::kJsonl, "docs.jsonl");
  auto d1 = reader.Next();
  auto d2 = reader.Next();
  ASSERT_TRUE(d1 && d2);
  EXPECT_EQ(d1->doc_id, 5u);
  EXPECT_EQ(d2->text, "c");
  EXPECT_FALSE(reader.Next());
}

TEST(DocumentReaderTest, ErrorsNameTheRecord) {
  auto error_of = [](const std::string& text) -> std::string {
    std::istringstream in(text);
    DocumentReader reader(in, CorpusFormat::kJsonl, "docs.jsonl");
    try {
      while (reader.Next()) {
      }
    } catch (const ParseError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_THAT(error_of("{\"id\": 1, \"text\": \"ok\"}\n{bad\n"), HasSubstr("docs.jsonl:2"));
  EXPECT_THAT(error_of("{\"id\": -1, \"text\": \"x\"}\n"), HasSubstr("docs.jsonl:1"));
  EXPECT_THAT(error_of("{\"id\": 1}\n"), HasSubstr("docs.jsonl:1"));
  EXPECT_THAT(error_of("{\"id\": 1, \"text\": 3}\n"), HasSubstr("docs.jsonl:1"));
}

TEST(DocumentReaderTest, PlainTextSequentialIds) {
  std::istringstream in("first line\n\nsecond line\n");
  DocumentReader reader(in, CorpusFormat::kText);
  auto a = reader.Next();
  auto b = reader.Next();
  EXPECT_EQ(a->doc_id, 0u);
  EXPECT_EQ(b->doc_id, 1u);
  EXPECT_EQ(b->text, "second line");
}

TEST(CorpusFormatTest, Names) {
  EXPECT_EQ(ParseCorpusFormat("jsonl"), CorpusFormat::kJsonl);
  EXPECT_EQ(ParseCorpusFormat("txt"), CorpusFormat::kText);
  EXPECT_THROW(ParseCorpusFormat("csv"), InvalidArgument);
}

TEST(Sha256Test, KnownVector) {
  const auto path = std::filesystem::temp_directory_path() / "privbias_sha_test.txt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "abc";
  }
  EXPECT_EQ(Sha256File(path), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::filesystem::remove(path);
}

TEST(RunManifestTest, JsonKeys) {
  RunManifest m;
  m.config.epsilon = PrivacyBudget(10);
  m.config.seed = 3;
  m.counts.perturbed = 5;
  m.counts.oov_dropped = 2;
  m.tokens_total = 7;
  auto j = m.ToJson();
  EXPECT_EQ(j["config"]["epsilon"], "10");
  EXPECT_EQ(j["config"]["seed"], 3);
  EXPECT_EQ(j["counts"]["tokens_perturbed"], 5);
  EXPECT_EQ(j["counts"]["tokens_oov"], 2);
  EXPECT_EQ(j["counts"]["tokens_total"], 7);
  EXPECT_TRUE(j["embeddings"].contains("sha256"));
}

}  // namespace
}  // namespace privbias
