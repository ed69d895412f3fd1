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

#include "privbias/scoring.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "privbias/errors.h"

namespace privbias {
namespace {

using ::testing::HasSubstr;

TEST(ProtocolTest, RoundTripAllMessages) {
  MaskScoreRequest mreq{"r-1", {"doctors", "and", "nurses", "\"quoted\"", "港"}, {0, 2, 4}};
  EXPECT_EQ(DecodeMaskScoreRequest(Encode(mreq)), mreq);
  MaskScoreResponse mres{"r-1", {{0, -1.5}, {2, -0.1}, {4, -1e-300}}};
  EXPECT_EQ(DecodeMaskScoreResponse(Encode(mres)), mres);
  NextSentenceRequest nreq{"n-1", {"a", "b"}, {}};
  EXPECT_EQ(DecodeNextSentenceRequest(Encode(nreq)), nreq);
  NextSentenceResponse nres{"n-1", 0.1 + 0.2};
  EXPECT_EQ(DecodeNextSentenceResponse(Encode(nres)), nres);
}

TEST(ProtocolTest, ExactFieldNamesOnOneLine) {
  // Keys are emitted in sorted order.
  const auto line = Encode(MaskScoreRequest{"x", {"a"}, {0}});
  EXPECT_EQ(line, R"({"id":"x","mask_indices":[0],"tokens":["a"]})");
  EXPECT_EQ(Encode(MaskScoreResponse{"x", {{0, -0.5}}}),
            R"({"id":"x","logprobs":[{"index":0,"logprob":-0.5}]})");
  EXPECT_EQ(Encode(NextSentenceRequest{"y", {"a"}, {"b"}}),
            R"({"context":["a"],"continuation":["b"],"id":"y"})");
  EXPECT_EQ(Encode(NextSentenceResponse{"y", 2}), R"({"id":"y","score":2.0})");
}

TEST(ProtocolTest, MalformedMessagesAreProtocolErrors) {
  EXPECT_THROW(DecodeMaskScoreResponse("not json"), ProtocolError);
  EXPECT_THROW(DecodeMaskScoreResponse(R"({"id":"x"})"), ProtocolError);
  EXPECT_THROW(DecodeMaskScoreResponse(R"({"id":"x","logprobs":[{"index":0}]})"),
               ProtocolError);
  EXPECT_THROW(DecodeMaskScoreResponse(R"({"id":1,"logprobs":[]})"), ProtocolError);
  EXPECT_THROW(DecodeNextSentenceResponse(R"({"id":"x","score":"high"})"), ProtocolError);
  EXPECT_THROW(DecodeNextSentenceResponse(R"({"id":"x","error":"model crashed"})"),
               ProtocolError);
  EXPECT_THROW(DecodeMaskScoreRequest(R"({"id":"x","tokens":["a"],"mask_indices":[-1]})"),
               ProtocolError);
}

TEST(ProtocolTest, DetectRoute) {
  EXPECT_EQ(DetectRoute(Encode(MaskScoreRequest{"x", {"a"}, {0}})), Route::kScoreMasked);
  EXPECT_EQ(DetectRoute(Encode(NextSentenceRequest{"x", {"a"}, {"b"}})), Route::kScoreNext);
  EXPECT_THROW(DetectRoute(R"({"id":"x"})"), ProtocolError);
}

TEST(MaskScoreRequestTest, Validation) {
  EXPECT_NO_THROW((MaskScoreRequest{"x", {"a", "b"}, {0, 1}}.Validate()));
  EXPECT_THROW((MaskScoreRequest{"x", {"a", "b"}, {}}.Validate()), InvalidArgument);
  EXPECT_THROW((MaskScoreRequest{"x", {"a", "b"}, {1, 0}}.Validate()), InvalidArgument);
  EXPECT_THROW((MaskScoreRequest{"x", {"a", "b"}, {1, 1}}.Validate()), InvalidArgument);
  EXPECT_THROW((MaskScoreRequest{"x", {"a", "b"}, {2}}.Validate()), InvalidArgument);
}

TEST(MockScorerTest, UniformLogprob) {
  MockScorer mock(MockSpec::Parse("uniform:1000"));
  auto r = mock.ScoreMasked({"u", {"a", "b", "c"}, {0, 1, 2}});
  for (const auto& lp : r.logprobs) EXPECT_DOUBLE_EQ(lp.logprob, -std::log(1000.0));
  EXPECT_EQ(mock.ScoreNext({"n", {"a"}, {"b"}}).score, 0.0);
}

TEST(MockScorerTest, TableLookup) {
  MockSpec spec;
  spec.kind = MockSpec::Kind::kTable;
  spec.token_probs = {{"nurses", 0.3}};
  MockScorer mock(spec);
  auto r = mock.ScoreMasked({"t", {"doctors", "and", "nurses"}, {2}});
  EXPECT_DOUBLE_EQ(r.logprobs[0].logprob, std::log(0.3));
  auto other = mock.ScoreMasked({"t", {"doctors"}, {0}});
  EXPECT_DOUBLE_EQ(other.logprobs[0].logprob, -std::log(1000.0));
}

TEST(MockScorerTest, TableFromJsonFile) {
  const auto path = std::filesystem::temp_directory_path() / "privbias_mock_table.json";
  {
    std::ofstream out(path);
    out << R"({"vocab_size": 50, "probs": {"a": 0.5}, "default_prob": 0.01, "bonus": {"poor": 1.0}})";
  }
  auto spec = MockSpec::Parse("table:" + path.string());
  EXPECT_EQ(spec.kind, MockSpec::Kind::kTable);
  EXPECT_EQ(spec.vocab_size, 50u);
  EXPECT_DOUBLE_EQ(spec.token_probs.at("a"), 0.5);
  EXPECT_DOUBLE_EQ(spec.default_prob, 0.01);
  EXPECT_DOUBLE_EQ(spec.context_bonus.at("poor"), 1.0);
  std::filesystem::remove(path);
  EXPECT_THROW(MockSpec::Parse("table:/nonexistent.json"), InvalidArgument);
  EXPECT_THROW(MockSpec::Parse("gpt:5"), InvalidArgument);
  EXPECT_THROW(MockSpec::Parse("uniform:0"), InvalidArgument);
}

TEST(MockScorerTest, OverlapNextSentence) {
  MockScorer mock(MockSpec::Parse("overlap:100"));
  const auto a = mock.ScoreNext({"1", {"doctors"}, {"doctors", "win"}});
  const auto b = mock.ScoreNext({"2", {"doctors"}, {"xyzzy"}});
  EXPECT_GT(a.score, b.score);
  EXPECT_EQ(mock.ScoreNext({"3", {"doctors"}, {"doctors", "win"}}).score, a.score);
}

TEST(MockScorerTest, ContextBonusAppliesWhenTokenVisibleElsewhere) {
  MockSpec spec;
  spec.context_bonus = {{"poor", 1.0}};
  MockScorer mock(spec);
  auto r = mock.ScoreMasked({"b", {"the", "poor", "man"}, {0, 1, 2}});
  const double base = -std::log(1000.0);
  EXPECT_DOUBLE_EQ(r.logprobs[0].logprob, base + 1.0);
  EXPECT_DOUBLE_EQ(r.logprobs[1].logprob, base);  // masked itself
  EXPECT_DOUBLE_EQ(r.logprobs[2].logprob, base + 1.0);
}

TEST(MockScorerTest, IdempotentWireResponses) {
  MockScorer mock(MockSpec::Parse("overlap:10"));
  const auto line = Encode(NextSentenceRequest{"i", {"a", "b"}, {"b", "c"}});
  EXPECT_EQ(mock.Exchange(Route::kScoreNext, line), mock.Exchange(Route::kScoreNext, line));
  EXPECT_EQ(mock.calls(), 2u);
}

TEST(ServeLinesTest, AnswersEachLineAndReportsErrors) {
  MockScorer mock(MockSpec::Parse("uniform:10"));
  std::istringstream in(Encode(MaskScoreRequest{"a", {"x"}, {0}}) + "\n\n" +
                        R"({"id":"b","tokens":["x"],"mask_indices":[3]})" + "\n");
  std::ostringstream out;
  ServeLines(mock, in, out);
  std::istringstream lines(out.str());
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(DecodeMaskScoreResponse(first).id, "a");
  EXPECT_THAT(second, HasSubstr("\"error\""));
  EXPECT_THAT(second, HasSubstr("\"id\":\"b\""));
}

// Records requests and replays a scripted reaction.
class ScriptedTransport : public Transport {
 public:
  using Script = std::function<std::string(int call, const std::string& line)>;
  explicit ScriptedTransport(Script script) : script_(std::move(script)) {}
  std::string Exchange(Route, const std::string& line) override {
    std::lock_guard<std::mutex> lock(mu_);
    return script_(calls_++, line);
  }
  int calls() const { return calls_; }

 private:
  std::mutex mu_;
  Script script_;
  int calls_ = 0;
};

TEST(ScoringClientTest, InvalidRequestMakesNoCall) {
  auto mock = std::make_shared<MockScorer>(MockSpec::Parse("uniform:10"));
  ScoringClient client(mock);
  EXPECT_THROW(client.ScoreMasked({"x", {"a", "b", "c", "d"}, {5}}), InvalidArgument);
  EXPECT_EQ(mock->calls(), 0u);
}

TEST(ScoringClientTest, RetriesTransportErrorsOnly) {
  auto flaky = std::make_shared<ScriptedTransport>([](int call, const std::string&) {
    if (call < 2) throw TransportError("connection reset");
    return std::string(R"({"id":"n","score":1.5})");
  });
  ScoringClient client(flaky, {1, 3, std::chrono::milliseconds(1)});
  EXPECT_EQ(client.ScoreNext({"n", {"a"}, {"b"}}).score, 1.5);
  EXPECT_EQ(flaky->calls(), 3);

  auto down = std::make_shared<ScriptedTransport>(
      [](int, const std::string&) -> std::string { throw TransportError("down"); });
  ScoringClient give_up(down, {1, 2, std::chrono::milliseconds(1)});
  EXPECT_THROW(give_up.ScoreNext({"n", {"a"}, {"b"}}), TransportError);
  EXPECT_EQ(down->calls(), 2);

  auto broken = std::make_shared<ScriptedTransport>(
      [](int, const std::string&) { return std::string("garbage"); });
  ScoringClient no_retry(broken, {1, 5, std::chrono::milliseconds(1)});
  EXPECT_THROW(no_retry.ScoreNext({"n", {"a"}, {"b"}}), ProtocolError);
  EXPECT_EQ(broken->calls(), 1);
}

TEST(ScoringClientTest, DetectsMismatchedResponses) {
  auto wrong_id = std::make_shared<ScriptedTransport>([](int, const std::string&) {
    return std::string(R"({"id":"other","logprobs":[{"index":0,"logprob":-1}]})");
  });
  EXPECT_THROW(ScoringClient(wrong_id).ScoreMasked({"x", {"a"}, {0}}), ProtocolError);

  auto missing = std::make_shared<ScriptedTransport>([](int, const std::string&) {
    return std::string(R"({"id":"x","logprobs":[{"index":0,"logprob":-1}]})");
  });
  EXPECT_THROW(ScoringClient(missing).ScoreMasked({"x", {"a", "b"}, {0, 1}}), ProtocolError);

  auto reordered = std::make_shared<ScriptedTransport>([](int, const std::string&) {
    return std::string(
        R"({"id":"x","logprobs":[{"index":1,"logprob":-1},{"index":0,"logprob":-1}]})");
  });
  EXPECT_THROW(ScoringClient(reordered).ScoreMasked({"x", {"a", "b"}, {0, 1}}), ProtocolError);
}

TEST(ScoringClientTest, BoundedInFlight) {
  for (size_t k : {1u, 3u}) {
    auto mock = std::make_shared<MockScorer>(MockSpec::Parse("uniform:10"),
                                             std::chrono::milliseconds(5));
    ScoringClient client(mock, {k, 1, std::chrono::milliseconds(1)});
    std::vector<MaskScoreRequest> requests;
    for (int i = 0; i < 40; ++i) requests.push_back({client.NextId("m"), {"a", "b"}, {0, 1}});
    // Extra callers outside the batch share the same limit.
    std::thread side([&] {
      std::vector<NextSentenceRequest> more;
      for (int i = 0; i < 20; ++i) more.push_back({client.NextId("n"), {"a"}, {"b"}});
      client.ScoreNextBatch(more);
    });
    auto out = client.ScoreMaskedBatch(requests);
    side.join();
    EXPECT_LE(mock->max_concurrent(), k);
    EXPECT_EQ(mock->calls(), 60u);
    for (size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].id, requests[i].id);
  }
}

TEST(ScoringClientTest, BatchPreservesRequestOrder) {
  auto mock = std::make_shared<MockScorer>(MockSpec::Parse("overlap:10"));
  ScoringClient client(mock, {4});
  std::vector<NextSentenceRequest> reqs = {
      {"a", {"x", "y"}, {"x"}}, {"b", {"x", "y"}, {"q"}}, {"c", {"x", "y"}, {"x", "y"}}};
  auto out = client.ScoreNextBatch(reqs);
  EXPECT_EQ(out[0].score, 1.0);
  EXPECT_EQ(out[1].score, 0.0);
  EXPECT_EQ(out[2].score, 2.0);
}

TEST(MakeTransportTest, Schemes) {
  EXPECT_NE(dynamic_cast<MockScorer*>(MakeTransport("mock:uniform:5").get()), nullptr);
  EXPECT_NE(dynamic_cast<HttpTransport*>(MakeTransport("http://127.0.0.1:1").get()), nullptr);
  EXPECT_THROW(MakeTransport("ftp://x"), InvalidArgument);
}

}  // namespace
}  // namespace privbias
