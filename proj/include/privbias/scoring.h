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

// Wire protocol for querying a masked language model.
//
// Every message is one JSON object on one line.
//
//   score_masked  request   {"id": str, "tokens": [str], "mask_indices": [int]}
//                 response  {"id": str, "logprobs": [{"index": int, "logprob": num}]}
//   score_next    request   {"id": str, "context": [str], "continuation": [str]}
//                 response  {"id": str, "score": num}
//
// A masked request with several indices means: each index is masked on its
// own, with every other token visible, and the log-probability of the
// original token at that position is reported. Next-sentence scores are raw
// reals where larger means a more plausible continuation.
//
// Over HTTP the two requests are POSTed to /score_masked and /score_next.
// Over a child process both share stdin/stdout and the server tells them
// apart by their fields; responses may come back in any order and are
// matched by id.

#ifndef PRIVBIAS_SCORING_H_
#define PRIVBIAS_SCORING_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace privbias {

struct MaskScoreRequest {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<size_t> mask_indices;

  // Non-empty, strictly increasing, in bounds. Throws InvalidArgument.
  void Validate() const;
  friend bool operator==(const MaskScoreRequest&, const MaskScoreRequest&) = default;
};

struct TokenLogprob {
  size_t index = 0;
  double logprob = 0.0;
  friend bool operator==(const TokenLogprob&, const TokenLogprob&) = default;
};

struct MaskScoreResponse {
  std::string id;
  std::vector<TokenLogprob> logprobs;
  friend bool operator==(const MaskScoreResponse&, const MaskScoreResponse&) = default;
};

struct NextSentenceRequest {
  std::string id;
  std::vector<std::string> context;
  std::vector<std::string> continuation;
  friend bool operator==(const NextSentenceRequest&, const NextSentenceRequest&) = default;
};

struct NextSentenceResponse {
  std::string id;
  double score = 0.0;
  friend bool operator==(const NextSentenceResponse&, const NextSentenceResponse&) = default;
};

// One line of JSON, no trailing newline. Doubles are written with the
// shortest representation that round-trips.
std::string Encode(const MaskScoreRequest& m);
std::string Encode(const MaskScoreResponse& m);
std::string Encode(const NextSentenceRequest& m);
std::string Encode(const NextSentenceResponse& m);

// Throw ProtocolError on malformed input.
MaskScoreRequest DecodeMaskScoreRequest(std::string_view line);
MaskScoreResponse DecodeMaskScoreResponse(std::string_view line);
NextSentenceRequest DecodeNextSentenceRequest(std::string_view line);
NextSentenceResponse DecodeNextSentenceResponse(std::string_view line);

enum class Route { kScoreMasked, kScoreNext };

// Identifies which request type a line carries.
Route DetectRoute(std::string_view request_line);

// Moves one encoded request to a backend and returns the encoded response.
// Implementations must be safe to call concurrently. Unreachable backends
// throw TransportError; the client retries those.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string Exchange(Route route, const std::string& request_line) = 0;
};

// Deterministic in-process scorer speaking the wire format.
//
//   uniform  every token has probability 1 / vocab_size; next-sentence
//            score is 0.
//   table    token probabilities from `token_probs`, else `default_prob`
//            (1 / vocab_size when unset); next-sentence score is the mean
//            log-probability of the continuation tokens.
//   overlap  masked scoring as uniform; next-sentence score is the number
//            of distinct continuation tokens that also occur in the context.
//
// `context_bonus` adds its value to a masked log-probability whenever the
// keyed token is visible elsewhere in the sentence, and to a next-sentence
// score whenever the continuation contains it.
struct MockSpec {
  enum class Kind { kUniform, kTable, kOverlap };
  Kind kind = Kind::kUniform;
  size_t vocab_size = 1000;
  std::map<std::string, double> token_probs;
  double default_prob = 0.0;
  std::map<std::string, double> context_bonus;

  // "uniform:N", "overlap:N" or "table:PATH" (PATH is a JSON file with keys
  // vocab_size, probs, default_prob, bonus).
  static MockSpec Parse(std::string_view text);
  static MockSpec FromJson(std::string_view json_text);
};

class MockScorer final : public Transport {
 public:
  explicit MockScorer(MockSpec spec, std::chrono::microseconds latency = {});

  std::string Exchange(Route route, const std::string& request_line) override;

  MaskScoreResponse ScoreMasked(const MaskScoreRequest& request) const;
  NextSentenceResponse ScoreNext(const NextSentenceRequest& request) const;

  // Instrumentation.
  size_t max_concurrent() const { return max_concurrent_.load(); }
  uint64_t calls() const { return calls_.load(); }

 private:
  double TokenLogprob(const std::string& token) const;

  MockSpec spec_;
  std::chrono::microseconds latency_;
  std::atomic<size_t> in_flight_{0};
  std::atomic<size_t> max_concurrent_{0};
  std::atomic<uint64_t> calls_{0};
};

// POSTs to <base_url>/score_masked and <base_url>/score_next.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string base_url,
                         std::chrono::seconds timeout = std::chrono::seconds(60));
  std::string Exchange(Route route, const std::string& request_line) override;

 private:
  std::string host_;
  std::string path_prefix_;
  std::chrono::seconds timeout_;
};

// Launches `/bin/sh -c command` and speaks the protocol over its stdin and
// stdout. A reader thread routes responses back to callers by id.
class ProcessTransport final : public Transport {
 public:
  explicit ProcessTransport(const std::string& command);
  ~ProcessTransport() override;

  std::string Exchange(Route route, const std::string& request_line) override;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

// Serves requests read from `in` by passing them to `backend`, writing one
// response line per request line to `out`. Used to turn any Transport (for
// instance a MockScorer) into a child-process scorer.
void ServeLines(Transport& backend, std::istream& in, std::ostream& out);

// "http://host:port[/prefix]", "cmd:<shell command>", or "mock:<MockSpec>".
std::shared_ptr<Transport> MakeTransport(std::string_view scorer);

struct ClientOptions {
  size_t max_in_flight = 4;
  int max_attempts = 3;
  std::chrono::milliseconds retry_backoff{20};
};

// Validates requests, applies retries, and checks that each response matches
// its request (same id, one entry per masked index in request order).
class ScoringClient {
 public:
  explicit ScoringClient(std::shared_ptr<Transport> transport, ClientOptions options = {});

  MaskScoreResponse ScoreMasked(const MaskScoreRequest& request);
  NextSentenceResponse ScoreNext(const NextSentenceRequest& request);

  // Issue up to max_in_flight requests at once; results in request order.
  std::vector<MaskScoreResponse> ScoreMaskedBatch(std::span<const MaskScoreRequest> requests);
  std::vector<NextSentenceResponse> ScoreNextBatch(
      std::span<const NextSentenceRequest> requests);

  const ClientOptions& options() const { return options_; }
  // Fresh request id, unique within this client.
  std::string NextId(std::string_view prefix);

 private:
  std::string ExchangeWithRetry(Route route, const std::string& line);

  std::shared_ptr<Transport> transport_;
  ClientOptions options_;
  // Caps outstanding exchanges across every thread using this client.
  std::counting_semaphore<> slots_;
  std::atomic<uint64_t> next_id_{0};
};

}  // namespace privbias

#endif  // PRIVBIAS_SCORING_H_
