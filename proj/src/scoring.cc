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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "privbias/errors.h"
#include "privbias/parallel.h"

namespace privbias {

using nlohmann::json;

void MaskScoreRequest::Validate() const {
  if (mask_indices.empty()) throw InvalidArgument("request " + id + ": no mask indices");
  for (size_t i = 0; i < mask_indices.size(); ++i) {
    if (mask_indices[i] >= tokens.size()) {
      throw InvalidArgument("request " + id + ": mask index " +
                            std::to_string(mask_indices[i]) + " out of range for " +
                            std::to_string(tokens.size()) + " tokens");
    }
    if (i > 0 && mask_indices[i] <= mask_indices[i - 1]) {
      throw InvalidArgument("request " + id +
                            ": mask indices must be strictly increasing");
    }
  }
}

std::string Encode(const MaskScoreRequest& m) {
  return json{{"id", m.id}, {"tokens", m.tokens}, {"mask_indices", m.mask_indices}}.dump();
}

std::string Encode(const MaskScoreResponse& m) {
  json logprobs = json::array();
  for (const auto& lp : m.logprobs) {
    logprobs.push_back({{"index", lp.index}, {"logprob", lp.logprob}});
  }
  return json{{"id", m.id}, {"logprobs", std::move(logprobs)}}.dump();
}

std::string Encode(const NextSentenceRequest& m) {
  return json{{"id", m.id}, {"context", m.context}, {"continuation", m.continuation}}
      .dump();
}

std::string Encode(const NextSentenceResponse& m) {
  return json{{"id", m.id}, {"score", m.score}}.dump();
}

namespace {

json ParseObject(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed protocol message: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("protocol message is not a JSON object");
  if (j.contains("error")) {
    throw ProtocolError("scorer reported an error: " +
                        (j["error"].is_string() ? j["error"].get<std::string>()
                                                : j["error"].dump()));
  }
  return j;
}

const json& Field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ProtocolError(std::string("missing field \"") + name + "\"");
  return *it;
}

std::string IdField(const json& j) {
  const json& id = Field(j, "id");
  if (!id.is_string()) throw ProtocolError("\"id\" must be a string");
  return id.get<std::string>();
}

std::vector<std::string> TokenList(const json& j, const char* name) {
  const json& arr = Field(j, name);
  if (!arr.is_array()) throw ProtocolError(std::string("\"") + name + "\" must be an array");
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const auto& t : arr) {
    if (!t.is_string()) throw ProtocolError(std::string("\"") + name + "\" entries must be strings");
    out.push_back(t.get<std::string>());
  }
  return out;
}

size_t IndexValue(const json& v, const char* what) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<int64_t>() < 0)) {
    throw ProtocolError(std::string(what) + " must be a non-negative integer");
  }
  return v.get<size_t>();
}

double FiniteNumber(const json& v, const char* what) {
  if (!v.is_number()) throw ProtocolError(std::string(what) + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ProtocolError(std::string(what) + " must be finite");
  return x;
}

}  // namespace

MaskScoreRequest DecodeMaskScoreRequest(std::string_view line) {
  const json j = ParseObject(line);
  MaskScoreRequest m;
  m.id = IdField(j);
  m.tokens = TokenList(j, "tokens");
  const json& idx = Field(j, "mask_indices");
  if (!idx.is_array()) throw ProtocolError("\"mask_indices\" must be an array");
  for (const auto& v : idx) m.mask_indices.push_back(IndexValue(v, "mask index"));
  return m;
}

MaskScoreResponse DecodeMaskScoreResponse(std::string_view line) {
  const json j = ParseObject(line);
  MaskScoreResponse m;
  m.id = IdField(j);
  const json& lps = Field(j, "logprobs");
  if (!lps.is_array()) throw ProtocolError("\"logprobs\" must be an array");
  for (const auto& e : lps) {
    if (!e.is_object()) throw ProtocolError("\"logprobs\" entries must be objects");
    m.logprobs.push_back(
        {IndexValue(Field(e, "index"), "index"), FiniteNumber(Field(e, "logprob"), "logprob")});
  }
  return m;
}

NextSentenceRequest DecodeNextSentenceRequest(std::string_view line) {
  const json j = ParseObject(line);
  return {IdField(j), TokenList(j, "context"), TokenList(j, "continuation")};
}

NextSentenceResponse DecodeNextSentenceResponse(std::string_view line) {
  const json j = ParseObject(line);
  return {IdField(j), FiniteNumber(Field(j, "score"), "score")};
}

Route DetectRoute(std::string_view request_line) {
  json j;
  try {
    j = json::parse(request_line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  }
  if (j.is_object() && j.contains("mask_indices")) return Route::kScoreMasked;
  if (j.is_object() && j.contains("continuation")) return Route::kScoreNext;
  throw ProtocolError("request is neither score_masked nor score_next");
}

// --- Mock scorer -----------------------------------------------------------

MockSpec MockSpec::FromJson(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("bad mock table: ") + e.what());
  }
  MockSpec spec;
  spec.kind = Kind::kTable;
  spec.vocab_size = j.value("vocab_size", size_t{1000});
  spec.default_prob = j.value("default_prob", 0.0);
  if (j.contains("probs")) {
    for (const auto& [token, p] : j["probs"].items()) {
      spec.token_probs[token] = p.get<double>();
    }
  }
  if (j.contains("bonus")) {
    for (const auto& [token, b] : j["bonus"].items()) {
      spec.context_bonus[token] = b.get<double>();
    }
  }
  return spec;
}

MockSpec MockSpec::Parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view() : text.substr(colon + 1);
  auto parse_size = [&](std::string_view s) {
    size_t n = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc() || ptr != s.data() + s.size() || n == 0) {
      throw InvalidArgument("bad mock vocabulary size '" + std::string(s) + "'");
    }
    return n;
  };
  MockSpec spec;
  if (kind == "uniform" || kind == "overlap") {
    spec.kind = kind == "uniform" ? Kind::kUniform : Kind::kOverlap;
    spec.vocab_size = arg.empty() ? 1000 : parse_size(arg);
    return spec;
  }
  if (kind == "table") {
    std::ifstream in{std::string(arg)};
    if (!in) throw InvalidArgument("cannot open mock table '" + std::string(arg) + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return FromJson(ss.str());
  }
  throw InvalidArgument("unknown mock scorer '" + std::string(text) + "'");
}

MockScorer::MockScorer(MockSpec spec, std::chrono::microseconds latency)
    : spec_(std::move(spec)), latency_(latency) {
  if (spec_.vocab_size == 0) throw InvalidArgument("mock vocab_size must be >= 1");
  auto check = [](double p) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("mock probabilities must be in (0, 1]");
  };
  for (const auto& [token, p] : spec_.token_probs) check(p);
  if (spec_.default_prob != 0.0) check(spec_.default_prob);
}

double MockScorer::TokenLogprob(const std::string& token) const {
  const double uniform = -std::log(static_cast<double>(spec_.vocab_size));
  if (spec_.kind != MockSpec::Kind::kTable) return uniform;
  auto it = spec_.token_probs.find(token);
  if (it != spec_.token_probs.end()) return std::log(it->second);
  return spec_.default_prob > 0.0 ? std::log(spec_.default_prob) : uniform;
}

MaskScoreResponse MockScorer::ScoreMasked(const MaskScoreRequest& request) const {
  request.Validate();
  MaskScoreResponse response{request.id, {}};
  for (size_t index : request.mask_indices) {
    double lp = TokenLogprob(request.tokens[index]);
    for (const auto& [token, bonus] : spec_.context_bonus) {
      for (size_t pos = 0; pos < request.tokens.size(); ++pos) {
        if (pos != index && request.tokens[pos] == token) {
          lp += bonus;
          break;
        }
      }
    }
    response.logprobs.push_back({index, lp});
  }
  return response;
}

NextSentenceResponse MockScorer::ScoreNext(const NextSentenceRequest& request) const {
  double score = 0.0;
  const auto& cont = request.continuation;
  switch (spec_.kind) {
    case MockSpec::Kind::kUniform:
      break;
    case MockSpec::Kind::kTable:
      if (!cont.empty()) {
        for (const auto& t : cont) score += TokenLogprob(t);
        score /= static_cast<double>(cont.size());
      }
      break;
    case MockSpec::Kind::kOverlap: {
      const std::set<std::string> context(request.context.begin(), request.context.end());
      const std::set<std::string> distinct(cont.begin(), cont.end());
      for (const auto& t : distinct) score += context.count(t) ? 1.0 : 0.0;
      break;
    }
  }
  for (const auto& [token, bonus] : spec_.context_bonus) {
    if (std::find(cont.begin(), cont.end(), token) != cont.end()) score += bonus;
  }
  return {request.id, score};
}

std::string MockScorer::Exchange(Route route, const std::string& request_line) {
  calls_.fetch_add(1);
  const size_t now = in_flight_.fetch_add(1) + 1;
  size_t seen = max_concurrent_.load();
  while (now > seen && !max_concurrent_.compare_exchange_weak(seen, now)) {
  }
  struct Leave {
    std::atomic<size_t>& counter;
    ~Leave() { counter.fetch_sub(1); }
  } leave{in_flight_};
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  if (route == Route::kScoreMasked) {
    auto request = DecodeMaskScoreRequest(request_line);
    try {
      return Encode(ScoreMasked(request));
    } catch (const InvalidArgument& e) {
      throw ProtocolError(e.what());
    }
  }
  return Encode(ScoreNext(DecodeNextSentenceRequest(request_line)));
}

void ServeLines(Transport& backend, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string reply;
    try {
      reply = backend.Exchange(DetectRoute(line), line);
    } catch (const std::exception& e) {
      json err = {{"error", e.what()}};
      try {
        auto j = json::parse(line);
        if (j.is_object() && j.contains("id")) err["id"] = j["id"];
      } catch (const json::parse_error&) {
      }
      reply = err.dump();
    }
    out << reply << '\n';
    out.flush();
  }
}

std::shared_ptr<Transport> MakeTransport(std::string_view scorer) {
  if (scorer.starts_with("http://")) {
    return std::make_shared<HttpTransport>(std::string(scorer));
  }
  if (scorer.starts_with("cmd:")) {
    return std::make_shared<ProcessTransport>(std::string(scorer.substr(4)));
  }
  if (scorer.starts_with("mock:")) {
    return std::make_shared<MockScorer>(MockSpec::Parse(scorer.substr(5)));
  }
  throw InvalidArgument("unsupported scorer '" + std::string(scorer) +
                        "' (expected http://..., cmd:... or mock:...)");
}

// --- Client ----------------------------------------------------------------

ScoringClient::ScoringClient(std::shared_ptr<Transport> transport, ClientOptions options)
    : transport_(std::move(transport)),
      options_(options),
      slots_(static_cast<std::ptrdiff_t>(std::max<size_t>(options.max_in_flight, 1))) {
  if (!transport_) throw InvalidArgument("ScoringClient needs a transport");
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  if (options_.max_attempts < 1) options_.max_attempts = 1;
}

std::string ScoringClient::NextId(std::string_view prefix) {
  return std::string(prefix) + "-" + std::to_string(next_id_.fetch_add(1));
}

std::string ScoringClient::ExchangeWithRetry(Route route, const std::string& line) {
  for (int attempt = 1;; ++attempt) {
    try {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{slots_};
      return transport_->Exchange(route, line);
    } catch (const TransportError& e) {
      if (attempt >= options_.max_attempts) {
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) +
                             " attempts)");
      }
    }
    std::this_thread::sleep_for(options_.retry_backoff * attempt);
  }
}

MaskScoreResponse ScoringClient::ScoreMasked(const MaskScoreRequest& request) {
  request.Validate();
  auto response =
      DecodeMaskScoreResponse(ExchangeWithRetry(Route::kScoreMasked, Encode(request)));
  if (response.id != request.id) {
    throw ProtocolError("response id '" + response.id + "' does not match request '" +
                        request.id + "'");
  }
  if (response.logprobs.size() != request.mask_indices.size()) {
    throw ProtocolError("response " + response.id + " has " +
                        std::to_string(response.logprobs.size()) + " logprobs for " +
                        std::to_string(request.mask_indices.size()) + " masked indices");
  }
  for (size_t i = 0; i < response.logprobs.size(); ++i) {
    if (response.logprobs[i].index != request.mask_indices[i]) {
      throw ProtocolError("response " + response.id + " is missing index " +
                          std::to_string(request.mask_indices[i]));
    }
  }
  return response;
}

NextSentenceResponse ScoringClient::ScoreNext(const NextSentenceRequest& request) {
  auto response =
      DecodeNextSentenceResponse(ExchangeWithRetry(Route::kScoreNext, Encode(request)));
  if (response.id != request.id) {
    throw ProtocolError("response id '" + response.id + "' does not match request '" +
                        request.id + "'");
  }
  return response;
}

std::vector<MaskScoreResponse> ScoringClient::ScoreMaskedBatch(
    std::span<const MaskScoreRequest> requests) {
  for (const auto& r : requests) r.Validate();
  std::vector<MaskScoreResponse> out(requests.size());
  ParallelFor(requests.size(), options_.max_in_flight,
              [&](size_t i) { out[i] = ScoreMasked(requests[i]); });
  return out;
}

std::vector<NextSentenceResponse> ScoringClient::ScoreNextBatch(
    std::span<const NextSentenceRequest> requests) {
  std::vector<NextSentenceResponse> out(requests.size());
  ParallelFor(requests.size(), options_.max_in_flight,
              [&](size_t i) { out[i] = ScoreNext(requests[i]); });
  return out;
}

}  // namespace privbias
