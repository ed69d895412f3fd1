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

#include "privbias/mechanism.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>

#include "privbias/errors.h"

namespace privbias {

PrivacyBudget::PrivacyBudget(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0)) {
    throw InvalidArgument("privacy budget epsilon must be > 0, got " +
                          std::to_string(epsilon));
  }
}

PrivacyBudget PrivacyBudget::Infinite() {
  return PrivacyBudget(std::numeric_limits<double>::infinity());
}

bool PrivacyBudget::is_infinite() const { return std::isinf(epsilon_); }

PrivacyBudget PrivacyBudget::Parse(std::string_view text) {
  if (text == "inf" || text == "infinity" || text == "Inf" || text == "∞") {
    return Infinite();
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidArgument("cannot parse epsilon '" + std::string(text) + "'");
  }
  return PrivacyBudget(value);
}

std::string PrivacyBudget::ToString() const {
  if (is_infinite()) return "inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), epsilon_);
  return std::string(buf, ptr);
}

NoiseSample SampleNoise(PrivacyBudget budget, size_t dim, RngStream& rng) {
  if (dim == 0) throw InvalidArgument("noise dimension must be >= 1");
  NoiseSample sample;
  sample.direction.assign(dim, 0.0);
  sample.vector.assign(dim, 0.0);
  if (budget.is_infinite()) {
    sample.direction[0] = 1.0;
    return sample;
  }
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : sample.direction) {
      x = rng.Normal();
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv_norm = 1.0 / std::sqrt(norm2);
  for (double& x : sample.direction) x *= inv_norm;

  sample.magnitude = rng.Gamma(static_cast<double>(dim), 1.0 / budget.epsilon());
  for (size_t j = 0; j < dim; ++j) {
    sample.vector[j] = sample.direction[j] * sample.magnitude;
  }
  return sample;
}

size_t PerturbIndex(const NeighborSearch& search, size_t word_index,
                    PrivacyBudget budget, RngStream& rng) {
  const EmbeddingStore& store = search.store();
  if (word_index >= store.size()) throw InvalidArgument("word index out of range");
  if (budget.is_infinite()) return word_index;

  std::vector<double> query(store.dimension());
  NoisyQuery(store, word_index, budget, rng, query);
  return search.NearestIndex(query);
}

void NoisyQuery(const EmbeddingStore& store, size_t word_index, PrivacyBudget budget,
                RngStream& rng, std::span<double> out) {
  if (word_index >= store.size()) throw InvalidArgument("word index out of range");
  if (out.size() != store.dimension()) throw InvalidArgument("query buffer has wrong size");
  auto row = store.Row(word_index);
  if (budget.is_infinite()) {
    std::copy(row.begin(), row.end(), out.begin());
    return;
  }
  const NoiseSample noise = SampleNoise(budget, store.dimension(), rng);
  for (size_t j = 0; j < out.size(); ++j) out[j] = static_cast<double>(row[j]) + noise.vector[j];
}

std::string PerturbWord(const NeighborSearch& search, std::string_view word,
                        PrivacyBudget budget, RngStream& rng) {
  auto index = search.store().IndexOf(word);
  if (!index) {
    throw InvalidArgument("word '" + std::string(word) + "' is not in the vocabulary");
  }
  return search.store().Word(PerturbIndex(search, *index, budget, rng));
}

OovPolicy ParseOovPolicy(std::string_view text) {
  if (text == "passthrough") return OovPolicy::kPassthrough;
  if (text == "drop") return OovPolicy::kDrop;
  if (text == "marker" || text == "nearest-known-marker") return OovPolicy::kMarker;
  throw InvalidArgument("unknown OOV policy '" + std::string(text) + "'");
}

std::string_view ToString(OovPolicy policy) {
  switch (policy) {
    case OovPolicy::kPassthrough:
      return "passthrough";
    case OovPolicy::kDrop:
      return "drop";
    case OovPolicy::kMarker:
      return "marker";
  }
  return "passthrough";
}

TokenCounts& TokenCounts::operator+=(const TokenCounts& other) {
  perturbed += other.perturbed;
  oov_passthrough += other.oov_passthrough;
  oov_dropped += other.oov_dropped;
  oov_marked += other.oov_marked;
  return *this;
}

std::vector<std::string> PerturbTokens(const NeighborSearch& search,
                                       std::span<const std::string> tokens,
                                       PrivacyBudget budget, uint64_t seed,
                                       uint64_t doc_id, const PerturbOptions& options,
                                       TokenCounts* counts) {
  const EmbeddingStore& store = search.store();
  const size_t d = store.dimension();
  TokenCounts local;
  // Slot per token: vocabulary index, or nullopt for out-of-vocabulary.
  std::vector<std::optional<size_t>> slots(tokens.size());
  std::vector<size_t> noisy_positions;
  for (size_t pos = 0; pos < tokens.size(); ++pos) {
    slots[pos] = store.IndexOf(tokens[pos]);
    if (slots[pos] && !budget.is_infinite()) noisy_positions.push_back(pos);
  }
  std::vector<double> queries(noisy_positions.size() * d);
  for (size_t i = 0; i < noisy_positions.size(); ++i) {
    const size_t pos = noisy_positions[i];
    RngStream rng({seed, StreamDomain::kCorpus, doc_id, pos});
    NoisyQuery(store, *slots[pos], budget, rng, std::span(queries).subspan(i * d, d));
  }
  const auto nearest =
      noisy_positions.empty() ? std::vector<size_t>{} : search.NearestIndexBatch(queries);
  for (size_t i = 0; i < noisy_positions.size(); ++i) slots[noisy_positions[i]] = nearest[i];

  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (size_t pos = 0; pos < tokens.size(); ++pos) {
    if (slots[pos]) {
      out.push_back(store.Word(*slots[pos]));
      ++local.perturbed;
      continue;
    }
    const std::string& token = tokens[pos];
    switch (options.oov_policy) {
      case OovPolicy::kPassthrough:
        out.push_back(token);
        ++local.oov_passthrough;
        break;
      case OovPolicy::kDrop:
        ++local.oov_dropped;
        break;
      case OovPolicy::kMarker:
        out.push_back(options.oov_marker);
        ++local.oov_marked;
        break;
    }
  }
  if (counts) *counts += local;
  return out;
}

}  // namespace privbias
