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

// Word-level metric differential privacy over an embedding space.
//
// A word w is privatized by taking its embedding phi(w), adding a noise
// vector z whose density is proportional to exp(-epsilon * |z|), and
// returning the vocabulary word nearest to phi(w) + z. Sampling z splits into
// a direction uniform on the unit sphere and a magnitude drawn from
// Gamma(shape = d, scale = 1 / epsilon).

#ifndef PRIVBIAS_MECHANISM_H_
#define PRIVBIAS_MECHANISM_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "privbias/nearest_index.h"
#include "privbias/rng.h"

namespace privbias {

// epsilon in (0, inf]; infinity means no privatization.
class PrivacyBudget {
 public:
  // Throws InvalidArgument unless epsilon > 0 (NaN rejected).
  explicit PrivacyBudget(double epsilon);
  static PrivacyBudget Infinite();
  // Accepts a decimal number, "inf", "infinity" or "∞".
  static PrivacyBudget Parse(std::string_view text);

  double epsilon() const { return epsilon_; }
  bool is_infinite() const;
  // "inf" or the shortest decimal that round-trips.
  std::string ToString() const;

  friend bool operator==(const PrivacyBudget&, const PrivacyBudget&) = default;

 private:
  double epsilon_;
};

struct NoiseSample {
  std::vector<double> direction;  // unit norm
  double magnitude = 0.0;
  std::vector<double> vector;     // direction * magnitude
};

// For an infinite budget returns magnitude 0 and the zero vector (direction
// is the first basis vector) without drawing from rng.
NoiseSample SampleNoise(PrivacyBudget budget, size_t dim, RngStream& rng);

// Vocabulary index of M(word). The word itself is a legal output.
// Writes the word's vector plus one noise draw into `out` (dimension-sized).
// An infinite budget copies the vector and draws nothing.
void NoisyQuery(const EmbeddingStore& store, size_t word_index, PrivacyBudget budget,
                RngStream& rng, std::span<double> out);

size_t PerturbIndex(const NeighborSearch& search, size_t word_index,
                    PrivacyBudget budget, RngStream& rng);

// Throws InvalidArgument if `word` is not in the vocabulary.
std::string PerturbWord(const NeighborSearch& search, std::string_view word,
                        PrivacyBudget budget, RngStream& rng);

enum class OovPolicy {
  kPassthrough,  // keep the token unchanged
  kDrop,         // remove it from the output
  kMarker,       // replace it with a fixed marker token
};

OovPolicy ParseOovPolicy(std::string_view text);
std::string_view ToString(OovPolicy policy);

struct TokenCounts {
  uint64_t perturbed = 0;
  uint64_t oov_passthrough = 0;
  uint64_t oov_dropped = 0;
  uint64_t oov_marked = 0;

  uint64_t oov() const { return oov_passthrough + oov_dropped + oov_marked; }
  uint64_t total() const { return perturbed + oov(); }
  TokenCounts& operator+=(const TokenCounts& other);
};

struct PerturbOptions {
  OovPolicy oov_policy = OovPolicy::kPassthrough;
  std::string oov_marker = "<oov>";
};

// Perturbs each in-vocabulary token with its own stream keyed by
// (seed, doc_id, position). Tokens must already be case-normalized.
std::vector<std::string> PerturbTokens(const NeighborSearch& search,
                                       std::span<const std::string> tokens,
                                       PrivacyBudget budget, uint64_t seed,
                                       uint64_t doc_id,
                                       const PerturbOptions& options = {},
                                       TokenCounts* counts = nullptr);

}  // namespace privbias

#endif  // PRIVBIAS_MECHANISM_H_
