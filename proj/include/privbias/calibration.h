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

// Plausible-deniability statistics for choosing epsilon.
//
// For a uniformly drawn subset of the vocabulary, every word is pushed
// through the mechanism `queries` times:
//   N_w = number of outputs equal to w        (high => weak privacy)
//   S_w = number of distinct outputs           (high => strong privacy)
// A budget is considered reasonable when N_w is positively skewed and S_w
// negatively skewed across the subset.

#ifndef PRIVBIAS_CALIBRATION_H_
#define PRIVBIAS_CALIBRATION_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "privbias/mechanism.h"
#include "privbias/nearest_index.h"

namespace privbias {

struct DeniabilityStats {
  PrivacyBudget epsilon = PrivacyBudget::Infinite();
  std::vector<size_t> sample_words;  // vocabulary indices, in draw order
  size_t queries_per_word = 0;
  std::vector<uint32_t> n_w;
  std::vector<uint32_t> s_w;

  std::vector<double> NwValues() const;
  std::vector<double> SwValues() const;
};

// Desk-scale defaults; the full-scale protocol is 10000 words x 1000 queries.
inline constexpr size_t kDeskSampleSize = 1000;
inline constexpr size_t kDeskQueries = 100;
inline constexpr size_t kFullSampleSize = 10000;
inline constexpr size_t kFullQueries = 1000;

// Draws `sample_size` distinct words uniformly (seeded), then queries each one
// `queries` times, query q of word w using stream (seed, w, q). Results do not
// depend on `parallelism`. Throws InvalidArgument if sample_size > |V|.
DeniabilityStats EstimateDeniability(const NeighborSearch& search,
                                     PrivacyBudget budget, size_t sample_size,
                                     size_t queries, uint64_t seed,
                                     size_t parallelism = 1);

// Uniform draw of `count` distinct indices from [0, n), partial Fisher-Yates.
std::vector<size_t> DrawSubset(size_t n, size_t count, uint64_t seed);

// Fisher-Pearson g1 = m3 / m2^(3/2) with population moments. Needs at least
// three values; throws InvalidArgument on constant input.
double Skewness(std::span<const double> values);

enum class DeniabilityStatistic { kNw, kSw };

struct HistogramData {
  std::vector<double> bin_edges;  // bins + 1 strictly increasing edges
  std::vector<uint64_t> counts;
};

// Equal-width bins over [min, max], last bin closed. Constant input gets a
// unit-wide range centered on the value.
HistogramData Histogram(std::span<const double> values, size_t bins);
HistogramData Histogram(const DeniabilityStats& stats, DeniabilityStatistic which,
                        size_t bins);

enum class SkewVerdict { kPass, kFail, kNotEvaluable };

struct SkewCriterion {
  SkewVerdict verdict = SkewVerdict::kNotEvaluable;
  double skew_nw = 0.0;  // NaN when not evaluable
  double skew_sw = 0.0;
  std::string diagnostics;
};

// Pass iff skew(N_w) > 0 and skew(S_w) < 0.
SkewCriterion CheckSkewCriterion(const DeniabilityStats& stats);

// One-sided Welch t-test for mean(larger) > mean(smaller). Returns the
// p-value; when both samples are constant it is 0 or 1 depending on the
// ordering of the means.
double WelchGreaterPValue(std::span<const double> larger,
                          std::span<const double> smaller);

double Mean(std::span<const double> values);

}  // namespace privbias

#endif  // PRIVBIAS_CALIBRATION_H_
