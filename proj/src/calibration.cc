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

#include "privbias/calibration.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "privbias/errors.h"
#include "privbias/parallel.h"

namespace privbias {

std::vector<double> DeniabilityStats::NwValues() const {
  return std::vector<double>(n_w.begin(), n_w.end());
}

std::vector<double> DeniabilityStats::SwValues() const {
  return std::vector<double>(s_w.begin(), s_w.end());
}

std::vector<size_t> DrawSubset(size_t n, size_t count, uint64_t seed) {
  if (count > n) {
    throw InvalidArgument("sample size " + std::to_string(count) +
                          " exceeds vocabulary size " + std::to_string(n));
  }
  std::vector<size_t> pool(n);
  std::iota(pool.begin(), pool.end(), size_t{0});
  RngStream rng({seed, StreamDomain::kSubsetDraw, 0, 0});
  for (size_t i = 0; i < count; ++i) {
    const size_t j = i + rng.UniformInt(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

DeniabilityStats EstimateDeniability(const NeighborSearch& search,
                                     PrivacyBudget budget, size_t sample_size,
                                     size_t queries, uint64_t seed,
                                     size_t parallelism) {
  if (queries == 0) throw InvalidArgument("queries must be >= 1");
  DeniabilityStats stats;
  stats.epsilon = budget;
  stats.queries_per_word = queries;
  stats.sample_words = DrawSubset(search.store().size(), sample_size, seed);
  stats.n_w.assign(sample_size, 0);
  stats.s_w.assign(sample_size, 0);

  ParallelFor(sample_size, parallelism, [&](size_t i) {
    const size_t word = stats.sample_words[i];
    std::vector<size_t> outputs(queries, word);
    if (!budget.is_infinite()) {
      const size_t d = search.store().dimension();
      std::vector<double> batch(queries * d);
      for (size_t q = 0; q < queries; ++q) {
        RngStream rng({seed, StreamDomain::kCalibration, word, q});
        NoisyQuery(search.store(), word, budget, rng, std::span(batch).subspan(q * d, d));
      }
      outputs = search.NearestIndexBatch(batch);
    }
    stats.n_w[i] = static_cast<uint32_t>(std::count(outputs.begin(), outputs.end(), word));
    std::sort(outputs.begin(), outputs.end());
    stats.s_w[i] = static_cast<uint32_t>(
        std::unique(outputs.begin(), outputs.end()) - outputs.begin());
  });
  return stats;
}

double Mean(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double Skewness(std::span<const double> values) {
  if (values.size() < 3) throw InvalidArgument("skewness needs at least 3 values");
  const double mean = Mean(values);
  double m2 = 0.0;
  double m3 = 0.0;
  for (double v : values) {
    const double dev = v - mean;
    m2 += dev * dev;
    m3 += dev * dev * dev;
  }
  const double n = static_cast<double>(values.size());
  m2 /= n;
  m3 /= n;
  if (m2 == 0.0) throw InvalidArgument("skewness undefined for constant input");
  return m3 / std::pow(m2, 1.5);
}

HistogramData Histogram(std::span<const double> values, size_t bins) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  HistogramData hist;
  hist.counts.assign(bins, 0);
  if (values.empty()) {
    for (size_t b = 0; b <= bins; ++b) hist.bin_edges.push_back(static_cast<double>(b));
    return hist;
  }
  auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  double lo = *min_it;
  double hi = *max_it;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  for (size_t b = 0; b < bins; ++b) hist.bin_edges.push_back(lo + width * b);
  hist.bin_edges.push_back(hi);
  for (double v : values) {
    auto bin = static_cast<size_t>((v - lo) / width);
    hist.counts[std::min(bin, bins - 1)]++;
  }
  return hist;
}

HistogramData Histogram(const DeniabilityStats& stats, DeniabilityStatistic which,
                        size_t bins) {
  const auto values =
      which == DeniabilityStatistic::kNw ? stats.NwValues() : stats.SwValues();
  return Histogram(values, bins);
}

SkewCriterion CheckSkewCriterion(const DeniabilityStats& stats) {
  SkewCriterion result;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  result.skew_nw = nan;
  result.skew_sw = nan;
  std::ostringstream diag;
  diag << "epsilon=" << stats.epsilon.ToString() << ": ";
  try {
    result.skew_nw = Skewness(stats.NwValues());
  } catch (const InvalidArgument& e) {
    diag << "skew(N_w) not evaluable (" << e.what() << "); ";
  }
  try {
    result.skew_sw = Skewness(stats.SwValues());
  } catch (const InvalidArgument& e) {
    diag << "skew(S_w) not evaluable (" << e.what() << "); ";
  }
  if (std::isnan(result.skew_nw) || std::isnan(result.skew_sw)) {
    result.verdict = SkewVerdict::kNotEvaluable;
    result.diagnostics = diag.str();
    return result;
  }
  const bool nw_ok = result.skew_nw > 0.0;
  const bool sw_ok = result.skew_sw < 0.0;
  result.verdict = nw_ok && sw_ok ? SkewVerdict::kPass : SkewVerdict::kFail;
  diag << "skew(N_w)=" << result.skew_nw << (nw_ok ? " > 0" : " <= 0 (want > 0)")
       << ", skew(S_w)=" << result.skew_sw << (sw_ok ? " < 0" : " >= 0 (want < 0)");
  result.diagnostics = diag.str();
  return result;
}

double WelchGreaterPValue(std::span<const double> larger,
                          std::span<const double> smaller) {
  if (larger.size() < 2 || smaller.size() < 2) {
    throw InvalidArgument("Welch test needs at least two values per sample");
  }
  auto variance = [](std::span<const double> v, double mean) {
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size() - 1);
  };
  const double ma = Mean(larger);
  const double mb = Mean(smaller);
  const double na = static_cast<double>(larger.size());
  const double nb = static_cast<double>(smaller.size());
  const double va = variance(larger, ma) / na;
  const double vb = variance(smaller, mb) / nb;
  const double se2 = va + vb;
  if (se2 == 0.0) return ma > mb ? 0.0 : 1.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  boost::math::students_t dist(df);
  return boost::math::cdf(boost::math::complement(dist, t));
}

}  // namespace privbias
