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

#include "privbias/nearest_index.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include <cblas.h>

#include "privbias/errors.h"
#include "privbias/rng.h"

namespace privbias {

namespace {

constexpr size_t kRowBlock = 4096;

std::vector<double> RowNorms(const EmbeddingStore& store) {
  std::vector<double> norms(store.size());
  for (size_t i = 0; i < store.size(); ++i) {
    double sum = 0.0;
    for (float v : store.Row(i)) sum += static_cast<double>(v) * v;
    norms[i] = sum;
  }
  return norms;
}

size_t QueryCount(const EmbeddingStore& store, std::span<const double> queries) {
  const size_t d = store.dimension();
  if (d == 0 || queries.size() % d != 0) {
    throw InvalidArgument("query batch of " + std::to_string(queries.size()) +
                          " values is not a multiple of the store dimension " +
                          std::to_string(d));
  }
  return queries.size() / d;
}

}  // namespace

std::vector<size_t> NeighborSearch::NearestIndexBatch(std::span<const double> queries) const {
  const size_t d = store().dimension();
  const size_t m = QueryCount(store(), queries);
  std::vector<size_t> out(m);
  for (size_t i = 0; i < m; ++i) out[i] = NearestIndex(queries.subspan(i * d, d));
  return out;
}

std::vector<size_t> NearestExactIndexBatch(const EmbeddingStore& store,
                                           std::span<const double> queries,
                                           std::span<const double> row_norms) {
  const size_t d = store.dimension();
  const size_t n = store.size();
  const size_t m = QueryCount(store, queries);
  if (m == 0) return {};
  std::vector<double> own;
  if (row_norms.empty()) {
    own = RowNorms(store);
    row_norms = own;
  }
  const double max_norm =
      std::sqrt(*std::max_element(row_norms.begin(), row_norms.end()));

  // Score s(y) = |y|^2 - 2 q.y orders rows like the distance does. A float
  // dot product of length d is within (d + 2) u |q| |y| of the real one.
  const double u = std::ldexp(1.0, -24);
  std::vector<float> qf(queries.begin(), queries.end());
  std::vector<double> margin(m);
  for (size_t i = 0; i < m; ++i) {
    double sq = 0.0;
    for (double v : queries.subspan(i * d, d)) sq += v * v;
    const double qn = std::sqrt(sq);
    const double err = 2.0 * (static_cast<double>(d) + 4.0) * u * qn * max_norm;
    margin[i] = 4.0 * err + 1e-9 * (qn + max_norm) * (qn + max_norm);
  }

  using Scored = std::pair<double, uint32_t>;
  std::vector<double> best(m, std::numeric_limits<double>::infinity());
  std::vector<std::vector<Scored>> candidates(m);
  std::vector<float> block(m * std::min(n, kRowBlock));
  for (size_t start = 0; start < n; start += kRowBlock) {
    const size_t rows = std::min(kRowBlock, n - start);
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(m),
                static_cast<int>(rows), static_cast<int>(d), 1.0f, qf.data(),
                static_cast<int>(d), store.values().data() + start * d, static_cast<int>(d),
                0.0f, block.data(), static_cast<int>(rows));
    for (size_t i = 0; i < m; ++i) {
      const float* dots = block.data() + i * rows;
      auto& cand = candidates[i];
      for (size_t r = 0; r < rows; ++r) {
        const double score = row_norms[start + r] - 2.0 * static_cast<double>(dots[r]);
        if (score <= best[i] + margin[i]) {
          cand.emplace_back(score, static_cast<uint32_t>(start + r));
          best[i] = std::min(best[i], score);
        }
      }
      if (cand.size() > 64) {
        const double cut = best[i] + margin[i];
        std::erase_if(cand, [cut](const Scored& c) { return c.first > cut; });
      }
    }
  }

  std::vector<size_t> out(m, 0);
  for (size_t i = 0; i < m; ++i) {
    const auto query = queries.subspan(i * d, d);
    const double cut = best[i] + margin[i];
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const auto& [score, id] : candidates[i]) {
      if (score > cut) continue;
      const double d2 = SquaredDistance(query, store.Row(id));
      if (d2 < best_d2 || (d2 == best_d2 && id < out[i])) {
        best_d2 = d2;
        out[i] = id;
      }
    }
  }
  return out;
}

ExactSearch::ExactSearch(std::shared_ptr<const EmbeddingStore> store)
    : store_(std::move(store)) {
  if (!store_) throw InvalidArgument("ExactSearch needs a store");
  row_norms_ = RowNorms(*store_);
}

std::vector<size_t> ExactSearch::NearestIndexBatch(std::span<const double> queries) const {
  return NearestExactIndexBatch(*store_, queries, row_norms_);
}

std::vector<NeighborResult> ExactSearch::Nearest(std::span<const double> query,
                                                 size_t k) const {
  return NearestExact(*store_, query, k);
}

size_t ExactSearch::NearestIndex(std::span<const double> query) const {
  return NearestExactIndex(*store_, query);
}

// Reusable visited-marker arrays. Each query checks one out, so concurrent
// searches never share a marker array.
class HnswIndex::VisitedPool {
 public:
  explicit VisitedPool(size_t n) : n_(n) {}

  struct Lease {
    std::vector<uint16_t> marks;
    uint16_t epoch = 0;

    // Returns true the first time a node is seen during this lease.
    bool Visit(uint32_t node) {
      if (marks[node] == epoch) return false;
      marks[node] = epoch;
      return true;
    }
  };

  Lease Acquire() {
    Lease lease;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!free_.empty()) {
        lease = std::move(free_.back());
        free_.pop_back();
      }
    }
    if (lease.marks.size() != n_) {
      lease.marks.assign(n_, 0);
      lease.epoch = 0;
    }
    if (++lease.epoch == 0) {
      std::fill(lease.marks.begin(), lease.marks.end(), 0);
      lease.epoch = 1;
    }
    return lease;
  }

  void Release(Lease lease) {
    std::lock_guard<std::mutex> lock(mu_);
    free_.push_back(std::move(lease));
  }

 private:
  size_t n_;
  std::mutex mu_;
  std::vector<Lease> free_;
};

namespace {

float FloatSquaredDistance(const float* a, const float* b, size_t dim) {
  float acc[8] = {};
  size_t j = 0;
  for (; j + 8 <= dim; j += 8) {
    for (size_t t = 0; t < 8; ++t) {
      const float diff = a[j + t] - b[j + t];
      acc[t] += diff * diff;
    }
  }
  float tail = 0.0f;
  for (; j < dim; ++j) {
    const float diff = a[j] - b[j];
    tail += diff * diff;
  }
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) +
         ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

}  // namespace

HnswIndex::HnswIndex(std::shared_ptr<const EmbeddingStore> store, IndexOptions options)
    : store_(std::move(store)), options_(options) {
  if (!store_) throw InvalidArgument("HnswIndex needs a store");
  if (options_.max_degree < 2) throw InvalidArgument("max_degree must be >= 2");
  if (options_.ef_search == 0 || options_.ef_construction == 0) {
    throw InvalidArgument("ef parameters must be positive");
  }
  if (store_->size() > std::numeric_limits<uint32_t>::max()) {
    throw InvalidArgument("vocabulary too large for the graph index");
  }
  dim_ = store_->dimension();
  visited_ = std::make_unique<VisitedPool>(store_->size());
  if (options_.exact) return;

  const size_t n = store_->size();
  links_.resize(n);
  RngStream rng({options_.seed, StreamDomain::kIndexBuild, 0, 0});
  const double level_mult = 1.0 / std::log(static_cast<double>(options_.max_degree));
  for (uint32_t node = 0; node < n; ++node) {
    const int level = static_cast<int>(-std::log(rng.Uniform()) * level_mult);
    Insert(node, level);
  }
}

HnswIndex::~HnswIndex() = default;

float HnswIndex::Distance(std::span<const float> query, uint32_t node) const {
  return FloatSquaredDistance(query.data(), store_->values().data() + node * dim_, dim_);
}

std::vector<uint32_t>& HnswIndex::Links(uint32_t node, int level) {
  return links_[node][level];
}

const std::vector<uint32_t>& HnswIndex::Links(uint32_t node, int level) const {
  return links_[node][level];
}

uint32_t HnswIndex::GreedyDescend(std::span<const float> query, uint32_t entry,
                                  int from_level, int to_level) const {
  uint32_t cur = entry;
  float cur_dist = Distance(query, cur);
  for (int level = from_level; level >= to_level; --level) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (uint32_t nb : Links(cur, level)) {
        const float d = Distance(query, nb);
        if (d < cur_dist || (d == cur_dist && nb < cur)) {
          cur_dist = d;
          cur = nb;
          changed = true;
        }
      }
    }
  }
  return cur;
}

std::vector<HnswIndex::Candidate> HnswIndex::SearchLayer(std::span<const float> query,
                                                         uint32_t entry, size_t ef,
                                                         int level) const {
  auto lease = visited_->Acquire();
  // Frontier ordered nearest-first; results kept as a max-heap of size ef.
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
  std::priority_queue<Candidate> results;

  const float d0 = Distance(query, entry);
  lease.Visit(entry);
  frontier.emplace(d0, entry);
  results.emplace(d0, entry);

  while (!frontier.empty()) {
    const auto [dist, node] = frontier.top();
    if (dist > results.top().first && results.size() >= ef) break;
    frontier.pop();
    for (uint32_t nb : Links(node, level)) {
      if (!lease.Visit(nb)) continue;
      const float d = Distance(query, nb);
      if (results.size() < ef || d < results.top().first) {
        frontier.emplace(d, nb);
        results.emplace(d, nb);
        if (results.size() > ef) results.pop();
      }
    }
  }
  visited_->Release(std::move(lease));

  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<uint32_t> HnswIndex::SelectNeighbors(std::vector<Candidate> candidates,
                                                 size_t max_count) const {
  std::sort(candidates.begin(), candidates.end());
  std::vector<uint32_t> selected;
  selected.reserve(max_count);
  const float* base = store_->values().data();
  // Keep a candidate only if it is closer to the base point than to every
  // neighbor already kept; spreads links across directions.
  std::vector<uint32_t> pruned;
  for (const auto& [dist, node] : candidates) {
    if (selected.size() >= max_count) break;
    bool keep = true;
    for (uint32_t s : selected) {
      if (FloatSquaredDistance(base + node * dim_, base + s * dim_, dim_) < dist) {
        keep = false;
        break;
      }
    }
    (keep ? selected : pruned).push_back(node);
  }
  // Top up with the nearest pruned candidates.
  for (size_t i = 0; i < pruned.size() && selected.size() < max_count; ++i) {
    selected.push_back(pruned[i]);
  }
  return selected;
}

void HnswIndex::Insert(uint32_t node, int level) {
  links_[node].resize(level + 1);
  if (max_level_ < 0) {
    entry_point_ = node;
    max_level_ = level;
    return;
  }
  std::span<const float> query = store_->Row(node);
  uint32_t cur = entry_point_;
  if (level < max_level_) cur = GreedyDescend(query, cur, max_level_, level + 1);

  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto found = SearchLayer(query, cur, options_.ef_construction, l);
    cur = found.front().second;
    const size_t cap = l == 0 ? 2 * options_.max_degree : options_.max_degree;
    Links(node, l) = SelectNeighbors(found, options_.max_degree);
    for (uint32_t nb : Links(node, l)) {
      auto& nb_links = Links(nb, l);
      nb_links.push_back(node);
      if (nb_links.size() > cap) {
        std::span<const float> nb_vec = store_->Row(nb);
        std::vector<Candidate> pool;
        pool.reserve(nb_links.size());
        for (uint32_t x : nb_links) pool.emplace_back(Distance(nb_vec, x), x);
        nb_links = SelectNeighbors(std::move(pool), cap);
      }
    }
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_point_ = node;
  }
}

std::vector<uint32_t> HnswIndex::Candidates(std::span<const double> query,
                                            size_t k) const {
  std::vector<float> q(query.begin(), query.end());
  uint32_t cur = entry_point_;
  if (max_level_ > 0) cur = GreedyDescend(q, cur, max_level_, 1);
  auto found = SearchLayer(q, cur, std::max(options_.ef_search, k), 0);
  std::vector<uint32_t> ids;
  ids.reserve(found.size());
  for (const auto& c : found) ids.push_back(c.second);
  return ids;
}

std::vector<NeighborResult> HnswIndex::Nearest(std::span<const double> query,
                                               size_t k) const {
  if (options_.exact) return NearestExact(*store_, query, k);
  if (query.size() != dim_) {
    throw InvalidArgument("query has " + std::to_string(query.size()) +
                          " components, store dimension is " + std::to_string(dim_));
  }
  if (k == 0 || k > store_->size()) {
    throw InvalidArgument("k must be in [1, " + std::to_string(store_->size()) + "]");
  }
  auto ids = Candidates(query, k);
  // A disconnected remnant of the graph can leave fewer than k reachable nodes.
  if (ids.size() < k) return NearestExact(*store_, query, k);

  std::vector<NeighborResult> out;
  out.reserve(ids.size());
  for (uint32_t id : ids) {
    out.push_back({"", id, std::sqrt(SquaredDistance(query, store_->Row(id)))});
  }
  std::sort(out.begin(), out.end(), [](const NeighborResult& a, const NeighborResult& b) {
    return std::tie(a.distance, a.index) < std::tie(b.distance, b.index);
  });
  out.resize(k);
  for (auto& r : out) r.word = store_->Word(r.index);
  return out;
}

size_t HnswIndex::NearestIndex(std::span<const double> query) const {
  if (options_.exact) return NearestExactIndex(*store_, query);
  if (query.size() != dim_) {
    throw InvalidArgument("query has " + std::to_string(query.size()) +
                          " components, store dimension is " + std::to_string(dim_));
  }
  size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (uint32_t id : Candidates(query, 1)) {
    const double d2 = SquaredDistance(query, store_->Row(id));
    if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
      best_d2 = d2;
      best = id;
    }
  }
  return best;
}

std::vector<size_t> HnswIndex::NearestIndexBatch(std::span<const double> queries) const {
  if (options_.exact) return NearestExactIndexBatch(*store_, queries);
  return NeighborSearch::NearestIndexBatch(queries);
}

std::unique_ptr<NeighborSearch> BuildIndex(std::shared_ptr<const EmbeddingStore> store,
                                           const IndexOptions& options) {
  if (options.exact) return std::make_unique<ExactSearch>(std::move(store));
  return std::make_unique<HnswIndex>(std::move(store), options);
}

}  // namespace privbias
