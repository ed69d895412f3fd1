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

#ifndef PRIVBIAS_NEAREST_INDEX_H_
#define PRIVBIAS_NEAREST_INDEX_H_

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "privbias/embedding_store.h"

namespace privbias {

// Read-only nearest-neighbor search over an EmbeddingStore. Implementations
// are immutable after construction and safe to query from many threads.
class NeighborSearch {
 public:
  virtual ~NeighborSearch() = default;

  virtual const EmbeddingStore& store() const = 0;
  // Sorted by (distance, index); distances are exact Euclidean.
  virtual std::vector<NeighborResult> Nearest(std::span<const double> query,
                                              size_t k) const = 0;
  virtual size_t NearestIndex(std::span<const double> query) const = 0;
  // `queries` holds row-major queries. Same answers as NearestIndex on each.
  virtual std::vector<size_t> NearestIndexBatch(std::span<const double> queries) const;
  virtual bool exact() const = 0;
};

// Batched brute force: single-precision matrix products pick candidates
// within a proven rounding margin, which are then re-ranked exactly. Output
// equals NearestExactIndex on every query. `row_norms` (squared, double)
// is computed when empty.
std::vector<size_t> NearestExactIndexBatch(const EmbeddingStore& store,
                                           std::span<const double> queries,
                                           std::span<const double> row_norms = {});

class ExactSearch final : public NeighborSearch {
 public:
  explicit ExactSearch(std::shared_ptr<const EmbeddingStore> store);

  const EmbeddingStore& store() const override { return *store_; }
  std::vector<NeighborResult> Nearest(std::span<const double> query,
                                      size_t k) const override;
  size_t NearestIndex(std::span<const double> query) const override;
  std::vector<size_t> NearestIndexBatch(std::span<const double> queries) const override;
  bool exact() const override { return true; }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  std::vector<double> row_norms_;
};

struct IndexOptions {
  // Forces brute force; output is then identical to NearestExact.
  bool exact = false;
  // Graph out-degree on upper layers; layer 0 allows twice this.
  size_t max_degree = 16;
  size_t ef_construction = 100;
  size_t ef_search = 64;
  uint64_t seed = 0x5eed;
};

// Hierarchical navigable small-world graph. Traversal uses single-precision
// distances; the candidates reached are then re-ranked with the same double
// precision distance as NearestExact, so whenever the true neighbor is
// reached the result is bit-identical to the exact path.
class HnswIndex final : public NeighborSearch {
 public:
  HnswIndex(std::shared_ptr<const EmbeddingStore> store, IndexOptions options = {});
  ~HnswIndex() override;

  const EmbeddingStore& store() const override { return *store_; }
  std::vector<NeighborResult> Nearest(std::span<const double> query,
                                      size_t k) const override;
  size_t NearestIndex(std::span<const double> query) const override;
  std::vector<size_t> NearestIndexBatch(std::span<const double> queries) const override;
  bool exact() const override { return options_.exact; }

  const IndexOptions& options() const { return options_; }
  int max_level() const { return max_level_; }

 private:
  using Candidate = std::pair<float, uint32_t>;
  class VisitedPool;

  float Distance(std::span<const float> query, uint32_t node) const;
  std::vector<uint32_t>& Links(uint32_t node, int level);
  const std::vector<uint32_t>& Links(uint32_t node, int level) const;
  uint32_t GreedyDescend(std::span<const float> query, uint32_t entry,
                         int from_level, int to_level) const;
  std::vector<Candidate> SearchLayer(std::span<const float> query, uint32_t entry,
                                     size_t ef, int level) const;

  std::vector<uint32_t> SelectNeighbors(std::vector<Candidate> candidates,
                                        size_t max_count) const;
  void Insert(uint32_t node, int level);
  std::vector<uint32_t> Candidates(std::span<const double> query, size_t k) const;

  std::shared_ptr<const EmbeddingStore> store_;
  IndexOptions options_;
  size_t dim_;
  // links_[node][level] is the adjacency list of node on that level.
  std::vector<std::vector<std::vector<uint32_t>>> links_;
  uint32_t entry_point_ = 0;
  int max_level_ = -1;
  std::unique_ptr<VisitedPool> visited_;
};

// Exact search when options.exact, otherwise an HNSW graph.
std::unique_ptr<NeighborSearch> BuildIndex(std::shared_ptr<const EmbeddingStore> store,
                                           const IndexOptions& options = {});

}  // namespace privbias

#endif  // PRIVBIAS_NEAREST_INDEX_H_
