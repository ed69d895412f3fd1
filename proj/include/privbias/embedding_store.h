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

#ifndef PRIVBIAS_EMBEDDING_STORE_H_
#define PRIVBIAS_EMBEDDING_STORE_H_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace privbias {

struct NeighborResult {
  std::string word;
  size_t index = 0;
  // Euclidean, not squared.
  double distance = 0.0;

  friend bool operator==(const NeighborResult&, const NeighborResult&) = default;
};

// Immutable vocabulary plus a |V| x d row-major matrix of coordinates.
//
// Coordinates are held in single precision (text embedding files carry about
// six significant digits); every distance is accumulated in double. Vectors
// are kept exactly as loaded, without normalization.
class EmbeddingStore {
 public:
  // Validates uniqueness of words, finiteness of coordinates and
  // values.size() == words.size() * dimension. Throws InvalidArgument.
  EmbeddingStore(std::vector<std::string> words, std::vector<float> values,
                 size_t dimension);

  size_t size() const { return words_.size(); }
  size_t dimension() const { return dimension_; }

  const std::string& Word(size_t index) const { return words_.at(index); }
  const std::vector<std::string>& words() const { return words_; }
  std::span<const float> Row(size_t index) const;
  // Entire matrix, row-major.
  std::span<const float> values() const { return values_; }

  // Exact-match lookup. Case normalization is the tokenizer's job.
  std::optional<size_t> IndexOf(std::string_view word) const;
  std::optional<std::span<const float>> Lookup(std::string_view word) const;
  bool Contains(std::string_view word) const { return IndexOf(word).has_value(); }

 private:
  struct StringHash {
    using is_transparent = void;
    size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> words_;
  std::vector<float> values_;
  size_t dimension_;
  std::unordered_map<std::string, size_t, StringHash, std::equal_to<>> index_;
};

// Reads the GloVe text format: one `word c1 ... cd` record per line, no
// header. Blank lines are skipped. The dimension is taken from the first
// record and enforced on every later one, and on `expected_dim` if given.
// Throws ParseError naming the offending line.
EmbeddingStore LoadEmbeddings(const std::filesystem::path& path,
                              std::optional<size_t> expected_dim = {});
EmbeddingStore ParseEmbeddings(std::istream& in,
                               std::optional<size_t> expected_dim = {},
                               std::string_view source_name = "<stream>");

// Writes the store back in the same text format (shortest round-trip floats).
void WriteEmbeddings(const EmbeddingStore& store, std::ostream& out);

// Squared Euclidean distance, accumulated in double.
double SquaredDistance(std::span<const double> query, std::span<const float> row);

// The k closest vocabulary entries, sorted by (distance, index). Brute force;
// this is the reference every accelerated search is checked against.
std::vector<NeighborResult> NearestExact(const EmbeddingStore& store,
                                         std::span<const double> query,
                                         size_t k);

// Index of the single closest entry (lowest index on ties).
size_t NearestExactIndex(const EmbeddingStore& store,
                         std::span<const double> query);

}  // namespace privbias

#endif  // PRIVBIAS_EMBEDDING_STORE_H_
