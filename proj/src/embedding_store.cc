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

#include "privbias/embedding_store.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <utility>

#include "privbias/errors.h"

namespace privbias {

EmbeddingStore::EmbeddingStore(std::vector<std::string> words,
                               std::vector<float> values, size_t dimension)
    : words_(std::move(words)), values_(std::move(values)), dimension_(dimension) {
  if (dimension_ == 0) throw InvalidArgument("embedding dimension must be >= 1");
  if (words_.empty()) throw InvalidArgument("embedding vocabulary is empty");
  if (values_.size() != words_.size() * dimension_) {
    throw InvalidArgument("embedding matrix has " + std::to_string(values_.size()) +
                          " values, expected " +
                          std::to_string(words_.size() * dimension_));
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("non-finite embedding coordinate");
  }
  index_.reserve(words_.size());
  for (size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) {
      throw InvalidArgument("duplicate word '" + words_[i] + "'");
    }
  }
}

std::span<const float> EmbeddingStore::Row(size_t index) const {
  if (index >= words_.size()) throw InvalidArgument("row index out of range");
  return std::span<const float>(values_).subspan(index * dimension_, dimension_);
}

std::optional<size_t> EmbeddingStore::IndexOf(std::string_view word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::span<const float>> EmbeddingStore::Lookup(
    std::string_view word) const {
  auto index = IndexOf(word);
  if (!index) return std::nullopt;
  return Row(*index);
}

namespace {

[[noreturn]] void FailAt(std::string_view source, size_t line_no,
                         const std::string& what) {
  throw ParseError(std::string(source) + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

EmbeddingStore ParseEmbeddings(std::istream& in, std::optional<size_t> expected_dim,
                               std::string_view source_name) {
  std::vector<std::string> words;
  std::vector<float> values;
  std::unordered_map<std::string, size_t> first_seen;
  size_t dim = expected_dim.value_or(0);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    const char* p = line.data();
    const char* end = p + line.size();
    auto skip_sep = [&] {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
    };
    skip_sep();
    const char* word_begin = p;
    while (p < end && *p != ' ' && *p != '\t') ++p;
    std::string word(word_begin, p);

    size_t coords = 0;
    for (;;) {
      skip_sep();
      if (p >= end) break;
      float v = 0.0f;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t')) {
        const char* tok_end = p;
        while (tok_end < end && *tok_end != ' ' && *tok_end != '\t') ++tok_end;
        FailAt(source_name, line_no,
               "non-numeric coordinate '" + std::string(p, tok_end) + "'");
      }
      if (!std::isfinite(v)) FailAt(source_name, line_no, "non-finite coordinate");
      values.push_back(v);
      ++coords;
      p = next;
    }
    if (coords == 0) FailAt(source_name, line_no, "record has no coordinates");
    if (dim == 0) dim = coords;
    if (coords != dim) {
      FailAt(source_name, line_no,
             "dimension mismatch: got " + std::to_string(coords) + ", expected " +
                 std::to_string(dim));
    }
    auto [it, inserted] = first_seen.emplace(word, line_no);
    if (!inserted) {
      FailAt(source_name, line_no,
             "duplicate word '" + word + "' (first seen at line " +
                 std::to_string(it->second) + ")");
    }
    words.push_back(std::move(word));
  }
  if (words.empty()) throw ParseError(std::string(source_name) + ": empty embedding file");
  return EmbeddingStore(std::move(words), std::move(values), dim);
}

EmbeddingStore LoadEmbeddings(const std::filesystem::path& path,
                              std::optional<size_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open embedding file " + path.string());
  return ParseEmbeddings(in, expected_dim, path.string());
}

void WriteEmbeddings(const EmbeddingStore& store, std::ostream& out) {
  char buf[64];
  for (size_t i = 0; i < store.size(); ++i) {
    out << store.Word(i);
    for (float v : store.Row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, ptr - buf);
    }
    out << '\n';
  }
}

double SquaredDistance(std::span<const double> query, std::span<const float> row) {
  // Four independent partial sums so the loop vectorizes without
  // reassociation flags. The summation order is fixed, which keeps every
  // search path bit-identical.
  double acc[4] = {};
  const size_t n = row.size();
  size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    for (size_t t = 0; t < 4; ++t) {
      const double diff = query[j + t] - static_cast<double>(row[j + t]);
      acc[t] += diff * diff;
    }
  }
  for (; j < n; ++j) {
    const double diff = query[j] - static_cast<double>(row[j]);
    acc[0] += diff * diff;
  }
  return (acc[0] + acc[2]) + (acc[1] + acc[3]);
}

namespace {

void CheckQuery(const EmbeddingStore& store, std::span<const double> query) {
  if (query.size() != store.dimension()) {
    throw InvalidArgument("query has " + std::to_string(query.size()) +
                          " components, store dimension is " +
                          std::to_string(store.dimension()));
  }
}

}  // namespace

size_t NearestExactIndex(const EmbeddingStore& store, std::span<const double> query) {
  CheckQuery(store, query);
  size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < store.size(); ++i) {
    const double d2 = SquaredDistance(query, store.Row(i));
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

std::vector<NeighborResult> NearestExact(const EmbeddingStore& store,
                                         std::span<const double> query, size_t k) {
  CheckQuery(store, query);
  if (k == 0 || k > store.size()) {
    throw InvalidArgument("k must be in [1, " + std::to_string(store.size()) + "]");
  }
  // Max-heap on (d2, index) keeps the k best seen so far.
  using Entry = std::pair<double, size_t>;
  std::priority_queue<Entry> heap;
  for (size_t i = 0; i < store.size(); ++i) {
    const double d2 = SquaredDistance(query, store.Row(i));
    if (heap.size() < k) {
      heap.emplace(d2, i);
    } else if (Entry(d2, i) < heap.top()) {
      heap.pop();
      heap.emplace(d2, i);
    }
  }
  std::vector<NeighborResult> out;
  out.reserve(k);
  while (!heap.empty()) {
    const auto [d2, i] = heap.top();
    heap.pop();
    out.push_back({store.Word(i), i, std::sqrt(d2)});
  }
  std::sort(out.begin(), out.end(), [](const NeighborResult& a, const NeighborResult& b) {
    return std::tie(a.distance, a.index) < std::tie(b.distance, b.index);
  });
  return out;
}

}  // namespace privbias
