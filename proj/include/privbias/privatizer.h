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

#ifndef PRIVBIAS_PRIVATIZER_H_
#define PRIVBIAS_PRIVATIZER_H_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "privbias/mechanism.h"
#include "privbias/nearest_index.h"

namespace privbias {

// Splits on whitespace, then peels leading and trailing punctuation off each
// chunk as one token per character. A chunk made only of punctuation ("--",
// "...", "–") stays whole; inner punctuation ("port-au-prince") is kept.
// Lowercasing covers ASCII letters only.
std::vector<std::string> Tokenize(std::string_view text, bool lowercase = true);

// Single-space join; punctuation is not reattached.
std::string Detokenize(std::span<const std::string> tokens);

struct Document {
  uint64_t doc_id = 0;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

struct PrivatizationConfig {
  PrivacyBudget epsilon = PrivacyBudget::Infinite();
  uint64_t seed = 0;
  OovPolicy oov_policy = OovPolicy::kPassthrough;
  std::string oov_marker = "<oov>";
  bool lowercase = true;
};

Document PrivatizeDocument(const NeighborSearch& search, const Document& doc,
                           const PrivatizationConfig& cfg,
                           TokenCounts* counts = nullptr);

enum class CorpusFormat { kJsonl, kText };

CorpusFormat ParseCorpusFormat(std::string_view text);

// Streams documents out of newline-delimited JSON ({"id": <uint>, "text": ...})
// or plain text (one document per line, ids 0, 1, 2, ...). Blank lines are
// skipped in both formats.
class DocumentReader {
 public:
  DocumentReader(std::istream& in, CorpusFormat format,
                 std::string source_name = "<input>");

  // Throws ParseError naming the record on malformed input.
  std::optional<Document> Next();

 private:
  std::istream& in_;
  CorpusFormat format_;
  std::string source_name_;
  uint64_t line_no_ = 0;
  uint64_t next_text_id_ = 0;
};

void WriteDocument(std::ostream& out, const Document& doc, CorpusFormat format);

struct RunManifest {
  PrivatizationConfig config;
  bool exact_nn = true;
  std::string embeddings_path;
  std::string embeddings_sha256;
  uint64_t vocabulary_size = 0;
  uint64_t dimension = 0;
  uint64_t documents = 0;
  uint64_t tokens_total = 0;
  TokenCounts counts;

  nlohmann::json ToJson() const;
};

// Privatizes documents in input order. Batches of `batch_size` documents are
// fanned out over `parallelism` workers; the output is byte-identical for any
// parallelism. Throws InvalidArgument on a duplicate doc_id.
RunManifest PrivatizeCorpus(const NeighborSearch& search, DocumentReader& reader,
                            std::ostream& out, CorpusFormat out_format,
                            const PrivatizationConfig& cfg, size_t parallelism,
                            size_t batch_size = 256);

std::vector<Document> PrivatizeCorpus(const NeighborSearch& search,
                                      std::span<const Document> docs,
                                      const PrivatizationConfig& cfg,
                                      size_t parallelism,
                                      RunManifest* manifest = nullptr);

// Hex SHA-256 of a file's bytes.
std::string Sha256File(const std::filesystem::path& path);

}  // namespace privbias

#endif  // PRIVBIAS_PRIVATIZER_H_
