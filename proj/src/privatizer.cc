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

#include "privbias/privatizer.h"

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include <openssl/evp.h>

#include "privbias/errors.h"
#include "privbias/parallel.h"

namespace privbias {
namespace {

bool IsSpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Decodes the code point starting at s[pos]; returns its byte length.
// Malformed bytes decode as themselves with length 1.
size_t DecodeAt(std::string_view s, size_t pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  size_t len = 1;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    cp = b0;
    return 1;
  }
  if (pos + len > s.size()) {
    cp = b0;
    return 1;
  }
  for (size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) {
      cp = b0;
      return 1;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  return len;
}

// Start of the code point that ends at s[end - 1].
size_t LastCodePointStart(std::string_view s, size_t end) {
  size_t pos = end - 1;
  size_t steps = 0;
  while (pos > 0 && steps < 3 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) {
    --pos;
    ++steps;
  }
  return pos;
}

bool IsPunct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  switch (cp) {
    case 0x00A1:  // ¡
    case 0x00A7:  // §
    case 0x00AB:  // «
    case 0x00B6:  // ¶
    case 0x00B7:  // ·
    case 0x00BB:  // »
    case 0x00BF:  // ¿
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x205E) ||  // dashes, quotes, ellipsis
         (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011);
}

void SplitChunk(std::string_view chunk, bool lowercase, std::vector<std::string>& out) {
  auto emit = [&](std::string_view piece) {
    std::string token(piece);
    if (lowercase) {
      for (char& c : token) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      }
    }
    out.push_back(std::move(token));
  };

  // Leading punctuation.
  size_t begin = 0;
  std::vector<std::string_view> leading;
  while (begin < chunk.size()) {
    char32_t cp;
    const size_t len = DecodeAt(chunk, begin, cp);
    if (!IsPunct(cp)) break;
    leading.push_back(chunk.substr(begin, len));
    begin += len;
  }
  if (begin == chunk.size()) {
    // Entirely punctuation: one token.
    emit(chunk);
    return;
  }
  // Trailing punctuation, collected right to left.
  size_t end = chunk.size();
  std::vector<std::string_view> trailing;
  while (end > begin) {
    const size_t start = LastCodePointStart(chunk, end);
    char32_t cp;
    DecodeAt(chunk, start, cp);
    if (!IsPunct(cp)) break;
    trailing.push_back(chunk.substr(start, end - start));
    end = start;
  }
  for (auto piece : leading) emit(piece);
  emit(chunk.substr(begin, end - begin));
  for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) emit(*it);
}

}  // namespace

std::vector<std::string> Tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && IsSpace(static_cast<unsigned char>(text[pos]))) ++pos;
    const size_t start = pos;
    while (pos < text.size() && !IsSpace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos > start) SplitChunk(text.substr(start, pos - start), lowercase, tokens);
  }
  return tokens;
}

std::string Detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Document PrivatizeDocument(const NeighborSearch& search, const Document& doc,
                           const PrivatizationConfig& cfg, TokenCounts* counts) {
  const auto tokens = Tokenize(doc.text, cfg.lowercase);
  PerturbOptions options{cfg.oov_policy, cfg.oov_marker};
  const auto out = PerturbTokens(search, tokens, cfg.epsilon, cfg.seed, doc.doc_id,
                                 options, counts);
  return {doc.doc_id, Detokenize(out)};
}

CorpusFormat ParseCorpusFormat(std::string_view text) {
  if (text == "jsonl") return CorpusFormat::kJsonl;
  if (text == "txt" || text == "text") return CorpusFormat::kText;
  throw InvalidArgument("unknown corpus format '" + std::string(text) + "'");
}

DocumentReader::DocumentReader(std::istream& in, CorpusFormat format,
                               std::string source_name)
    : in_(in), format_(format), source_name_(std::move(source_name)) {}

std::optional<Document> DocumentReader::Next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (format_ == CorpusFormat::kText) return Document{next_text_id_++, line};

    const std::string where = source_name_ + ":" + std::to_string(line_no_);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": invalid JSON record: " + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record.contains("text")) {
      throw ParseError(where + ": record needs \"id\" and \"text\" fields");
    }
    const auto& id = record["id"];
    if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<int64_t>() >= 0)) {
      throw ParseError(where + ": \"id\" must be a non-negative integer");
    }
    if (!record["text"].is_string()) {
      throw ParseError(where + ": \"text\" must be a string");
    }
    return Document{id.get<uint64_t>(), record["text"].get<std::string>()};
  }
  if (in_.bad()) throw ParseError(source_name_ + ": read error");
  return std::nullopt;
}

void WriteDocument(std::ostream& out, const Document& doc, CorpusFormat format) {
  if (format == CorpusFormat::kText) {
    out << doc.text << '\n';
    return;
  }
  nlohmann::json record = {{"id", doc.doc_id}, {"text", doc.text}};
  out << record.dump() << '\n';
}

nlohmann::json RunManifest::ToJson() const {
  return {
      {"config",
       {{"epsilon", config.epsilon.ToString()},
        {"seed", config.seed},
        {"oov_policy", std::string(ToString(config.oov_policy))},
        {"oov_marker", config.oov_marker},
        {"lowercase", config.lowercase},
        {"exact_nn", exact_nn}}},
      {"embeddings",
       {{"path", embeddings_path},
        {"sha256", embeddings_sha256},
        {"vocabulary_size", vocabulary_size},
        {"dimension", dimension}}},
      {"counts",
       {{"documents", documents},
        {"tokens_total", tokens_total},
        {"tokens_perturbed", counts.perturbed},
        {"tokens_oov", counts.oov()},
        {"oov_passed_through", counts.oov_passthrough},
        {"oov_dropped", counts.oov_dropped},
        {"oov_marked", counts.oov_marked}}},
  };
}

namespace {

// Shared by the streaming and in-memory entry points.
class BatchPrivatizer {
 public:
  BatchPrivatizer(const NeighborSearch& search, const PrivatizationConfig& cfg,
                  size_t parallelism, RunManifest& manifest)
      : search_(search), cfg_(cfg), parallelism_(parallelism), manifest_(manifest) {
    manifest_.config = cfg;
    manifest_.exact_nn = search.exact();
    manifest_.vocabulary_size = search.store().size();
    manifest_.dimension = search.store().dimension();
  }

  std::vector<Document> Run(std::span<const Document> batch) {
    for (const auto& doc : batch) {
      if (!seen_.insert(doc.doc_id).second) {
        throw InvalidArgument("duplicate doc_id " + std::to_string(doc.doc_id));
      }
    }
    std::vector<Document> out(batch.size());
    std::vector<TokenCounts> counts(batch.size());
    ParallelFor(batch.size(), parallelism_, [&](size_t i) {
      out[i] = PrivatizeDocument(search_, batch[i], cfg_, &counts[i]);
    });
    for (const auto& c : counts) manifest_.counts += c;
    manifest_.documents += batch.size();
    manifest_.tokens_total = manifest_.counts.total();
    return out;
  }

 private:
  const NeighborSearch& search_;
  const PrivatizationConfig& cfg_;
  size_t parallelism_;
  RunManifest& manifest_;
  std::unordered_set<uint64_t> seen_;
};

}  // namespace

RunManifest PrivatizeCorpus(const NeighborSearch& search, DocumentReader& reader,
                            std::ostream& out, CorpusFormat out_format,
                            const PrivatizationConfig& cfg, size_t parallelism,
                            size_t batch_size) {
  if (batch_size == 0) batch_size = 1;
  RunManifest manifest;
  BatchPrivatizer runner(search, cfg, parallelism, manifest);
  std::vector<Document> batch;
  batch.reserve(batch_size);
  auto flush = [&] {
    for (const auto& doc : runner.Run(batch)) WriteDocument(out, doc, out_format);
    batch.clear();
  };
  while (auto doc = reader.Next()) {
    batch.push_back(std::move(*doc));
    if (batch.size() == batch_size) flush();
  }
  if (!batch.empty()) flush();
  out.flush();
  return manifest;
}

std::vector<Document> PrivatizeCorpus(const NeighborSearch& search,
                                      std::span<const Document> docs,
                                      const PrivatizationConfig& cfg,
                                      size_t parallelism, RunManifest* manifest) {
  RunManifest local;
  BatchPrivatizer runner(search, cfg, parallelism, local);
  auto out = runner.Run(docs);
  if (manifest) *manifest = std::move(local);
  return out;
}

std::string Sha256File(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 initialization failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), in.gcount());
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

}  // namespace privbias
