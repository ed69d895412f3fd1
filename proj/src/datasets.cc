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

#include "privbias/datasets.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "privbias/errors.h"
#include "privbias/privatizer.h"

namespace privbias {
namespace {

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string AsciiLower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::optional<Label> ParseGoldLabel(std::string_view s) {
  if (s == "stereotype") return Label::kStereotype;
  if (s == "anti-stereotype") return Label::kAntiStereotype;
  if (s == "unrelated") return Label::kUnrelated;
  return std::nullopt;
}

bool HasPrefix(const std::vector<std::string>& v, std::span<const std::string> prefix) {
  return v.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), v.begin());
}

bool HasSuffix(const std::vector<std::string>& v, std::span<const std::string> suffix) {
  return v.size() >= suffix.size() && std::equal(suffix.rbegin(), suffix.rend(), v.rbegin());
}

// Returns false when the item cannot be aligned with its context.
bool BuildIntrasentence(StereoSetItem& item, const std::array<std::vector<std::string>, 3>& full) {
  std::optional<size_t> slot;
  for (size_t i = 0; i < item.context.size(); ++i) {
    if (AsciiLower(item.context[i]) == "blank") {
      if (slot) return false;
      slot = i;
    }
  }
  if (!slot) return false;
  item.slot = *slot;
  std::span<const std::string> ctx(item.context);
  auto prefix = ctx.subspan(0, *slot);
  auto suffix = ctx.subspan(*slot + 1);
  for (size_t l = 0; l < 3; ++l) {
    const auto& sentence = full[l];
    if (sentence.size() < prefix.size() + suffix.size() + 1) return false;
    if (!HasPrefix(sentence, prefix) || !HasSuffix(sentence, suffix)) return false;
    item.options[l].assign(sentence.begin() + prefix.size(), sentence.end() - suffix.size());
  }
  return true;
}

}  // namespace

StereoSetData ParseStereoSet(std::string_view json_text, bool lowercase) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("StereoSet JSON: ") + e.what());
  }
  StereoSetData data;
  const nlohmann::json& body = root.contains("data") ? root["data"] : root;
  for (const auto task : {StereoSetTask::kIntrasentence, StereoSetTask::kIntersentence}) {
    const char* key = task == StereoSetTask::kIntrasentence ? "intrasentence" : "intersentence";
    if (!body.contains(key)) continue;
    for (const auto& entry : body[key]) {
      StereoSetItem item;
      item.task = task;
      try {
        item.id = entry.at("id").get<std::string>();
        item.category = entry.at("bias_type").get<std::string>();
        item.context = Tokenize(entry.at("context").get<std::string>(), lowercase);
        std::array<std::vector<std::string>, 3> full;
        std::array<bool, 3> seen{};
        for (const auto& s : entry.at("sentences")) {
          const auto gold = s.at("gold_label").get<std::string>();
          const auto label = ParseGoldLabel(gold);
          if (!label) throw ParseError("unknown gold_label '" + gold + "'");
          const auto l = static_cast<size_t>(*label);
          if (seen[l]) throw ParseError("duplicate gold_label '" + gold + "'");
          seen[l] = true;
          full[l] = Tokenize(s.at("sentence").get<std::string>(), lowercase);
        }
        if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
          throw ParseError("item needs one sentence per label");
        }
        if (task == StereoSetTask::kIntersentence) {
          item.options = std::move(full);
        } else if (!BuildIntrasentence(item, full)) {
          data.skipped.push_back(item.id);
          continue;
        }
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("StereoSet item " + item.id + ": " + e.what());
      } catch (const ParseError& e) {
        throw ParseError("StereoSet item " + item.id + ": " + e.what());
      }
      try {
        item.Validate();
      } catch (const InvalidArgument& e) {
        throw ParseError(e.what());
      }
      (task == StereoSetTask::kIntrasentence ? data.intrasentence : data.intersentence)
          .push_back(std::move(item));
    }
  }
  return data;
}

StereoSetData LoadStereoSet(const std::filesystem::path& path, bool lowercase) {
  return ParseStereoSet(ReadFile(path), lowercase);
}

std::string CrowsCategory(std::string_view bias_type) {
  static const std::map<std::string, std::string, std::less<>> kMap = {
      {"race-color", "race"},
      {"socioeconomic", "occupation"},
      {"sexual-orientation", "sexuality"},
      {"physical-appearance", "appearance"},
      {"gender", "gender"},
      {"age", "age"},
      {"religion", "religion"},
      {"nationality", "nationality"},
      {"disability", "disability"},
  };
  auto it = kMap.find(bias_type);
  if (it == kMap.end()) throw ParseError("unknown CrowS-Pairs bias_type '" + std::string(bias_type) + "'");
  return it->second;
}

std::vector<std::vector<std::string>> ParseCsv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;  // current row has content
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          end_field();
          rows.push_back(std::move(row));
        }
        row.clear();
        any = false;
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw ParseError("CSV: unterminated quoted field");
  if (any || !field.empty()) {
    end_field();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CrowsPair> ParseCrowsPairs(std::istream& in, bool lowercase) {
  const auto rows = ParseCsv(in);
  if (rows.empty()) throw ParseError("CrowS-Pairs CSV is empty");
  const auto& header = rows[0];
  auto column = [&](std::string_view name) -> std::optional<size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<size_t>(it - header.begin());
  };
  const auto more = column("sent_more");
  const auto less = column("sent_less");
  const auto bias = column("bias_type");
  if (!more || !less || !bias) {
    throw ParseError("CrowS-Pairs CSV needs columns sent_more, sent_less, bias_type");
  }
  const auto id_col = column("");
  std::vector<CrowsPair> pairs;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw ParseError("CrowS-Pairs CSV record " + std::to_string(r + 1) + " has " +
                       std::to_string(row.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    CrowsPair pair;
    pair.id = id_col ? row[*id_col] : std::to_string(r - 1);
    pair.category = CrowsCategory(row[*bias]);
    pair.sent_more = Tokenize(row[*more], lowercase);
    pair.sent_less = Tokenize(row[*less], lowercase);
    try {
      pair.Validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what());
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<CrowsPair> LoadCrowsPairs(const std::filesystem::path& path, bool lowercase) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return ParseCrowsPairs(in, lowercase);
}

std::vector<std::vector<std::string>> LoadTextCorpus(const std::filesystem::path& path,
                                                     bool lowercase) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = Tokenize(line, lowercase);
    if (tokens.empty()) continue;
    if (tokens.size() >= 2 && tokens.front() == "=" && tokens.back() == "=") continue;
    out.push_back(std::move(tokens));
  }
  return out;
}

}  // namespace privbias
