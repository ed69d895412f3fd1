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

// Loaders for the bias benchmarks and the language-modeling corpus.

#ifndef PRIVBIAS_DATASETS_H_
#define PRIVBIAS_DATASETS_H_

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "privbias/bias_bench.h"

namespace privbias {

struct StereoSetData {
  std::vector<StereoSetItem> intrasentence;
  std::vector<StereoSetItem> intersentence;
  // Intrasentence items whose sentences do not reproduce the context around
  // the blank token by token.
  std::vector<std::string> skipped;
};

// The StereoSet development-set JSON ({"data": {"intrasentence": [...],
// "intersentence": [...]}}). Items carry bias_type, context and three
// sentences with gold_label in {stereotype, anti-stereotype, unrelated}.
StereoSetData ParseStereoSet(std::string_view json_text, bool lowercase = true);
StereoSetData LoadStereoSet(const std::filesystem::path& path, bool lowercase = true);

// CrowS-Pairs CSV with columns sent_more, sent_less, stereo_antistereo and
// bias_type. The unnamed leading column, when present, becomes the pair id.
std::vector<CrowsPair> ParseCrowsPairs(std::istream& in, bool lowercase = true);
std::vector<CrowsPair> LoadCrowsPairs(const std::filesystem::path& path, bool lowercase = true);

// Maps a CrowS-Pairs bias_type to its report row name; throws ParseError for
// unknown types.
std::string CrowsCategory(std::string_view bias_type);

// RFC 4180 records. Quoted fields may span lines.
std::vector<std::vector<std::string>> ParseCsv(std::istream& in);

// One tokenized sentence per non-blank line. WikiText section headings
// (" = Title = ") are skipped.
std::vector<std::vector<std::string>> LoadTextCorpus(const std::filesystem::path& path,
                                                     bool lowercase = true);

}  // namespace privbias

#endif  // PRIVBIAS_DATASETS_H_
