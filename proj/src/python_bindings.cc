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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "privbias/bias_bench.h"
#include "privbias/calibration.h"
#include "privbias/datasets.h"
#include "privbias/embedding_store.h"
#include "privbias/errors.h"
#include "privbias/mechanism.h"
#include "privbias/nearest_index.h"
#include "privbias/privatizer.h"
#include "privbias/scoring.h"
#include "privbias/synthetic.h"

namespace py = pybind11;

namespace privbias {
namespace {

using Budget = std::variant<double, std::string>;

PrivacyBudget ToBudget(const Budget& b) {
  if (const auto* s = std::get_if<std::string>(&b)) return PrivacyBudget::Parse(*s);
  const double e = std::get<double>(b);
  return std::isinf(e) && e > 0 ? PrivacyBudget::Infinite() : PrivacyBudget(e);
}

using StorePtr = std::shared_ptr<const EmbeddingStore>;

// Owns the store it searches.
struct Index {
  StorePtr store;
  std::shared_ptr<NeighborSearch> search;
};

Index MakeIndex(StorePtr store, bool exact, size_t max_degree, size_t ef_construction,
                size_t ef_search, uint64_t seed) {
  IndexOptions options;
  options.exact = exact;
  options.max_degree = max_degree;
  options.ef_construction = ef_construction;
  options.ef_search = ef_search;
  options.seed = seed;
  std::shared_ptr<NeighborSearch> search;
  {
    py::gil_scoped_release release;
    search = BuildIndex(store, options);
  }
  return {std::move(store), std::move(search)};
}

py::list NeighborsToList(const std::vector<NeighborResult>& results) {
  py::list out;
  for (const auto& r : results) out.append(py::make_tuple(r.word, r.index, r.distance));
  return out;
}

std::vector<std::string> Privatize(const Index& index, const std::vector<std::string>& texts,
                                   const Budget& epsilon, uint64_t seed,
                                   const std::string& oov_policy, const std::string& oov_marker,
                                   bool lowercase, size_t parallelism) {
  PrivatizationConfig cfg;
  cfg.epsilon = ToBudget(epsilon);
  cfg.seed = seed;
  cfg.oov_policy = ParseOovPolicy(oov_policy);
  cfg.oov_marker = oov_marker;
  cfg.lowercase = lowercase;
  std::vector<Document> docs;
  docs.reserve(texts.size());
  for (size_t i = 0; i < texts.size(); ++i) docs.push_back({i, texts[i]});
  std::vector<Document> out;
  {
    py::gil_scoped_release release;
    out = PrivatizeCorpus(*index.search, docs, cfg, parallelism);
  }
  std::vector<std::string> result;
  result.reserve(out.size());
  for (auto& d : out) result.push_back(std::move(d.text));
  return result;
}

py::dict Deniability(const Index& index, const Budget& epsilon, size_t sample_size,
                     size_t queries, uint64_t seed, size_t parallelism) {
  DeniabilityStats stats;
  {
    py::gil_scoped_release release;
    stats = EstimateDeniability(*index.search, ToBudget(epsilon), sample_size, queries, seed,
                                parallelism);
  }
  const auto skew = CheckSkewCriterion(stats);
  std::vector<std::string> words;
  for (size_t w : stats.sample_words) words.push_back(index.store->Word(w));
  const char* verdict = skew.verdict == SkewVerdict::kPass   ? "pass"
                        : skew.verdict == SkewVerdict::kFail ? "fail"
                                                             : "not_evaluable";
  py::dict d;
  d["epsilon"] = stats.epsilon.ToString();
  d["words"] = words;
  d["queries"] = stats.queries_per_word;
  d["n_w"] = stats.n_w;
  d["s_w"] = stats.s_w;
  d["skew_nw"] = skew.skew_nw;
  d["skew_sw"] = skew.skew_sw;
  d["skew_criterion"] = verdict;
  return d;
}

class Scorer {
 public:
  Scorer(const std::string& spec, size_t max_in_flight, int max_attempts) {
    ClientOptions options;
    options.max_in_flight = max_in_flight;
    options.max_attempts = max_attempts;
    client_ = std::make_unique<ScoringClient>(MakeTransport(spec), options);
  }

  double PseudoPerplexity(const std::vector<std::vector<std::string>>& corpus) {
    py::gil_scoped_release release;
    return privbias::PseudoPerplexity(*client_, corpus);
  }

  double PseudoLogLikelihood(const std::vector<std::string>& tokens) {
    py::gil_scoped_release release;
    return privbias::PseudoLogLikelihood(*client_, tokens, {});
  }

  // Per-category stereotype scores for a StereoSet file and/or a CrowS CSV.
  py::dict Bench(const std::optional<std::filesystem::path>& stereoset,
                 const std::optional<std::filesystem::path>& crows, bool lowercase) {
    py::dict out;
    auto to_dict = [](const RunSummary& s) {
      py::dict d;
      for (const auto& c : s.categories) d[py::str(c.category)] = py::make_tuple(c.score, c.count);
      return d;
    };
    if (stereoset) {
      const auto data = LoadStereoSet(*stereoset, lowercase);
      for (const auto* items : {&data.intrasentence, &data.intersentence}) {
        if (items->empty()) continue;
        std::vector<StereoSetJudgement> judged;
        {
          py::gil_scoped_release release;
          judged = JudgeStereoSet(*client_, *items);
        }
        std::vector<std::string> cats;
        std::vector<Preference> prefs;
        for (size_t i = 0; i < items->size(); ++i) {
          cats.push_back((*items)[i].category);
          prefs.push_back(judged[i].preference);
        }
        const char* key = items == &data.intrasentence ? "stereoset_intrasentence"
                                                       : "stereoset_intersentence";
        out[key] = to_dict(Summarize("", cats, prefs, kStereoSetCategories));
      }
    }
    if (crows) {
      const auto pairs = LoadCrowsPairs(*crows, lowercase);
      std::vector<Preference> prefs;
      {
        py::gil_scoped_release release;
        prefs = JudgeCrows(*client_, pairs);
      }
      std::vector<std::string> cats;
      for (const auto& p : pairs) cats.push_back(p.category);
      out["crows_pairs"] = to_dict(Summarize("", cats, prefs, kCrowsCategories));
    }
    return out;
  }

 private:
  std::unique_ptr<ScoringClient> client_;
};

// runs: {epsilon label: {category: score}}.
StereotypeReport Report(const std::string& section,
                        const std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>>& runs,
                        const std::string& baseline) {
  std::vector<RunSummary> summaries;
  for (const auto& [eps, cats] : runs) {
    RunSummary s{eps, {}};
    for (const auto& [cat, score] : cats) s.categories.push_back({cat, score, 0});
    summaries.push_back(std::move(s));
  }
  return BuildReport(section, summaries, baseline);
}

}  // namespace
}  // namespace privbias

PYBIND11_MODULE(_core, m) {
  using namespace privbias;
  m.doc() = "Word-level text privatization and bias measurement";

  auto error = py::register_exception<Error>(m, "PrivbiasError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", error.ptr());
  py::register_exception<TransportError>(m, "TransportError", error.ptr());

  py::class_<EmbeddingStore, std::shared_ptr<EmbeddingStore>>(m, "EmbeddingStore")
      .def(py::init([](std::vector<std::string> words, const std::vector<std::vector<double>>& rows) {
             if (rows.size() != words.size()) throw InvalidArgument("one row per word required");
             const size_t dim = rows.empty() ? 0 : rows[0].size();
             std::vector<float> values;
             values.reserve(rows.size() * dim);
             for (const auto& r : rows) {
               if (r.size() != dim) throw InvalidArgument("rows differ in length");
               values.insert(values.end(), r.begin(), r.end());
             }
             return std::make_shared<EmbeddingStore>(std::move(words), std::move(values), dim);
           }),
           py::arg("words"), py::arg("vectors"))
      .def_static(
          "load",
          [](const std::filesystem::path& path, std::optional<size_t> dim) {
            return std::make_shared<EmbeddingStore>(LoadEmbeddings(path, dim));
          },
          py::arg("path"), py::arg("dim") = py::none())
      .def_static(
          "synthetic",
          [](size_t vocabulary, size_t dimension, uint64_t seed) {
            SyntheticSpec spec;
            spec.vocabulary = vocabulary;
            spec.dimension = dimension;
            spec.seed = seed;
            return std::make_shared<EmbeddingStore>(MakeSyntheticStore(spec));
          },
          py::arg("vocabulary") = 1000, py::arg("dimension") = 300, py::arg("seed") = 1)
      .def("__len__", &EmbeddingStore::size)
      .def("__contains__", &EmbeddingStore::Contains)
      .def_property_readonly("dimension", &EmbeddingStore::dimension)
      .def_property_readonly("words", &EmbeddingStore::words)
      .def("index_of", &EmbeddingStore::IndexOf)
      .def("vector", [](const EmbeddingStore& s, const std::string& word) -> std::optional<std::vector<double>> {
        auto row = s.Lookup(word);
        if (!row) return std::nullopt;
        return std::vector<double>(row->begin(), row->end());
      })
      .def(
          "nearest_exact",
          [](const EmbeddingStore& s, const std::vector<double>& q, size_t k) {
            return NeighborsToList(NearestExact(s, q, k));
          },
          py::arg("query"), py::arg("k") = 1);

  py::class_<Index>(m, "Index")
      .def(py::init([](std::shared_ptr<EmbeddingStore> store, bool exact, size_t max_degree,
                       size_t ef_construction, size_t ef_search, uint64_t seed) {
             return MakeIndex(std::move(store), exact, max_degree, ef_construction, ef_search,
                              seed);
           }),
           py::arg("store"), py::arg("exact") = false, py::arg("max_degree") = 16,
           py::arg("ef_construction") = 100, py::arg("ef_search") = 64,
           py::arg("seed") = 0x5eed)
      .def_property_readonly("exact", [](const Index& i) { return i.search->exact(); })
      .def(
          "nearest",
          [](const Index& i, const std::vector<double>& q, size_t k) {
            return NeighborsToList(i.search->Nearest(q, k));
          },
          py::arg("query"), py::arg("k") = 1)
      .def("nearest_index",
           [](const Index& i, const std::vector<double>& q) { return i.search->NearestIndex(q); });

  m.def("tokenize", &Tokenize, py::arg("text"), py::arg("lowercase") = true);
  m.def("detokenize", [](const std::vector<std::string>& t) { return Detokenize(t); });
  m.def("privatize", &Privatize, py::arg("index"), py::arg("texts"), py::arg("epsilon"),
        py::arg("seed") = 0, py::arg("oov_policy") = "passthrough",
        py::arg("oov_marker") = "<oov>", py::arg("lowercase") = true,
        py::arg("parallelism") = 1);
  m.def("estimate_deniability", &Deniability, py::arg("index"), py::arg("epsilon"),
        py::arg("sample_size") = kDeskSampleSize, py::arg("queries") = kDeskQueries,
        py::arg("seed") = 0, py::arg("parallelism") = 1);
  m.def("sample_noise_magnitudes",
        [](const Budget& epsilon, size_t dim, size_t count, uint64_t seed) {
          RngStream rng({seed, StreamDomain::kUser, 0, 0});
          std::vector<double> out;
          out.reserve(count);
          for (size_t i = 0; i < count; ++i) out.push_back(SampleNoise(ToBudget(epsilon), dim, rng).magnitude);
          return out;
        },
        py::arg("epsilon"), py::arg("dim"), py::arg("count"), py::arg("seed") = 0);
  m.def("skewness", [](const std::vector<double>& v) { return Skewness(v); });
  m.def("welch_greater_p", [](const std::vector<double>& a, const std::vector<double>& b) {
    return WelchGreaterPValue(a, b);
  });
  m.def("cohens_d", &CohensD, py::arg("p_treat"), py::arg("p_base"));
  m.def("format_proportion", &FormatProportion);
  m.def("format_effect_size", &FormatEffectSize);
  m.def(
      "stereotype_report",
      [](const std::string& section,
         const std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>>& runs,
         const std::string& baseline, const std::string& format) -> std::string {
        const auto report = Report(section, runs, baseline);
        if (format == "md") return report.ToMarkdown();
        if (format == "json") return report.ToJson().dump();
        throw InvalidArgument("format must be md or json");
      },
      py::arg("section"), py::arg("runs"), py::arg("baseline") = "inf", py::arg("format") = "md");

  py::class_<Scorer>(m, "Scorer")
      .def(py::init<const std::string&, size_t, int>(), py::arg("spec"),
           py::arg("max_in_flight") = 4, py::arg("max_attempts") = 3)
      .def("pseudo_perplexity", &Scorer::PseudoPerplexity, py::arg("sentences"))
      .def("pseudo_log_likelihood", &Scorer::PseudoLogLikelihood, py::arg("tokens"))
      .def("bench", &Scorer::Bench, py::arg("stereoset") = py::none(),
           py::arg("crows") = py::none(), py::arg("lowercase") = true);
}
