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

// privbias: text privatization and bias measurement.
//
//   privbias calibrate   --embeddings E --epsilons 1,5,10 --out stats.json
//   privbias privatize   --embeddings E --epsilon 10 --input in --output out
//   privbias bench       --stereoset S --crows C --wikitext W --scorer URL --out r.json
//   privbias report      --runs a.json b.json --baseline inf --out table.md
//   privbias serve-mock  --mock uniform:1000 [--http PORT]
//   privbias synth-embeddings --vocabulary N --dim D --out E

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

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

namespace privbias {
namespace {

using json = nlohmann::json;

size_t DefaultParallelism() { return std::max(1u, std::thread::hardware_concurrency()); }

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::unique_ptr<NeighborSearch> OpenSearch(const std::string& path, std::optional<size_t> dim,
                                           bool exact, size_t ef_search) {
  auto store = std::make_shared<const EmbeddingStore>(LoadEmbeddings(path, dim));
  IndexOptions options;
  options.exact = exact;
  options.ef_search = ef_search;
  return BuildIndex(std::move(store), options);
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

json HistogramJson(const HistogramData& h) {
  return {{"bin_edges", h.bin_edges}, {"counts", h.counts}};
}

std::string_view ToString(SkewVerdict v) {
  switch (v) {
    case SkewVerdict::kPass:
      return "pass";
    case SkewVerdict::kFail:
      return "fail";
    case SkewVerdict::kNotEvaluable:
      return "not_evaluable";
  }
  return "not_evaluable";
}

json NumberOrNull(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void WriteHistogramCsv(const std::string& path, const HistogramData& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  for (size_t i = 0; i < h.counts.size(); ++i) {
    out << h.bin_edges[i] << ',' << h.bin_edges[i + 1] << ',' << h.counts[i] << '\n';
  }
  WriteText(path, out.str());
}

// --- calibrate ---------------------------------------------------------------

struct CalibrateArgs {
  std::string embeddings;
  std::optional<size_t> dim;
  std::string epsilons = "1,5,10,50";
  size_t sample_size = kDeskSampleSize;
  size_t queries = kDeskQueries;
  uint64_t seed = 0;
  size_t bins = 20;
  std::string out;
  std::string csv_prefix;
  bool approximate_nn = false;
  size_t ef_search = IndexOptions{}.ef_search;
  size_t parallelism = DefaultParallelism();
};

int RunCalibrate(const CalibrateArgs& a) {
  auto search = OpenSearch(a.embeddings, a.dim, !a.approximate_nn, a.ef_search);
  json doc = json::object();
  for (const auto& text : SplitList(a.epsilons)) {
    const auto budget = PrivacyBudget::Parse(text);
    const auto t0 = std::chrono::steady_clock::now();
    const auto stats =
        EstimateDeniability(*search, budget, a.sample_size, a.queries, a.seed, a.parallelism);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto skew = CheckSkewCriterion(stats);
    const auto h_nw = Histogram(stats, DeniabilityStatistic::kNw, a.bins);
    const auto h_sw = Histogram(stats, DeniabilityStatistic::kSw, a.bins);
    const auto nw = stats.NwValues();
    const auto sw = stats.SwValues();
    std::vector<std::string> words;
    for (size_t w : stats.sample_words) words.push_back(search->store().Word(w));
    const std::string key = budget.ToString();
    doc[key] = {{"n_w", stats.n_w},
                {"s_w", stats.s_w},
                {"words", words},
                {"queries", stats.queries_per_word},
                {"exact_nn", search->exact()},
                {"mean_nw", Mean(nw)},
                {"mean_sw", Mean(sw)},
                {"skew_nw", NumberOrNull(skew.skew_nw)},
                {"skew_sw", NumberOrNull(skew.skew_sw)},
                {"skew_criterion", ToString(skew.verdict)},
                {"diagnostics", skew.diagnostics},
                {"histograms", {{"n_w", HistogramJson(h_nw)}, {"s_w", HistogramJson(h_sw)}}}};
    if (!a.csv_prefix.empty()) {
      WriteHistogramCsv(a.csv_prefix + "eps" + key + "_nw.csv", h_nw);
      WriteHistogramCsv(a.csv_prefix + "eps" + key + "_sw.csv", h_sw);
    }
    std::cerr << "epsilon " << key << ": mean N_w " << Mean(nw) << ", mean S_w " << Mean(sw)
              << ", skew criterion " << ToString(skew.verdict) << " (" << seconds << " s)\n";
  }
  WriteText(a.out, doc.dump(2) + "\n");
  return 0;
}

// --- privatize ---------------------------------------------------------------

struct PrivatizeArgs {
  std::string embeddings;
  std::optional<size_t> dim;
  std::string epsilon;
  uint64_t seed = 0;
  std::string input;
  std::string output;
  std::string format = "jsonl";
  std::string oov = "passthrough";
  std::string oov_marker = "<oov>";
  bool keep_case = false;
  size_t parallelism = DefaultParallelism();
  bool exact_nn = false;
  size_t ef_search = IndexOptions{}.ef_search;
};

int RunPrivatize(const PrivatizeArgs& a) {
  PrivatizationConfig cfg;
  cfg.epsilon = PrivacyBudget::Parse(a.epsilon);
  cfg.seed = a.seed;
  cfg.oov_policy = ParseOovPolicy(a.oov);
  cfg.oov_marker = a.oov_marker;
  cfg.lowercase = !a.keep_case;
  const auto format = ParseCorpusFormat(a.format);

  auto search = OpenSearch(a.embeddings, a.dim, a.exact_nn, a.ef_search);
  std::ifstream in(a.input, std::ios::binary);
  if (!in) throw Error("cannot open " + a.input);
  std::ofstream out(a.output, std::ios::binary);
  if (!out) throw Error("cannot write " + a.output);
  DocumentReader reader(in, format, a.input);
  RunManifest manifest = PrivatizeCorpus(*search, reader, out, format, cfg, a.parallelism);
  out.close();
  if (!out) throw Error("failed writing " + a.output);
  manifest.embeddings_path = a.embeddings;
  manifest.embeddings_sha256 = Sha256File(a.embeddings);
  WriteText(a.output + ".manifest.json", manifest.ToJson().dump(2) + "\n");
  std::cerr << "privatized " << manifest.documents << " documents, " << manifest.tokens_total
            << " tokens (" << manifest.counts.oov() << " out of vocabulary)\n";
  return 0;
}

// --- bench -------------------------------------------------------------------

constexpr std::string_view kIntra = "stereoset_intrasentence";
constexpr std::string_view kInter = "stereoset_intersentence";
constexpr std::string_view kCrows = "crows_pairs";

struct BenchArgs {
  std::string stereoset;
  std::string crows;
  std::string wikitext;
  std::string scorer;
  std::string baseline_run;
  std::string epsilon_label = "inf";
  std::string out;
  std::string report = "json";
  size_t max_in_flight = 4;
  int max_attempts = 3;
  bool keep_case = false;
};

json SummaryJson(const RunSummary& s) {
  json cats = json::array();
  for (const auto& c : s.categories) {
    cats.push_back({{"category", c.category}, {"score", c.score}, {"count", c.count}});
  }
  return cats;
}

RunSummary SummaryFromJson(std::string epsilon, const json& cats) {
  RunSummary s{std::move(epsilon), {}};
  for (const auto& c : cats) {
    s.categories.push_back({c.at("category").get<std::string>(), c.at("score").get<double>(),
                            c.at("count").get<size_t>()});
  }
  return s;
}

RunSummary SummarizeStereoSet(const std::string& label, std::span<const StereoSetItem> items,
                              std::span<const StereoSetJudgement> judged) {
  std::vector<std::string> cats;
  std::vector<Preference> prefs;
  for (size_t i = 0; i < items.size(); ++i) {
    cats.push_back(items[i].category);
    prefs.push_back(judged[i].preference);
  }
  return Summarize(label, cats, prefs, kStereoSetCategories);
}

// Tables keyed by section from one or more bench run records.
std::map<std::string, StereotypeReport> ReportsFor(const std::vector<json>& runs,
                                                   const std::string& baseline) {
  std::map<std::string, StereotypeReport> reports;
  for (std::string_view section : {kIntra, kInter, kCrows}) {
    std::vector<RunSummary> summaries;
    for (const auto& run : runs) {
      const auto& sections = run.at("sections");
      if (!sections.contains(section)) continue;
      summaries.push_back(
          SummaryFromJson(run.at("epsilon").get<std::string>(), sections[std::string(section)]));
    }
    if (summaries.empty()) continue;
    reports.emplace(section, BuildReport(std::string(section), summaries, baseline));
  }
  return reports;
}

std::string ReportsMarkdown(const std::vector<json>& runs,
                            const std::map<std::string, StereotypeReport>& reports) {
  std::ostringstream md;
  for (std::string_view section : {kIntra, kInter, kCrows}) {
    auto it = reports.find(std::string(section));
    if (it != reports.end()) md << it->second.ToMarkdown() << '\n';
  }
  bool any_ppl = false;
  for (const auto& run : runs) any_ppl |= run.contains("pseudo_perplexity");
  if (any_ppl) {
    md << "### pseudo_perplexity\n\n| Epsilon | Pseudo-perplexity |\n|---|---|\n";
    for (const auto& run : runs) {
      if (!run.contains("pseudo_perplexity")) continue;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f", run["pseudo_perplexity"].get<double>());
      md << "| " << run["epsilon"].get<std::string>() << " | " << buf << " |\n";
    }
  }
  return md.str();
}

json ReportsJson(const std::vector<json>& runs,
                 const std::map<std::string, StereotypeReport>& reports) {
  json j = {{"runs", runs}, {"reports", json::object()}};
  for (const auto& [section, report] : reports) j["reports"][section] = report.ToJson();
  return j;
}

void EmitReports(const std::vector<json>& runs, const std::string& baseline,
                 const std::string& format, const std::string& out) {
  const auto reports = ReportsFor(runs, baseline);
  if (format == "md") {
    WriteText(out, ReportsMarkdown(runs, reports));
  } else if (format == "json") {
    WriteText(out, ReportsJson(runs, reports).dump(2) + "\n");
  } else {
    throw InvalidArgument("--report must be json or md");
  }
}

// A bench output file holds {"runs": [...]}; a bare run record is accepted too.
json LoadRunRecord(const std::string& path, std::optional<std::string> epsilon = std::nullopt) {
  json j = ReadJsonFile(path);
  if (j.contains("sections")) return j;
  if (!j.contains("runs") || j["runs"].empty()) {
    throw ParseError(path + ": not a bench run record");
  }
  // The run of interest is the last one unless an epsilon label is requested.
  for (auto it = j["runs"].rbegin(); it != j["runs"].rend(); ++it) {
    if (!epsilon || (*it).at("epsilon") == *epsilon) return *it;
  }
  throw ParseError(path + ": no run labelled " + *epsilon);
}

int RunBench(const BenchArgs& a) {
  if (a.stereoset.empty() && a.crows.empty() && a.wikitext.empty()) {
    throw InvalidArgument("bench needs at least one of --stereoset, --crows, --wikitext");
  }
  if (a.report != "json" && a.report != "md") throw InvalidArgument("--report must be json or md");
  ClientOptions options;
  options.max_in_flight = a.max_in_flight;
  options.max_attempts = a.max_attempts;
  ScoringClient client(MakeTransport(a.scorer), options);
  const bool lower = !a.keep_case;

  json run = {{"epsilon", a.epsilon_label}, {"scorer", a.scorer}, {"sections", json::object()}};
  if (!a.stereoset.empty()) {
    const auto data = LoadStereoSet(a.stereoset, lower);
    if (!data.skipped.empty()) {
      std::cerr << "skipped " << data.skipped.size()
                << " intrasentence items whose sentences do not match their context\n";
    }
    if (!data.intrasentence.empty()) {
      const auto judged = JudgeStereoSet(client, data.intrasentence);
      run["sections"][std::string(kIntra)] =
          SummaryJson(SummarizeStereoSet(a.epsilon_label, data.intrasentence, judged));
    }
    if (!data.intersentence.empty()) {
      const auto judged = JudgeStereoSet(client, data.intersentence);
      run["sections"][std::string(kInter)] =
          SummaryJson(SummarizeStereoSet(a.epsilon_label, data.intersentence, judged));
    }
  }
  if (!a.crows.empty()) {
    const auto pairs = LoadCrowsPairs(a.crows, lower);
    const auto prefs = JudgeCrows(client, pairs);
    std::vector<std::string> cats;
    for (const auto& p : pairs) cats.push_back(p.category);
    run["sections"][std::string(kCrows)] =
        SummaryJson(Summarize(a.epsilon_label, cats, prefs, kCrowsCategories));
  }
  if (!a.wikitext.empty()) {
    const auto corpus = LoadTextCorpus(a.wikitext, lower);
    run["pseudo_perplexity"] = PseudoPerplexity(client, corpus);
  }

  std::vector<json> runs;
  std::string baseline = a.epsilon_label;
  if (!a.baseline_run.empty()) {
    json base = LoadRunRecord(a.baseline_run);
    baseline = base.at("epsilon").get<std::string>();
    if (baseline == a.epsilon_label) {
      throw InvalidArgument("baseline run and this run share the label " + baseline);
    }
    runs.push_back(std::move(base));
  }
  runs.push_back(run);
  EmitReports(runs, baseline, a.report, a.out);
  if (a.report == "md") WriteText(a.out + ".json", ReportsJson(runs, ReportsFor(runs, baseline)).dump(2) + "\n");
  return 0;
}

// --- report ------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> runs;
  std::string baseline = "inf";
  std::string out;
  std::string report = "md";
};

int RunReport(const ReportArgs& a) {
  std::vector<json> runs;
  for (const auto& path : a.runs) runs.push_back(LoadRunRecord(path));
  EmitReports(runs, a.baseline, a.report, a.out);
  return 0;
}

// --- serve-mock --------------------------------------------------------------

struct ServeArgs {
  std::string mock = "uniform:1000";
  std::optional<int> http_port;
  std::string host = "127.0.0.1";
  int latency_ms = 0;
};

int RunServeMock(const ServeArgs& a) {
  MockScorer scorer(MockSpec::Parse(a.mock), std::chrono::milliseconds(a.latency_ms));
  if (!a.http_port) {
    std::ios::sync_with_stdio(false);
    ServeLines(scorer, std::cin, std::cout);
    return 0;
  }
  httplib::Server server;
  auto handler = [&scorer](Route route) {
    return [&scorer, route](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(scorer.Exchange(route, req.body), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      }
    };
  };
  server.Post("/score_masked", handler(Route::kScoreMasked));
  server.Post("/score_next", handler(Route::kScoreNext));
  int port = *a.http_port;
  if (port == 0) {
    port = server.bind_to_any_port(a.host);
    if (port < 0) throw Error("cannot bind " + a.host);
  } else if (!server.bind_to_port(a.host, port)) {
    throw Error("cannot bind " + a.host + ":" + std::to_string(port));
  }
  std::cout << "listening on http://" << a.host << ':' << port << std::endl;
  server.listen_after_bind();
  return 0;
}

// --- synth-embeddings --------------------------------------------------------

int RunSynth(const SyntheticSpec& spec, const std::string& out_path) {
  const auto store = MakeSyntheticStore(spec);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error("cannot write " + out_path);
  WriteEmbeddings(store, out);
  return 0;
}

int Main(int argc, char** argv) {
  CLI::App app{"Embedding-based text privatization and bias measurement"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Estimate N_w / S_w deniability statistics");
  c->add_option("--embeddings", cal.embeddings, "Embedding text file")->required();
  c->add_option("--dim", cal.dim, "Expected vector dimension");
  c->add_option("--epsilons", cal.epsilons, "Comma-separated budgets")->capture_default_str();
  c->add_option("--sample-size", cal.sample_size, "Sampled words")->capture_default_str();
  c->add_option("--queries", cal.queries, "Mechanism queries per word")->capture_default_str();
  c->add_option("--seed", cal.seed)->capture_default_str();
  c->add_option("--bins", cal.bins, "Histogram bins")->capture_default_str();
  c->add_option("--out", cal.out, "Output JSON")->required();
  c->add_option("--csv-prefix", cal.csv_prefix, "Also write histogram CSVs with this prefix");
  c->add_flag("--approximate-nn", cal.approximate_nn,
             "Use the graph index instead of exact batched search");
  c->add_option("--ef-search", cal.ef_search, "Graph search width")->capture_default_str();
  c->add_option("--parallelism", cal.parallelism)->capture_default_str();

  PrivatizeArgs pri;
  auto* p = app.add_subcommand("privatize", "Privatize a corpus word by word");
  p->add_option("--embeddings", pri.embeddings)->required();
  p->add_option("--dim", pri.dim);
  p->add_option("--epsilon", pri.epsilon, "Budget, or inf")->required();
  p->add_option("--seed", pri.seed)->capture_default_str();
  p->add_option("--input", pri.input)->required();
  p->add_option("--output", pri.output)->required();
  p->add_option("--format", pri.format, "jsonl or txt")->capture_default_str();
  p->add_option("--oov", pri.oov, "passthrough, drop or marker")->capture_default_str();
  p->add_option("--oov-marker", pri.oov_marker)->capture_default_str();
  p->add_flag("--keep-case", pri.keep_case, "Do not lowercase tokens");
  p->add_option("--parallelism", pri.parallelism)->capture_default_str();
  p->add_flag("--exact-nn", pri.exact_nn, "Brute-force nearest neighbors");
  p->add_option("--ef-search", pri.ef_search, "Graph search width")->capture_default_str();

  BenchArgs ben;
  auto* b = app.add_subcommand("bench", "Score a model on the bias benchmarks");
  b->add_option("--stereoset", ben.stereoset, "StereoSet JSON");
  b->add_option("--crows", ben.crows, "CrowS-Pairs CSV");
  b->add_option("--wikitext", ben.wikitext, "Text corpus for pseudo-perplexity");
  b->add_option("--scorer", ben.scorer, "http://..., cmd:... or mock:...")->required();
  b->add_option("--baseline-run", ben.baseline_run, "Earlier bench output to compare against");
  b->add_option("--epsilon-label", ben.epsilon_label, "Label of this run")->capture_default_str();
  b->add_option("--out", ben.out)->required();
  b->add_option("--report", ben.report, "json or md")->capture_default_str();
  b->add_option("--max-in-flight", ben.max_in_flight)->capture_default_str();
  b->add_option("--max-attempts", ben.max_attempts)->capture_default_str();
  b->add_flag("--keep-case", ben.keep_case);

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Tabulate several bench runs against a baseline");
  r->add_option("--runs", rep.runs, "Bench outputs")->required();
  r->add_option("--baseline", rep.baseline)->capture_default_str();
  r->add_option("--out", rep.out)->required();
  r->add_option("--report", rep.report, "json or md")->capture_default_str();

  ServeArgs srv;
  auto* s = app.add_subcommand("serve-mock", "Serve the mock scorer on stdio or HTTP");
  s->add_option("--mock", srv.mock, "uniform:N, overlap:N or table:PATH")->capture_default_str();
  s->add_option("--http", srv.http_port, "Serve HTTP on this port (0 picks one)");
  s->add_option("--host", srv.host)->capture_default_str();
  s->add_option("--latency-ms", srv.latency_ms)->capture_default_str();

  SyntheticSpec syn;
  std::string syn_out;
  auto* y = app.add_subcommand("synth-embeddings", "Write a clustered synthetic embedding file");
  y->add_option("--vocabulary", syn.vocabulary)->capture_default_str();
  y->add_option("--dim", syn.dimension)->capture_default_str();
  y->add_option("--seed", syn.seed)->capture_default_str();
  y->add_option("--out", syn_out)->required();

  CLI11_PARSE(app, argc, argv);

  if (*c) return RunCalibrate(cal);
  if (*p) return RunPrivatize(pri);
  if (*b) return RunBench(ben);
  if (*r) return RunReport(rep);
  if (*s) return RunServeMock(srv);
  if (*y) return RunSynth(syn, syn_out);
  return 1;
}

}  // namespace
}  // namespace privbias

int main(int argc, char** argv) {
  try {
    return privbias::Main(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "privbias: " << e.what() << '\n';
    return 1;
  }
}
