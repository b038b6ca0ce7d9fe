#include "pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "copurchase/community.hpp"
#include "copurchase/error.hpp"
#include "copurchase/evalkit.hpp"
#include "copurchase/graph.hpp"
#include "copurchase/graph_io.hpp"
#include "copurchase/graph_stats.hpp"
#include "copurchase/meta_parser.hpp"
#include "copurchase/parallel.hpp"
#include "copurchase/rng.hpp"

namespace copurchase::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> PipelineConfig::default_ks_list() { return default_ks(); }

namespace {

// Stage-specific seed streams. Evaluation uses one stream for every model so
// all scorers see the same BFS subgraphs.
enum SeedStream : std::uint64_t {
  kSeedLouvain = 1,
  kSeedModularity = 2,
  kSeedDataset = 3,
  kSeedSplit = 4,
  kSeedForest = 5,
  kSeedSage = 6,
  kSeedEval = 7,
  kSeedRandomScorer = 8,
  kSeedSageScorer = 9,
  kSeedAblation = 10,
  kSeedSageMetrics = 11,
};

std::uint64_t seed_for(const PipelineConfig& c, SeedStream s) { return derive_seed(c.seed, s); }

std::string stage_dir_name(const std::string& stage, const PipelineConfig& c) {
  return stage == "evaluate" ? "evaluate-" + c.model : stage;
}

fs::path stage_dir(const PipelineConfig& c, const std::string& key) { return c.workspace / key; }

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  const auto rel = fs::relative(p, base);
  const std::string s = rel.generic_string();
  if (rel.empty() || s.rfind("..", 0) == 0) return fs::absolute(p).generic_string();
  return s;
}

fs::path resolve_recorded(const std::string& recorded, const fs::path& workspace) {
  const fs::path p(recorded);
  return p.is_absolute() ? p : workspace / p;
}

NegativeMode negative_mode_of(const PipelineConfig& c) { return parse_negative_mode(c.negative_mode); }

json forest_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"min_samples_leaf", p.min_samples_leaf},
          {"features_per_split", p.features_per_split},
          {"compute_oob", p.compute_oob}};
}

json sage_json(const SageHyper& h) {
  return {{"hidden", h.hidden},
          {"neighbor_samples", h.neighbor_samples},
          {"learning_rate", h.learning_rate},
          {"momentum", h.momentum},
          {"batch_size", h.batch_size},
          {"epochs", h.epochs},
          {"proxy_aggregation", h.proxy_aggregation}};
}

json features_json(const PipelineConfig& c) {
  return {{"category_depth", c.features.category_depth},
          {"include_source_structure", c.features.include_source_structure}};
}

json dataset_json(const PipelineConfig& c) {
  return {{"positives", c.positives},
          {"negatives", c.negatives},
          {"negative_mode", c.negative_mode},
          {"train_fraction", c.train_fraction}};
}

// ---------------------------------------------------------------- manifests

class StageRun {
 public:
  StageRun(const PipelineConfig& config, std::string stage)
      : config_(config),
        stage_(std::move(stage)),
        key_(stage_dir_name(stage_, config)),
        dir_(stage_dir(config, key_)),
        started_(utc_now()) {
    fs::create_directories(dir_);
    fs::remove(dir_ / "manifest.json");
    summary_.stage = key_;
    summary_.directory = dir_;
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& file) const { return dir_ / file; }

  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const std::string& file) { summary_.outputs.push_back(file); }
  void warn(std::string message) { summary_.warnings.push_back(std::move(message)); }
  json& result() { return summary_.result; }

  StageSummary finish() {
    json m;
    m["stage"] = key_;
    m["tool_version"] = kToolVersion;
    m["seed"] = config_.seed;
    m["config"] = stage_config(stage_, config_);
    m["started"] = started_;
    m["inputs"] = json::array();
    for (const auto& p : inputs_) {
      m["inputs"].push_back({{"path", relative_to(p, config_.workspace)}, {"sha256", sha256_file(p)}});
    }
    m["outputs"] = json::array();
    for (const auto& f : summary_.outputs) {
      m["outputs"].push_back({{"path", f}, {"sha256", sha256_file(dir_ / f)}});
    }
    m["result"] = summary_.result;
    m["warnings"] = summary_.warnings;
    m["finished"] = utc_now();
    write_text(dir_ / "manifest.json", m.dump(2) + "\n");
    return summary_;
  }

 private:
  const PipelineConfig& config_;
  std::string stage_;
  std::string key_;
  fs::path dir_;
  std::string started_;
  std::vector<fs::path> inputs_;
  StageSummary summary_;
};

std::vector<std::string> upstream_of(const std::string& stage, const PipelineConfig& c) {
  if (stage == "evaluate") {
    if (c.model == "rf") return {"train-rf"};
    if (c.model == "sage") return {"train-sage"};
    if (c.model == "random") return {"build-graph"};
    throw StageError("unknown model '" + c.model + "' (expected rf, sage or random)");
  }
  return stage_info(stage).upstream;
}

void check_stage(const PipelineConfig& config, const std::string& key, const std::string& needed_by,
                 std::map<std::string, bool>& visited) {
  if (visited[key]) return;
  visited[key] = true;
  const std::string stage = key.rfind("evaluate-", 0) == 0 ? "evaluate" : key;
  PipelineConfig c = config;
  if (stage == "evaluate") c.model = key.substr(std::strlen("evaluate-"));

  const auto manifest = read_manifest(config, key);
  if (!manifest) {
    throw StageError("stage '" + needed_by + "' requires the output of '" + key +
                     "'; run `copurchase " + stage + "` first");
  }
  auto stale = [&](const std::string& why) {
    if (!config.force) {
      throw StageError("artifacts of stage '" + key + "' are stale (" + why + "); re-run `copurchase " +
                       stage + "` or pass --force");
    }
  };
  // parse is keyed on the dataset path, which later stages need not repeat.
  const bool skip_config = stage == "parse" && config.dataset.empty();
  if (!skip_config && (*manifest)["config"] != stage_config(stage, c)) stale("configuration changed");
  for (const char* section : {"outputs", "inputs"}) {
    const bool outputs = std::strcmp(section, "outputs") == 0;
    for (const auto& entry : (*manifest)[section]) {
      const std::string recorded = entry["path"].get<std::string>();
      const fs::path p = outputs ? stage_dir(config, key) / recorded
                                 : resolve_recorded(recorded, config.workspace);
      if (!fs::exists(p)) {
        // The raw dataset may live elsewhere once parsed; everything inside
        // the workspace must still be there.
        if (!outputs && stage == "parse") continue;
        throw StageError("stage '" + key + "' artifact missing: " + p.string() + "; re-run `copurchase " +
                         stage + "`");
      }
      if (sha256_file(p) != entry["sha256"].get<std::string>()) {
        stale((outputs ? "output " : "input ") + recorded + " changed since the stage ran");
      }
    }
  }
  for (const auto& up : upstream_of(stage, c)) check_stage(c, stage_dir_name(up, c), key, visited);
}

// ---------------------------------------------------------------- helpers

void write_clustering(const fs::path& path, std::span<const double> values) {
  auto out = open_out(path);
  const char magic[8] = {'C', 'P', 'C', 'L', 'U', 'S', '0', '1'};
  out.write(magic, 8);
  const std::uint64_t n = values.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<double> read_clustering(const fs::path& path, std::size_t expected) {
  auto in = open_in(path);
  char magic[8];
  std::uint64_t n = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, "CPCLUS01", 8) != 0) throw DataError(path.string() + ": not a clustering file");
  if (n != expected) {
    throw DataError(path.string() + ": holds " + std::to_string(n) + " values, graph has " +
                    std::to_string(expected) + " nodes");
  }
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError(path.string() + ": truncated");
  return values;
}

struct LoadedGraph {
  CoPurchaseGraph graph;
  std::vector<NodeId> original_ids;
  std::vector<double> clustering;
  std::string which;  // "lcc" or "full"
};

fs::path graph_file(const PipelineConfig& c, const std::string& which) {
  return stage_dir(c, "build-graph") / (which == "lcc" ? "lcc.bin" : "graph.bin");
}

CoPurchaseGraph load_lcc(const PipelineConfig& c, std::vector<NodeId>* original_ids = nullptr) {
  const fs::path p = graph_file(c, "lcc");
  if (!fs::exists(p)) throw DataError("graph has no edges, so there is no largest connected component");
  return load_graph(p.string(), original_ids);
}

// Graph the training set lives on: the LCC for non-adjacent negatives, the
// full graph when negatives are isolated products.
std::string dataset_graph_name(const PipelineConfig& c) {
  return negative_mode_of(c) == NegativeMode::Isolated ? "full" : "lcc";
}

LoadedGraph load_dataset_graph(const PipelineConfig& c) {
  LoadedGraph lg;
  lg.which = dataset_graph_name(c);
  lg.graph = lg.which == "lcc" ? load_lcc(c, &lg.original_ids)
                               : load_graph(graph_file(c, "full").string());
  lg.clustering = read_clustering(stage_dir(c, "features") / ("clustering_" + lg.which + ".bin"),
                                  lg.graph.node_count());
  return lg;
}

std::vector<PairSample> load_samples(const PipelineConfig& c, const CoPurchaseGraph& g,
                                     const std::string& file) {
  auto in = open_in(stage_dir(c, "make-dataset") / file);
  return read_samples_csv(in, g);
}

Split load_split(const PipelineConfig& c, const CoPurchaseGraph& g) {
  return {load_samples(c, g, "train.csv"), load_samples(c, g, "test.csv")};
}

void add_dataset_inputs(StageRun& run, const PipelineConfig& c) {
  run.input(graph_file(c, dataset_graph_name(c)));
  run.input(stage_dir(c, "features") / ("clustering_" + dataset_graph_name(c) + ".bin"));
  run.input(stage_dir(c, "make-dataset") / "train.csv");
  run.input(stage_dir(c, "make-dataset") / "test.csv");
}

json metrics_json(const ClassificationMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall},   {"f1", m.f1},
          {"roc_auc", m.roc_auc},     {"tp", m.tp},           {"fp", m.fp},
          {"tn", m.tn},               {"fn", m.fn},           {"no_predicted_positives", m.no_predicted_positives}};
}

json fit_json(const PowerLawFit& f) {
  return {{"alpha", f.alpha},         {"slope", f.slope},   {"intercept", f.intercept},
          {"r_squared", f.r_squared}, {"points", f.points}, {"k_min", f.k_min},
          {"hill_alpha", f.hill_alpha}};
}

void write_degree_csvs(StageRun& run, const DegreeDistribution& d, const std::string& prefix) {
  {
    auto out = open_out(run.path(prefix + "_degree_hist.csv"));
    out << "degree,count\n";
    for (const auto& [k, n] : d.histogram) out << k << ',' << n << '\n';
  }
  {
    auto out = open_out(run.path(prefix + "_degree_ccdf.csv"));
    out << "degree,ccdf,log10_degree,log10_ccdf\n";
    for (const auto& [k, p] : d.ccdf) {
      out << k << ',' << p << ',';
      if (k > 0) out << std::log10(static_cast<double>(k)) << ',' << std::log10(p);
      else out << ',';
      out << '\n';
    }
  }
  run.output(prefix + "_degree_hist.csv");
  run.output(prefix + "_degree_ccdf.csv");
}

std::optional<PowerLawFit> try_fit(const DegreeDistribution& d, StageRun& run, const std::string& what) {
  try {
    return fit_power_law_ccdf(d);
  } catch (const DataError& e) {
    run.warn(what + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace

// ---------------------------------------------------------------- config

json stage_config(const std::string& stage, const PipelineConfig& c) {
  if (stage == "parse") return {{"dataset", c.dataset.empty() ? "" : fs::absolute(c.dataset).generic_string()}};
  if (stage == "build-graph" || stage == "stats" || stage == "export-viz" || stage == "repro-report") {
    json j = json::object();
    if (stage == "export-viz") j["top_k"] = c.viz_top_k;
    return j;
  }
  if (stage == "communities") {
    return {{"louvain_resolution", c.louvain_resolution},
            {"pair_samples", c.modularity_pair_samples},
            {"category_depth", c.features.category_depth}};
  }
  if (stage == "features") return features_json(c);
  if (stage == "make-dataset") {
    json j = dataset_json(c);
    j["features"] = features_json(c);
    j["variant"] = c.variant;
    return j;
  }
  if (stage == "train-rf") {
    return {{"dataset", dataset_json(c)}, {"features", features_json(c)}, {"variant", c.variant},
            {"forest", forest_json(c.forest)}};
  }
  if (stage == "train-sage") {
    return {{"dataset", dataset_json(c)}, {"features", features_json(c)}, {"sage", sage_json(c.sage)}};
  }
  if (stage == "ablate") {
    return {{"dataset", dataset_json(c)}, {"features", features_json(c)}, {"forest", forest_json(c.forest)}};
  }
  if (stage == "evaluate") {
    json j = {{"model", c.model},
              {"subgraph_nodes", c.eval_subgraph_nodes},
              {"ks", c.eval_ks},
              {"repeats", c.eval_repeats},
              {"features", features_json(c)}};
    if (c.model == "rf") {
      j["variant"] = c.variant;
      j["train"] = stage_config("train-rf", c);
    } else if (c.model == "sage") {
      j["train"] = stage_config("train-sage", c);
    }
    return j;
  }
  throw StageError("unknown stage '" + stage + "'");
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw InvariantViolation("sha256 initialisation failed");
  }
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

const std::vector<StageInfo>& stages() {
  static const std::vector<StageInfo> all = {
      {"parse", {}},
      {"build-graph", {"parse"}},
      {"stats", {"build-graph"}},
      {"communities", {"build-graph"}},
      {"features", {"build-graph"}},
      {"make-dataset", {"features"}},
      {"train-rf", {"make-dataset"}},
      {"train-sage", {"make-dataset"}},
      {"evaluate", {}},
      {"ablate", {"make-dataset"}},
      {"export-viz", {"build-graph"}},
      {"repro-report", {"stats", "communities", "ablate", "evaluate-random", "evaluate-rf", "evaluate-sage"}},
  };
  return all;
}

const StageInfo& stage_info(const std::string& name) {
  for (const auto& s : stages()) {
    if (s.name == name) return s;
  }
  throw StageError("unknown stage '" + name + "'");
}

std::optional<json> read_manifest(const PipelineConfig& config, const std::string& key) {
  const fs::path p = stage_dir(config, key) / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  return read_json(p);
}

void check_upstream(const PipelineConfig& config, const std::string& stage) {
  std::map<std::string, bool> visited;
  for (const auto& up : upstream_of(stage, config)) {
    check_stage(config, stage_dir_name(up, config), stage_dir_name(stage, config), visited);
  }
}

// ---------------------------------------------------------------- stages

StageSummary run_parse(const PipelineConfig& c) {
  if (c.dataset.empty()) throw StageError("parse needs --dataset (amazon-meta.txt or .txt.gz)");
  StageRun run(c, "parse");
  run.input(c.dataset);
  auto in = open_metadata_file(c.dataset);

  ParseOutcome outcome;
  {
    MetadataReader reader(*in);
    for (;;) {
      try {
        auto r = reader.next();
        if (!r) break;
        outcome.records.push_back(std::move(*r));
      } catch (const ParseError& e) {
        outcome.errors.emplace_back(e.what());
      }
    }
    outcome.declared_total = reader.declared_total();
  }
  save_records(run.path("records.bin").string(), outcome.records);
  run.output("records.bin");
  {
    auto out = open_out(run.path("errors.txt"));
    for (const auto& e : outcome.errors) out << e << '\n';
  }
  run.output("errors.txt");

  const auto discontinued = static_cast<std::size_t>(std::count_if(
      outcome.records.begin(), outcome.records.end(), [](const ProductRecord& r) { return r.discontinued; }));
  const auto valid = static_cast<std::size_t>(
      std::count_if(outcome.records.begin(), outcome.records.end(), is_valid_record));
  auto& res = run.result();
  res["records"] = outcome.records.size();
  res["parse_errors"] = outcome.errors.size();
  res["discontinued"] = discontinued;
  res["valid_records"] = valid;
  res["declared_total"] = outcome.declared_total ? json(*outcome.declared_total) : json(nullptr);

  if (outcome.records.empty()) run.warn("no records parsed from " + c.dataset);
  if (!outcome.errors.empty()) {
    run.warn(std::to_string(outcome.errors.size()) + " malformed record blocks skipped (see errors.txt)");
  }
  if (outcome.declared_total &&
      static_cast<std::int64_t>(outcome.records.size() + outcome.errors.size()) != *outcome.declared_total) {
    run.warn("file declares " + std::to_string(*outcome.declared_total) + " items, read " +
             std::to_string(outcome.records.size() + outcome.errors.size()));
  }
  return run.finish();
}

StageSummary run_build_graph(const PipelineConfig& c) {
  check_upstream(c, "build-graph");
  StageRun run(c, "build-graph");
  const fs::path records_path = stage_dir(c, "parse") / "records.bin";
  run.input(records_path);
  auto records = filter_valid(load_records(records_path.string()));
  const auto built = build_graph(records);
  records.clear();
  records.shrink_to_fit();
  const CoPurchaseGraph& g = built.graph;
  g.check_invariants();

  save_graph(run.path("graph.bin").string(), g);
  run.output("graph.bin");
  {
    auto out = open_out(run.path("nodes.csv"));
    write_node_csv(out, g);
  }
  {
    auto out = open_out(run.path("edges.csv"));
    write_edge_csv(out, g);
  }
  run.output("nodes.csv");
  run.output("edges.csv");

  auto& res = run.result();
  res["valid_records"] = built.stats.records;
  res["nodes"] = g.node_count();
  res["edges"] = g.edge_count();
  res["dropped_references"] = built.stats.dropped_references;
  res["self_references"] = built.stats.self_references;
  res["duplicate_asins"] = built.stats.duplicate_asins;
  if (g.edge_count() > 0) {
    const Subgraph lcc = largest_cc(g);
    save_graph(run.path("lcc.bin").string(), lcc.graph, lcc.original_ids);
    run.output("lcc.bin");
    res["lcc_nodes"] = lcc.graph.node_count();
    res["lcc_edges"] = lcc.graph.edge_count();
  } else {
    run.warn("graph has no edges; no largest connected component written");
  }
  if (built.stats.duplicate_asins > 0) {
    run.warn(std::to_string(built.stats.duplicate_asins) + " duplicate ASINs ignored (first record kept)");
  }
  return run.finish();
}

StageSummary run_stats(const PipelineConfig& c) {
  check_upstream(c, "stats");
  StageRun run(c, "stats");
  run.input(graph_file(c, "full"));
  const CoPurchaseGraph g = load_graph(graph_file(c, "full").string());

  auto& res = run.result();
  res["nodes"] = g.node_count();
  res["edges"] = g.edge_count();
  std::size_t isolated = 0;
  for (NodeId v = 0; v < g.node_count(); ++v) isolated += g.degree(v) == 0;
  res["isolated"] = isolated;
  const Components comps = connected_components(g);
  res["components"] = comps.count();
  res["non_singleton_components"] = comps.non_singleton();

  const auto dist = degree_distribution(g);
  write_degree_csvs(run, dist, "full");
  if (auto fit = try_fit(dist, run, "power-law fit on full graph")) {
    res["alpha"] = fit->alpha;
    res["power_law_full"] = fit_json(*fit);
  }
  const auto centrality = degree_centrality(g);
  if (!centrality.empty()) {
    double sum = 0.0;
    for (double x : centrality) sum += x;
    res["degree_centrality_mean"] = sum / static_cast<double>(centrality.size());
    res["degree_centrality_max"] = *std::max_element(centrality.begin(), centrality.end());
  }
  std::size_t max_degree = 0;
  for (NodeId v = 0; v < g.node_count(); ++v) max_degree = std::max(max_degree, g.degree(v));
  res["max_degree"] = max_degree;
  res["mean_degree"] = g.node_count() ? 2.0 * static_cast<double>(g.edge_count()) / static_cast<double>(g.node_count()) : 0.0;

  if (g.edge_count() > 0) {
    run.input(graph_file(c, "lcc"));
    const CoPurchaseGraph lcc = load_lcc(c);
    res["lcc_nodes"] = lcc.node_count();
    res["lcc_edges"] = lcc.edge_count();
    res["assortativity"] = attribute_assortativity(lcc, group_labels(lcc));
    res["assortativity_full_graph"] = attribute_assortativity(g, group_labels(g));
    const auto lcc_dist = degree_distribution(lcc);
    write_degree_csvs(run, lcc_dist, "lcc");
    if (auto fit = try_fit(lcc_dist, run, "power-law fit on LCC")) res["power_law_lcc"] = fit_json(*fit);
    const auto cc = all_clustering(lcc);
    double sum = 0.0;
    for (double x : cc) sum += x;
    res["lcc_mean_clustering"] = sum / static_cast<double>(cc.size());
  } else {
    run.warn("graph has no edges; LCC statistics skipped");
  }

  write_text(run.path("stats.json"), res.dump(2) + "\n");
  run.output("stats.json");
  return run.finish();
}

StageSummary run_communities(const PipelineConfig& c) {
  check_upstream(c, "communities");
  StageRun run(c, "communities");
  run.input(graph_file(c, "lcc"));
  const CoPurchaseGraph g = load_lcc(c);

  LouvainOptions opts;
  opts.resolution = c.louvain_resolution;
  const auto lv = louvain(g, seed_for(c, kSeedLouvain), opts);
  {
    auto out = open_out(run.path("partition.csv"));
    out << "node,asin,community\n";
    for (NodeId v = 0; v < g.node_count(); ++v) {
      out << v << ',' << g.attributes(v).asin << ',' << lv.partition.community[v] << '\n';
    }
  }
  run.output("partition.csv");

  const auto sim = modularity_by_category_similarity(g, c.features.category_depth, c.modularity_pair_samples,
                                                     seed_for(c, kSeedModularity));
  auto& res = run.result();
  res["louvain"] = {{"modularity", lv.modularity},
                    {"communities", lv.partition.count},
                    {"levels", lv.level_modularity},
                    {"moves", lv.moves},
                    {"resolution", c.louvain_resolution}};
  res["group_modularity"] = modularity_by_attribute(g, group_labels(g));
  res["category_similarity_modularity"] = {{"q", sim.q},
                                           {"edge_term", sim.edge_term},
                                           {"null_term", sim.null_term},
                                           {"standard_error", sim.standard_error},
                                           {"edge_restricted_q", sim.edge_restricted_q},
                                           {"exact", sim.exact},
                                           {"samples", sim.samples}};
  write_text(run.path("modularity.json"), res.dump(2) + "\n");
  run.output("modularity.json");
  return run.finish();
}

StageSummary run_features(const PipelineConfig& c) {
  check_upstream(c, "features");
  StageRun run(c, "features");
  for (const std::string which : {"full", "lcc"}) {
    if (which == "lcc" && !fs::exists(graph_file(c, "lcc"))) {
      run.warn("no LCC; only full-graph features written");
      continue;
    }
    run.input(graph_file(c, which));
    const CoPurchaseGraph g = load_graph(graph_file(c, which).string());
    const auto cc = all_clustering(g);
    write_clustering(run.path("clustering_" + which + ".bin"), cc);
    run.output("clustering_" + which + ".bin");
    if (which != "lcc") continue;

    const FeatureContext ctx(g, cc, c.features);
    auto out = open_out(run.path("node_features.csv"));
    out << "# node feature layout: group one-hot (book,dvd,music,video), log1p degree, clustering\n";
    out << "node,asin,group_book,group_dvd,group_music,group_video,log_degree,clustering\n";
    for (NodeId v = 0; v < g.node_count(); ++v) {
      const auto f = ctx.node_feature(v).as_array();
      out << v << ',' << g.attributes(v).asin;
      for (double x : f) out << ',' << x;
      out << '\n';
    }
    run.output("node_features.csv");
    run.result()["lcc_nodes"] = g.node_count();
  }
  return run.finish();
}

StageSummary run_make_dataset(const PipelineConfig& c) {
  check_upstream(c, "make-dataset");
  StageRun run(c, "make-dataset");
  const auto variant = parse_variant(c.variant);
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
    throw DataError("train fraction must lie in (0, 1)");
  }
  LoadedGraph lg = load_dataset_graph(c);
  run.input(graph_file(c, lg.which));
  run.input(stage_dir(c, "features") / ("clustering_" + lg.which + ".bin"));

  DatasetSpec spec;
  spec.positives = c.positives;
  spec.negatives = c.negatives;
  spec.negative_mode = negative_mode_of(c);
  const auto samples = make_training_set(lg.graph, spec, seed_for(c, kSeedDataset));
  check_samples(lg.graph, samples, spec.negative_mode);
  const Split parts = split(samples, c.train_fraction, seed_for(c, kSeedSplit));

  const FeatureContext ctx(lg.graph, lg.clustering, c.features);
  const auto columns = feature_columns(variant, c.features);
  for (const auto& [name, part] : {std::pair{std::string("train"), &parts.train},
                                   std::pair{std::string("test"), &parts.test}}) {
    {
      auto out = open_out(run.path(name + ".csv"));
      write_samples_csv(out, lg.graph, *part);
    }
    const auto X = build_features(ctx, *part, variant);
    const auto y = labels_of(*part);
    {
      auto out = open_out(run.path("features_" + name + ".csv"));
      write_feature_csv(out, X, columns, variant_name(variant), y);
    }
    run.output(name + ".csv");
    run.output("features_" + name + ".csv");
  }
  auto& res = run.result();
  res["graph"] = lg.which;
  res["samples"] = samples.size();
  res["train"] = parts.train.size();
  res["test"] = parts.test.size();
  res["positives"] = c.positives;
  res["negatives"] = c.negatives;
  res["negative_mode"] = c.negative_mode;
  res["one_degree_pool"] = one_degree_nodes(lg.graph).size();
  res["dataset_seed"] = seed_for(c, kSeedDataset);
  res["split_seed"] = seed_for(c, kSeedSplit);
  write_text(run.path("dataset.json"), res.dump(2) + "\n");
  run.output("dataset.json");
  return run.finish();
}

StageSummary run_train_rf(const PipelineConfig& c) {
  check_upstream(c, "train-rf");
  StageRun run(c, "train-rf");
  const auto variant = parse_variant(c.variant);
  add_dataset_inputs(run, c);
  const LoadedGraph lg = load_dataset_graph(c);
  const Split parts = load_split(c, lg.graph);
  const FeatureContext ctx(lg.graph, lg.clustering, c.features);

  const auto X_train = build_features(ctx, parts.train, variant);
  const auto forest = train_forest(X_train, labels_of(parts.train), c.forest, seed_for(c, kSeedForest));
  save_forest(run.path("forest.json").string(), forest);
  run.output("forest.json");

  auto& res = run.result();
  res["variant"] = variant_name(variant);
  res["trees"] = forest.trees.size();
  res["seed"] = forest.seed;
  if (forest.oob_accuracy) res["oob_accuracy"] = *forest.oob_accuracy;
  if (!parts.test.empty()) {
    const auto X_test = build_features(ctx, parts.test, variant);
    const auto scores = predict_proba(forest, X_test);
    res["test"] = metrics_json(classification_metrics(labels_of(parts.test), scores));
  }
  write_text(run.path("metrics.json"), res.dump(2) + "\n");
  run.output("metrics.json");
  return run.finish();
}

StageSummary run_train_sage(const PipelineConfig& c) {
  check_upstream(c, "train-sage");
  StageRun run(c, "train-sage");
  add_dataset_inputs(run, c);
  const LoadedGraph lg = load_dataset_graph(c);
  const Split parts = load_split(c, lg.graph);
  const FeatureContext ctx(lg.graph, lg.clustering, c.features);

  SageHyper hyper = c.sage;
  hyper.seed = seed_for(c, kSeedSage);
  const auto trained = train_sage(ctx, parts.train, hyper);
  save_sage(run.path("sage.json").string(), trained.params, hyper);
  run.output("sage.json");
  {
    auto out = open_out(run.path("loss.csv"));
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < trained.epoch_loss.size(); ++e) out << e + 1 << ',' << trained.epoch_loss[e] << '\n';
  }
  run.output("loss.csv");

  auto& res = run.result();
  res["epochs"] = trained.epoch_loss.size();
  res["final_loss"] = trained.epoch_loss.empty() ? json(nullptr) : json(trained.epoch_loss.back());
  res["seed"] = hyper.seed;
  if (!parts.test.empty()) {
    std::vector<double> scores(parts.test.size());
    const std::uint64_t metric_seed = seed_for(c, kSeedSageMetrics);
    parallel_for(parts.test.size(), [&](std::size_t i) {
      const auto& s = parts.test[i];
      const FeatureContext view = s.label ? ctx.masked(s.source, s.target) : ctx;
      Rng rng(derive_seed(metric_seed, i));
      scores[i] = score_pair(view, s.source, s.target, trained.params, hyper, rng);
    });
    res["test"] = metrics_json(classification_metrics(labels_of(parts.test), scores));
  }
  write_text(run.path("metrics.json"), res.dump(2) + "\n");
  run.output("metrics.json");
  return run.finish();
}

StageSummary run_evaluate(const PipelineConfig& c) {
  check_upstream(c, "evaluate");
  StageRun run(c, "evaluate");
  run.input(graph_file(c, "lcc"));
  const CoPurchaseGraph lcc = load_lcc(c);

  EvalConfig ec;
  ec.subgraph_nodes = c.eval_subgraph_nodes;
  ec.ks = c.eval_ks;
  ec.seed = seed_for(c, kSeedEval);
  ec.repeats = c.eval_repeats;
  ec.features = c.features;

  std::unique_ptr<Scorer> scorer;
  Forest forest;
  SageParams params;
  SageHyper hyper;
  if (c.model == "random") {
    scorer = std::make_unique<RandomScorer>(seed_for(c, kSeedRandomScorer));
  } else if (c.model == "rf") {
    const fs::path p = stage_dir(c, "train-rf") / "forest.json";
    run.input(p);
    forest = load_forest(p.string());
    scorer = std::make_unique<ForestScorer>(forest, parse_variant(c.variant));
  } else if (c.model == "sage") {
    const fs::path p = stage_dir(c, "train-sage") / "sage.json";
    run.input(p);
    params = load_sage(p.string(), &hyper);
    scorer = std::make_unique<SageScorer>(params, hyper, seed_for(c, kSeedSageScorer));
  } else {
    throw StageError("unknown model '" + c.model + "' (expected rf, sage or random)");
  }

  const EvalReport report = evaluate_protocol(lcc, *scorer, ec);
  write_text(run.path("report.json"), report_to_json(report) + "\n");
  {
    auto out = open_out(run.path("topk.csv"));
    write_topk_csv(out, report);
  }
  run.output("report.json");
  run.output("topk.csv");

  auto& res = run.result();
  res["model"] = c.model;
  res["top5"] = report.top5;
  res["mrr"] = report.mrr;
  res["random_top5_expected"] = 5.0 / static_cast<double>(c.eval_subgraph_nodes - 1);
  std::size_t queries = 0;
  for (const auto& r : report.repeats) queries += r.queries;
  res["queries"] = queries;
  return run.finish();
}

StageSummary run_ablate(const PipelineConfig& c) {
  check_upstream(c, "ablate");
  StageRun run(c, "ablate");
  add_dataset_inputs(run, c);
  const LoadedGraph lg = load_dataset_graph(c);
  const Split parts = load_split(c, lg.graph);
  const FeatureContext ctx(lg.graph, lg.clustering, c.features);

  const std::vector<FeatureVariant> variants = {FeatureVariant::Full, FeatureVariant::NoGroup,
                                                FeatureVariant::NoCategory, FeatureVariant::NoDegree,
                                                FeatureVariant::NoCluster};
  const auto rows = run_ablation(ctx, parts, c.forest, variants, seed_for(c, kSeedAblation));
  {
    auto out = open_out(run.path("ablation.csv"));
    write_ablation_csv(out, rows);
  }
  run.output("ablation.csv");
  auto& res = run.result();
  res["rows"] = json::array();
  for (const auto& r : rows) {
    json row = metrics_json(r.metrics);
    row["variant"] = variant_name(r.variant);
    res["rows"].push_back(row);
  }
  write_text(run.path("ablation.json"), res.dump(2) + "\n");
  run.output("ablation.json");
  return run.finish();
}

StageSummary run_export_viz(const PipelineConfig& c) {
  check_upstream(c, "export-viz");
  StageRun run(c, "export-viz");
  run.input(graph_file(c, "full"));
  const CoPurchaseGraph g = load_graph(graph_file(c, "full").string());
  const Subgraph top = top_degree_neighborhood(g, c.viz_top_k);
  {
    auto out = open_out(run.path("top_neighborhood.gexf"));
    write_gexf(out, top.graph, top.original_ids);
  }
  {
    auto out = open_out(run.path("top_nodes.csv"));
    write_node_csv(out, top.graph, top.original_ids);
  }
  {
    auto out = open_out(run.path("top_edges.csv"));
    write_edge_csv(out, top.graph);
  }
  run.output("top_neighborhood.gexf");
  run.output("top_nodes.csv");
  run.output("top_edges.csv");
  run.result()["nodes"] = top.graph.node_count();
  run.result()["edges"] = top.graph.edge_count();
  return run.finish();
}

StageSummary run_repro_report(const PipelineConfig& c) {
  check_upstream(c, "repro-report");
  StageRun run(c, "repro-report");
  json bundle;
  for (const auto& key : stage_info("repro-report").upstream) {
    const auto m = read_manifest(c, key);
    bundle[key] = (*m)["result"];
    run.input(stage_dir(c, key) / "manifest.json");
  }
  if (const auto m = read_manifest(c, "train-rf")) bundle["train-rf"] = (*m)["result"];
  if (const auto m = read_manifest(c, "train-sage")) bundle["train-sage"] = (*m)["result"];
  write_text(run.path("report.json"), bundle.dump(2) + "\n");
  run.output("report.json");

  std::ostringstream md;
  md.precision(4);
  auto num = [](const json& j, const char* key) -> std::string {
    if (!j.contains(key) || j[key].is_null()) return "n/a";
    std::ostringstream s;
    s.precision(6);
    s << j[key].get<double>();
    return s.str();
  };
  const json& st = bundle["stats"];
  md << "# Reproduction report\n\n## Network statistics\n\n| measure | value |\n|---|---|\n";
  for (const char* k : {"nodes", "edges", "isolated", "components", "non_singleton_components", "lcc_nodes",
                        "lcc_edges", "assortativity", "alpha"}) {
    md << "| " << k << " | " << num(st, k) << " |\n";
  }
  if (st.contains("power_law_full")) md << "| hill_alpha | " << num(st["power_law_full"], "hill_alpha") << " |\n";
  const json& cm = bundle["communities"];
  md << "\n## Modularity\n\n| partition | Q |\n|---|---|\n";
  md << "| louvain | " << num(cm["louvain"], "modularity") << " |\n";
  md << "| group attribute | " << num(cm, "group_modularity") << " |\n";
  md << "| category similarity | " << num(cm["category_similarity_modularity"], "q") << " (se "
     << num(cm["category_similarity_modularity"], "standard_error") << ") |\n";
  md << "\n## Feature ablation (random forest)\n\n| variant | precision | recall | F1 | ROC-AUC |\n|---|---|---|---|---|\n";
  for (const auto& row : bundle["ablate"]["rows"]) {
    md << "| " << row["variant"].get<std::string>() << " | " << num(row, "precision") << " | "
       << num(row, "recall") << " | " << num(row, "f1") << " | " << num(row, "roc_auc") << " |\n";
  }
  md << "\n## Top-k link prediction\n\n| model | top-5 | MRR |\n|---|---|---|\n";
  for (const char* key : {"evaluate-random", "evaluate-rf", "evaluate-sage"}) {
    md << "| " << bundle[key]["model"].get<std::string>() << " | " << num(bundle[key], "top5") << " | "
       << num(bundle[key], "mrr") << " |\n";
  }
  write_text(run.path("report.md"), md.str());
  run.output("report.md");
  run.result() = bundle;
  return run.finish();
}

StageSummary run_stage(const std::string& stage, const PipelineConfig& c) {
  if (stage == "parse") return run_parse(c);
  if (stage == "build-graph") return run_build_graph(c);
  if (stage == "stats") return run_stats(c);
  if (stage == "communities") return run_communities(c);
  if (stage == "features") return run_features(c);
  if (stage == "make-dataset") return run_make_dataset(c);
  if (stage == "train-rf") return run_train_rf(c);
  if (stage == "train-sage") return run_train_sage(c);
  if (stage == "evaluate") return run_evaluate(c);
  if (stage == "ablate") return run_ablate(c);
  if (stage == "export-viz") return run_export_viz(c);
  if (stage == "repro-report") return run_repro_report(c);
  throw StageError("unknown stage '" + stage + "'");
}

}  // namespace copurchase::pipeline
