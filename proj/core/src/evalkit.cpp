#include "copurchase/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "copurchase/error.hpp"
#include "copurchase/graph_stats.hpp"
#include "copurchase/parallel.hpp"
#include "copurchase/rng.hpp"
#include "json.hpp"

namespace copurchase {

void RandomScorer::score(const FeatureContext&, NodeId, std::span<const NodeId> candidates,
                         std::uint64_t stream, std::span<double> out) const {
  Rng rng(derive_seed(seed_, stream));
  for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = rng.uniform01();
}

void ForestScorer::score(const FeatureContext& ctx, NodeId query,
                         std::span<const NodeId> candidates, std::uint64_t,
                         std::span<double> out) const {
  std::vector<double> row;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    pair_feature(ctx, query, candidates[i], variant_, row);
    out[i] = forest_.predict_proba(row);
  }
}

void SageScorer::score(const FeatureContext& ctx, NodeId query, std::span<const NodeId> candidates,
                       std::uint64_t stream, std::span<double> out) const {
  const std::uint64_t query_seed = derive_seed(seed_, stream);
  const bool per_candidate_source = hyper_.proxy_aggregation && ctx.view().degree(query) == 0;
  NodeEmbedding source;
  if (!per_candidate_source) {
    Rng rng(derive_seed(query_seed, 0));
    source = embed_source(ctx, query, query, params_, hyper_, rng);
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const NodeId v = candidates[i];
    Rng rng(derive_seed(query_seed, static_cast<std::uint64_t>(v) + 1));
    if (per_candidate_source) source = embed_source(ctx, query, v, params_, hyper_, rng);
    const auto target = embed_node(ctx, v, params_, hyper_.neighbor_samples, rng);
    const auto sim = ctx.category_similarity(query, v);
    out[i] = sigmoid(head_logit(params_, source.h, target.h, sim));
  }
}

std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::size_t rank_of(std::span<const double> scores, std::size_t truth) {
  const double s = scores[truth];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > s || (scores[i] == s && i < truth)) ++ahead;
  }
  return ahead + 1;
}

std::vector<std::size_t> default_ks() { return {1, 5, 10, 20, 50, 100, 200, 300, 400, 500}; }

std::vector<std::pair<std::size_t, double>> EvalReport::curve() const {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < ks.size(); ++i) out.emplace_back(ks[i], topk[i]);
  return out;
}

EvalReport evaluate_protocol(const CoPurchaseGraph& lcc, const Scorer& scorer,
                             const EvalConfig& config) {
  if (config.repeats == 0) throw DataError("evaluate: repeats must be >= 1");
  if (config.subgraph_nodes < 2) throw DataError("evaluate: subgraph needs at least 2 nodes");
  if (config.subgraph_nodes > lcc.node_count()) {
    throw DataError("evaluate: subgraph size " + std::to_string(config.subgraph_nodes) +
                    " exceeds graph size " + std::to_string(lcc.node_count()));
  }

  EvalReport report;
  report.model = scorer.name();
  report.config = config;
  report.ks = config.ks;
  std::sort(report.ks.begin(), report.ks.end());
  report.ks.erase(std::unique(report.ks.begin(), report.ks.end()), report.ks.end());

  for (std::size_t r = 0; r < config.repeats; ++r) {
    EvalRepeat rep;
    rep.seed = derive_seed(config.seed, r);
    auto nodes = bfs_sample(lcc, config.subgraph_nodes, rep.seed);
    std::sort(nodes.begin(), nodes.end());
    const Subgraph sub = induced_subgraph(lcc, nodes);
    const CoPurchaseGraph& g = sub.graph;
    const std::uint64_t before = structure_checksum(g);

    const auto clustering = all_clustering(g);
    const FeatureContext ctx(g, clustering, config.features);
    const auto queries = one_degree_nodes(g);
    if (queries.empty()) {
      throw DataError("evaluate: BFS sample (seed " + std::to_string(rep.seed) +
                      ") has no degree-1 nodes; use a larger subgraph or another seed");
    }

    rep.queries = queries.size();
    rep.candidates = g.node_count() - 1;
    rep.ranks.assign(queries.size(), 0);
    parallel_for(queries.size(), [&](std::size_t qi) {
      const NodeId u = queries[qi];
      const NodeId t = g.neighbors(u)[0];
      const FeatureContext masked = ctx.masked(u, t);
      std::vector<NodeId> candidates;
      candidates.reserve(g.node_count() - 1);
      std::size_t truth = 0;
      for (NodeId v = 0; v < g.node_count(); ++v) {
        if (v == u) continue;
        if (v == t) truth = candidates.size();
        candidates.push_back(v);
      }
      std::vector<double> scores(candidates.size());
      scorer.score(masked, u, candidates, derive_seed(rep.seed, u), scores);
      rep.ranks[qi] = rank_of(scores, truth);
    });

    rep.structure_unchanged = structure_checksum(g) == before;
    if (!rep.structure_unchanged) {
      throw InvariantViolation("evaluation modified the sampled subgraph");
    }
    for (std::size_t k : report.ks) {
      const auto hits = std::count_if(rep.ranks.begin(), rep.ranks.end(),
                                      [k](std::size_t rank) { return rank <= k; });
      rep.topk.push_back(static_cast<double>(hits) / static_cast<double>(rep.queries));
    }
    double rr = 0.0;
    for (std::size_t rank : rep.ranks) rr += 1.0 / static_cast<double>(rank);
    rep.mrr = rr / static_cast<double>(rep.queries);
    report.repeats.push_back(std::move(rep));
  }

  const double R = static_cast<double>(report.repeats.size());
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    double mean = 0.0;
    for (const auto& rep : report.repeats) mean += rep.topk[i];
    mean /= R;
    double var = 0.0;
    for (const auto& rep : report.repeats) var += (rep.topk[i] - mean) * (rep.topk[i] - mean);
    report.topk.push_back(mean);
    report.topk_stddev.push_back(R > 1 ? std::sqrt(var / (R - 1)) : 0.0);
    if (report.ks[i] == 5) report.top5 = mean;
  }
  if (std::find(report.ks.begin(), report.ks.end(), 5) == report.ks.end()) {
    double mean = 0.0;
    for (const auto& rep : report.repeats) {
      mean += static_cast<double>(std::count_if(rep.ranks.begin(), rep.ranks.end(),
                                                [](std::size_t rank) { return rank <= 5; })) /
              static_cast<double>(rep.queries);
    }
    report.top5 = mean / R;
  }
  for (const auto& rep : report.repeats) report.mrr += rep.mrr / R;
  return report;
}

ClassificationMetrics precision_recall_f1(std::span<const std::uint8_t> labels,
                                          std::span<const double> scores, double threshold) {
  if (labels.size() != scores.size()) throw DataError("metrics: labels and scores differ in length");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++m.tp;
    else if (predicted) ++m.fp;
    else if (actual) ++m.fn;
    else ++m.tn;
  }
  m.no_predicted_positives = (m.tp + m.fp) == 0;
  m.precision = m.no_predicted_positives ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  m.recall = (m.tp + m.fn) == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  m.f1 = (m.precision + m.recall) == 0.0 ? 0.0
                                         : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

double roc_auc(std::span<const std::uint8_t> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw DataError("roc_auc: labels and scores differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average 1-based ranks over tie groups, then sum ranks of positives.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw DataError("roc_auc: need both classes");
  const double P = static_cast<double>(positives);
  const double N = static_cast<double>(negatives);
  return (positive_rank_sum - P * (P + 1.0) / 2.0) / (P * N);
}

ClassificationMetrics classification_metrics(std::span<const std::uint8_t> labels,
                                             std::span<const double> scores, double threshold) {
  auto m = precision_recall_f1(labels, scores, threshold);
  m.roc_auc = roc_auc(labels, scores);
  return m;
}

std::vector<AblationRow> run_ablation(const FeatureContext& ctx, const Split& split,
                                      const ForestParams& params,
                                      std::span<const FeatureVariant> variants,
                                      std::uint64_t seed) {
  std::vector<AblationRow> rows;
  if (variants.empty()) return rows;
  const auto y_train = labels_of(split.train);
  const auto y_test = labels_of(split.test);
  for (FeatureVariant variant : variants) {
    const auto X_train = build_features(ctx, split.train, variant);
    const auto X_test = build_features(ctx, split.test, variant);
    const Forest forest = train_forest(X_train, y_train, params, seed);
    const auto scores = predict_proba(forest, X_test);
    rows.push_back({variant, classification_metrics(y_test, scores)});
  }
  return rows;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["model"] = report.model;
  j["top5"] = report.top5;
  j["mrr"] = report.mrr;
  auto& curve = j["topk_curve"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    curve.push_back({{"k", report.ks[i]},
                     {"accuracy", report.topk[i]},
                     {"stddev", report.topk_stddev[i]}});
  }
  auto& reps = j["repeats"] = nlohmann::json::array();
  for (const auto& r : report.repeats) {
    reps.push_back({{"seed", r.seed},
                    {"queries", r.queries},
                    {"candidates", r.candidates},
                    {"topk", r.topk},
                    {"mrr", r.mrr},
                    {"structure_unchanged", r.structure_unchanged}});
  }
  j["config"] = {{"subgraph_nodes", report.config.subgraph_nodes},
                 {"ks", report.config.ks},
                 {"seed", report.config.seed},
                 {"repeats", report.config.repeats},
                 {"category_depth", report.config.features.category_depth},
                 {"include_source_structure", report.config.features.include_source_structure}};
  return j.dump(2);
}

void write_topk_csv(std::ostream& out, const EvalReport& report) {
  out << "k,accuracy,stddev\n";
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    out << report.ks[i] << ',' << report.topk[i] << ',' << report.topk_stddev[i] << '\n';
  }
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "variant,precision,recall,f1,roc_auc\n";
  for (const auto& r : rows) {
    out << variant_name(r.variant) << ',' << r.metrics.precision << ',' << r.metrics.recall << ','
        << r.metrics.f1 << ',' << r.metrics.roc_auc << '\n';
  }
}

}  // namespace copurchase
