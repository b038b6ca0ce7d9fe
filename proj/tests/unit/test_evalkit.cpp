#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "copurchase/error.hpp"
#include "copurchase/evalkit.hpp"
#include "copurchase/graph_stats.hpp"
#include "copurchase/parallel.hpp"
#include "copurchase/rng.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"

using namespace copurchase;

namespace {

CoPurchaseGraph catalog_lcc(std::uint64_t seed, std::size_t products = 1500) {
  fixtures::CatalogSpec spec;
  spec.products = products;
  spec.communities = 8;
  spec.max_similar = 3;
  return largest_cc(build_graph(filter_valid(fixtures::make_catalog(spec, seed))).graph).graph;
}

/// Candidate scores that depend only on the candidate's degree and id.
class DegreeScorer final : public Scorer {
 public:
  explicit DegreeScorer(bool transformed) : transformed_(transformed) {}
  std::string name() const override { return "degree"; }
  void score(const FeatureContext& ctx, NodeId, std::span<const NodeId> candidates, std::uint64_t,
             std::span<double> out) const override {
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double s = static_cast<double>(ctx.view().degree(candidates[i])) + 1e-3 * (candidates[i] % 7);
      out[i] = transformed_ ? std::exp(0.5 * s) + 2.0 : s;
    }
  }

 private:
  bool transformed_;
};

/// Looks at the unmasked base graph, so the true neighbor always wins,
/// and counts queries whose hidden edge was still visible in the view.
class PeekingScorer final : public Scorer {
 public:
  std::string name() const override { return "peek"; }
  void score(const FeatureContext& ctx, NodeId query, std::span<const NodeId> candidates, std::uint64_t,
             std::span<double> out) const override {
    if (ctx.view().degree(query) != 0) ++leaks;
    for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = ctx.graph().has_edge(query, candidates[i]) ? 1 : 0;
  }
  mutable std::atomic<std::size_t> leaks{0};
};

}  // namespace

TEST_CASE("ranking and rank_of agree and break ties by position") {
  const std::vector<double> s = {0.5, 0.9, 0.5, 0.1, 0.9};
  CHECK(ranking(s) == std::vector<std::size_t>{1, 4, 0, 2, 3});
  const auto order = ranking(s);
  for (std::size_t pos = 0; pos < order.size(); ++pos) CHECK(rank_of(s, order[pos]) == pos + 1);
}

TEST_CASE("random scorer hits the analytic top-k rate") {
  const auto g = catalog_lcc(11);
  EvalConfig config;
  config.subgraph_nodes = 200;
  config.repeats = 50;
  config.ks = {1, 10, 50};
  config.seed = 3;
  const RandomScorer scorer(17);
  const auto report = evaluate_protocol(g, scorer, config);
  REQUIRE(report.repeats.size() == 50);

  std::size_t total = 0;
  std::vector<std::size_t> hits(config.ks.size(), 0);
  for (const auto& rep : report.repeats) {
    CHECK(rep.candidates == 199);
    CHECK(rep.structure_unchanged);
    for (std::size_t r : rep.ranks) {
      ++total;
      for (std::size_t i = 0; i < config.ks.size(); ++i) hits[i] += r <= config.ks[i];
    }
  }
  for (std::size_t i = 0; i < config.ks.size(); ++i) {
    const double p = static_cast<double>(config.ks[i]) / 199.0;
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(total));
    const double observed = static_cast<double>(hits[i]) / static_cast<double>(total);
    MESSAGE("k=" << config.ks[i] << " observed " << observed << " expected " << p << " sigma " << sigma);
    CHECK(std::abs(observed - p) < 3 * sigma);
  }
}

TEST_CASE("top-k curve is non-decreasing and reports mean and spread") {
  const auto g = catalog_lcc(5);
  EvalConfig config;
  config.subgraph_nodes = 150;
  config.repeats = 3;
  config.ks = {50, 1, 5, 10, 5};
  const DegreeScorer scorer(false);
  const auto report = evaluate_protocol(g, scorer, config);
  CHECK(report.ks == std::vector<std::size_t>{1, 5, 10, 50});
  for (std::size_t i = 1; i < report.topk.size(); ++i) CHECK(report.topk[i] >= report.topk[i - 1]);
  CHECK(report.top5 == doctest::Approx(report.topk[1]));
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    double mean = 0;
    for (const auto& r : report.repeats) mean += r.topk[i];
    CHECK(report.topk[i] == doctest::Approx(mean / 3));
    CHECK(report.topk_stddev[i] >= 0.0);
  }
  CHECK(report.mrr > 0.0);
  CHECK(report.mrr <= 1.0);
}

TEST_CASE("ranks are invariant under a monotone transform of the scores") {
  const auto g = catalog_lcc(6);
  EvalConfig config;
  config.subgraph_nodes = 120;
  config.repeats = 2;
  const auto a = evaluate_protocol(g, DegreeScorer(false), config);
  const auto b = evaluate_protocol(g, DegreeScorer(true), config);
  REQUIRE(a.repeats.size() == b.repeats.size());
  for (std::size_t r = 0; r < a.repeats.size(); ++r) CHECK(a.repeats[r].ranks == b.repeats[r].ranks);
  CHECK(a.topk == b.topk);
}

TEST_CASE("the hidden edge is invisible to scorers and restored afterwards") {
  const auto g = catalog_lcc(7);
  EvalConfig config;
  config.subgraph_nodes = 100;
  config.repeats = 2;
  const PeekingScorer scorer;
  const auto report = evaluate_protocol(g, scorer, config);
  for (const auto& rep : report.repeats) CHECK(rep.structure_unchanged);
  CHECK(scorer.leaks == 0);
  CHECK(report.mrr == 1.0);
}

TEST_CASE("evaluation is deterministic and thread-count independent") {
  const auto g = catalog_lcc(8);
  EvalConfig config;
  config.subgraph_nodes = 150;
  config.repeats = 2;
  const RandomScorer scorer(1);
  const auto a = evaluate_protocol(g, scorer, config);
  set_thread_limit(1);
  const auto b = evaluate_protocol(g, scorer, config);
  set_thread_limit(0);
  CHECK(report_to_json(a) == report_to_json(b));
}

TEST_CASE("protocol input validation") {
  const auto g = fixtures::two_triangles();  // no degree-1 nodes
  EvalConfig config;
  config.subgraph_nodes = 6;
  config.repeats = 1;
  CHECK_THROWS_AS(evaluate_protocol(g, RandomScorer(0), config), DataError);
}

TEST_CASE("precision, recall and F1 from a confusion matrix") {
  const std::vector<std::uint8_t> y = {1, 1, 1, 0, 0, 0, 0, 1};
  const std::vector<double> s = {0.9, 0.6, 0.2, 0.7, 0.1, 0.3, 0.4, 0.8};
  const auto m = precision_recall_f1(y, s);
  CHECK(m.tp == 3);
  CHECK(m.fn == 1);
  CHECK(m.fp == 1);
  CHECK(m.tn == 3);
  CHECK(m.precision == doctest::Approx(0.75));
  CHECK(m.recall == doctest::Approx(0.75));
  CHECK(m.f1 == doctest::Approx(0.75));

  const auto none = precision_recall_f1(y, std::vector<double>(8, 0.0));
  CHECK(none.no_predicted_positives);
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
}

TEST_CASE("ROC-AUC matches a pairwise count with half credit for ties") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> y(60);
    std::vector<double> s(60);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = rng.uniform01() < 0.4;
      s[i] = std::round(rng.uniform01() * 10) / 10;  // plenty of ties
    }
    y[0] = 1;
    y[1] = 0;
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      for (std::size_t j = 0; j < y.size(); ++j) {
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
      }
    }
    CHECK(roc_auc(y, s) == doctest::Approx(wins / pairs).epsilon(1e-12));
  }
  const std::vector<std::uint8_t> one_class = {1, 1};
  const std::vector<double> s = {0.1, 0.2};
  CHECK_THROWS_AS(roc_auc(one_class, s), DataError);
}

TEST_CASE("ablation trains one forest per variant") {
  const auto g = catalog_lcc(9);
  const auto cc = all_clustering(g);
  const FeatureContext ctx(g, cc);
  DatasetSpec spec;
  spec.positives = std::min<std::size_t>(200, one_degree_nodes(g).size());
  spec.negatives = spec.positives;
  const auto samples = make_training_set(g, spec, 2);
  const auto parts = split(samples, 0.8, 3);
  ForestParams params;
  params.n_trees = 20;
  const std::vector<FeatureVariant> variants = {FeatureVariant::Full, FeatureVariant::NoGroup,
                                                FeatureVariant::NoCategory, FeatureVariant::NoDegree,
                                                FeatureVariant::NoCluster};
  const auto rows = run_ablation(ctx, parts, params, variants, 4);
  REQUIRE(rows.size() == 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].variant == variants[i]);
    CHECK(rows[i].metrics.roc_auc >= 0.0);
    CHECK(rows[i].metrics.roc_auc <= 1.0);
    CHECK(rows[i].metrics.tp + rows[i].metrics.fp + rows[i].metrics.tn + rows[i].metrics.fn == parts.test.size());
  }
  // Planted communities make the full feature set clearly better than chance.
  CHECK(rows[0].metrics.roc_auc > 0.7);

  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "variant,precision,recall,f1,roc_auc");
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 5);
}

TEST_CASE("report serialization") {
  const auto g = catalog_lcc(10);
  EvalConfig config;
  config.subgraph_nodes = 80;
  config.repeats = 2;
  config.ks = {1, 5, 10};
  const auto report = evaluate_protocol(g, RandomScorer(2), config);
  const auto j = nlohmann::json::parse(report_to_json(report));
  CHECK(j.at("model") == "random");
  CHECK(j.at("topk_curve").size() == 3);
  CHECK(j.at("repeats").size() == 2);
  CHECK(j.at("top5").get<double>() == doctest::Approx(report.top5));

  std::ostringstream csv;
  write_topk_csv(csv, report);
  CHECK(csv.str().rfind("k,accuracy,stddev\n", 0) == 0);
}
