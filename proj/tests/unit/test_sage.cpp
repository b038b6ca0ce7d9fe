#include <cmath>

#include "copurchase/error.hpp"
#include "copurchase/graph_stats.hpp"
#include "copurchase/parallel.hpp"
#include "copurchase/sage.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace copurchase;

namespace {

CoPurchaseGraph planted_graph(std::uint64_t seed) {
  fixtures::CatalogSpec spec;
  spec.products = 1200;
  spec.communities = 12;
  spec.within_community = 0.98;
  spec.max_similar = 3;
  return largest_cc(build_graph(filter_valid(fixtures::make_catalog(spec, seed))).graph).graph;
}

std::vector<NodeId> bfs_distances(const CoPurchaseGraph& g, NodeId s) {
  std::vector<NodeId> dist(g.node_count(), ~NodeId{0});
  std::vector<NodeId> q = {s};
  dist[s] = 0;
  for (std::size_t h = 0; h < q.size(); ++h) {
    for (NodeId w : g.neighbors(q[h])) {
      if (dist[w] == ~NodeId{0}) {
        dist[w] = dist[q[h]] + 1;
        q.push_back(w);
      }
    }
  }
  return dist;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  const auto g = fixtures::random_attributed_graph(30, 0.12, 3);
  const auto cc = all_clustering(g);
  FeatureConfig config;
  config.category_depth = 4;
  const FeatureContext ctx(g, cc, config);
  SageHyper hyper;
  hyper.hidden = 5;
  hyper.neighbor_samples = 64;

  std::vector<PairSample> batch;
  const auto edges = g.edges();
  for (std::size_t i = 0; i < 6 && i < edges.size(); ++i) batch.push_back({edges[i].first, edges[i].second, 1});
  for (NodeId u = 0; u < 6; ++u) {
    const NodeId v = (u * 7 + 11) % 30;
    if (u != v && !g.has_edge(u, v)) batch.push_back({u, v, 0});
  }

  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto params = SageParams::initialize(hyper.hidden, 4, seed);
    const double err = grad_check(ctx, params, batch, hyper);
    MESSAGE("max relative gradient error " << err);
    CHECK(err < 1e-4);
  }
  // A deliberately wrong gradient must be caught.
  const auto params = SageParams::initialize(hyper.hidden, 4, 9);
  const double broken = grad_check(ctx, params, batch, hyper, [](SageParams& g) { g.b_head += 0.1; });
  CHECK(broken > 1e-2);

  hyper.neighbor_samples = 1;
  CHECK_THROWS_AS(grad_check(ctx, params, batch, hyper), DataError);
}

TEST_CASE("scores ignore anything two or more hops away") {
  const auto base = fixtures::random_attributed_graph(80, 0.04, 8);
  const NodeId u = 0, v = 1;
  const auto du = bfs_distances(base, u), dv = bfs_distances(base, v);
  SageHyper hyper;
  hyper.neighbor_samples = 100;
  const auto params = SageParams::initialize(hyper.hidden, 8, 2);

  auto score = [&](const CoPurchaseGraph& g) {
    const auto cc = all_clustering(g);
    const FeatureContext ctx(g, cc);
    Rng rng(1);
    return score_pair(ctx, u, v, params, hyper, rng);
  };
  const double reference = score(base);

  // Relabel every node at distance >= 2 from both endpoints.
  auto attrs = std::vector<NodeAttributes>(base.all_attributes().begin(), base.all_attributes().end());
  std::size_t changed = 0;
  for (NodeId w = 0; w < base.node_count(); ++w) {
    if (std::min(du[w], dv[w]) >= 2) {
      attrs[w].group = Group::from_label(attrs[w].group.kind == Group::Kind::Book ? "Music" : "Book");
      attrs[w].category_paths = {{99, 98, 97}};
      ++changed;
    }
  }
  REQUIRE(changed > 10);
  // Rewire among nodes at distance >= 3, which cannot touch any neighbor's
  // degree or clustering.
  auto edges = base.edges();
  std::vector<NodeId> far;
  for (NodeId w = 0; w < base.node_count(); ++w) {
    if (std::min(du[w], dv[w]) >= 3) far.push_back(w);
  }
  for (std::size_t i = 0; i + 1 < far.size(); i += 2) edges.emplace_back(far[i], far[i + 1]);
  const auto perturbed = CoPurchaseGraph::from_edges(base.node_count(), edges, attrs);
  CHECK(score(perturbed) == reference);

  // A one-hop change does move the score.
  auto near_attrs = attrs;
  REQUIRE(base.degree(v) > 0);
  near_attrs[base.neighbors(v)[0]].group = Group::from_label("Video");
  near_attrs[base.neighbors(v)[0]].group.kind =
      attrs[base.neighbors(v)[0]].group.kind == Group::Kind::Video ? Group::Kind::DVD : Group::Kind::Video;
  CHECK(score(CoPurchaseGraph::from_edges(base.node_count(), base.edges(), near_attrs)) != reference);
}

TEST_CASE("an isolated node's embedding depends only on its own attributes") {
  const auto params = SageParams::initialize(16, 8, 4);
  SageHyper hyper;
  NodeAttributes lone;
  lone.asin = "LONE";
  lone.group = Group::from_label("DVD");
  lone.category_paths = {{1, 2, 3}};

  std::vector<std::vector<double>> seen;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto g0 = fixtures::random_attributed_graph(40, 0.1 + 0.05 * seed, seed);
    auto attrs = std::vector<NodeAttributes>(g0.all_attributes().begin(), g0.all_attributes().end());
    attrs.push_back(lone);
    const auto g = CoPurchaseGraph::from_edges(41, g0.edges(), attrs);
    const auto cc = all_clustering(g);
    const FeatureContext ctx(g, cc);
    Rng rng(seed);
    seen.push_back(embed_source(ctx, 40, 3, params, hyper, rng).h);
  }
  for (const auto& h : seen) CHECK(h == seen.front());

  // With proxy aggregation the isolated source borrows the target's neighbors.
  hyper.proxy_aggregation = true;
  const auto g0 = fixtures::random_attributed_graph(40, 0.2, 1);
  auto attrs = std::vector<NodeAttributes>(g0.all_attributes().begin(), g0.all_attributes().end());
  attrs.push_back(lone);
  const auto g = CoPurchaseGraph::from_edges(41, g0.edges(), attrs);
  const auto cc = all_clustering(g);
  const FeatureContext ctx(g, cc);
  Rng rng(0);
  const auto borrowed = embed_source(ctx, 40, 3, params, hyper, rng);
  Rng rng2(0);
  const auto target_mean = neighbor_mean(ctx, 3, hyper.neighbor_samples, rng2);
  CHECK(borrowed.neigh_mean == target_mean);
}

TEST_CASE("training on planted communities drives the loss below 0.3") {
  const auto g = planted_graph(2);
  const auto cc = all_clustering(g);
  const FeatureContext ctx(g, cc);
  DatasetSpec spec;
  spec.positives = std::min<std::size_t>(400, one_degree_nodes(g).size());
  spec.negatives = spec.positives;
  const auto samples = make_training_set(g, spec, 1);
  SageHyper hyper;
  hyper.epochs = 30;
  hyper.seed = 5;
  const auto result = train_sage(ctx, samples, hyper);
  REQUIRE(result.epoch_loss.size() == 30);
  MESSAGE("first/last epoch loss " << result.epoch_loss.front() << " / " << result.epoch_loss.back());
  CHECK(result.epoch_loss.back() < 0.3);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());

  SUBCASE("training is deterministic per seed, independent of thread count") {
    set_thread_limit(1);
    const auto again = train_sage(ctx, samples, hyper);
    set_thread_limit(0);
    CHECK(again.params == result.params);
    CHECK(again.epoch_loss == result.epoch_loss);
    hyper.seed = 6;
    CHECK(train_sage(ctx, samples, hyper).params != result.params);
  }
}

TEST_CASE("hyperparameter validation") {
  SageHyper h;
  CHECK_NOTHROW(h.validate());
  h.hidden = 0;
  CHECK_THROWS_AS(h.validate(), DataError);
  h = {};
  h.momentum = 1.0;
  CHECK_THROWS_AS(h.validate(), DataError);
  h = {};
  h.learning_rate = 0.0;
  CHECK_THROWS_AS(h.validate(), DataError);
}

TEST_CASE("parameters round-trip through JSON") {
  fixtures::TempDir dir("sage");
  const auto p = SageParams::initialize(7, 5, 3);
  SageHyper h;
  h.hidden = 7;
  h.seed = 99;
  h.proxy_aggregation = true;
  const auto path = (dir.path() / "s.json").string();
  save_sage(path, p, h);
  SageHyper loaded_h;
  const auto q = load_sage(path, &loaded_h);
  CHECK(q == p);
  CHECK(loaded_h.seed == 99);
  CHECK(loaded_h.proxy_aggregation);
  CHECK(p.size() == 7 * 6 * 2 + 7 + (2 * 7 + 5) + 1);
  CHECK(p.all_finite());
}
