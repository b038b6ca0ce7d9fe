#include <cmath>

#include "copurchase/community.hpp"
#include "copurchase/error.hpp"
#include "copurchase/features.hpp"
#include "copurchase/graph_stats.hpp"
#include "copurchase/rng.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace copurchase;

namespace {

// O(n^2) definition: (1/2m) sum_ij [A_ij - k_i k_j / 2m] w_ij.
double pairwise_q(const CoPurchaseGraph& g, const std::function<double(NodeId, NodeId)>& w) {
  const double two_m = 2.0 * static_cast<double>(g.edge_count());
  long double q = 0.0;
  for (NodeId i = 0; i < g.node_count(); ++i) {
    for (NodeId j = 0; j < g.node_count(); ++j) {
      const double a = g.has_edge(i, j) ? 1.0 : 0.0;
      const double kk = static_cast<double>(g.degree(i)) * static_cast<double>(g.degree(j)) / two_m;
      q += (a - kk) * w(i, j);
    }
  }
  return static_cast<double>(q / two_m);
}

Partition random_partition(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t k = 1 + rng.uniform_index(6);
  std::vector<std::uint32_t> labels(n);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.uniform_index(k));
  return Partition::from_labels(labels);
}

}  // namespace

TEST_CASE("aggregated modularity equals the pairwise formula on 100 random graphs") {
  double worst = 0.0;
  int graphs = 0;
  for (std::uint64_t seed = 0; graphs < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.uniform_index(99);
    const auto g = fixtures::random_graph(n, 0.02 + 0.3 * rng.uniform01(), seed * 7 + 1);
    if (g.edge_count() == 0) continue;
    const auto p = random_partition(n, seed + 999);
    const double expected = pairwise_q(g, [&](NodeId i, NodeId j) {
      return p.community[i] == p.community[j] ? 1.0 : 0.0;
    });
    worst = std::max(worst, std::abs(modularity(g, p) - expected));
    ++graphs;
  }
  MESSAGE("max |aggregated - pairwise| = " << worst);
  CHECK(worst <= 1e-12);
}

TEST_CASE("reference fixtures") {
  const auto t = fixtures::two_triangles();
  const std::vector<std::uint32_t> split = {0, 0, 0, 1, 1, 1};
  CHECK(modularity(t, Partition::from_labels(split)) == doctest::Approx(5.0 / 14.0).epsilon(1e-15));
  CHECK(modularity_by_attribute(t, split) == doctest::Approx(5.0 / 14.0).epsilon(1e-15));
  const auto edge = CoPurchaseGraph::from_edges(2, std::vector<Edge>{{0, 1}});
  CHECK(std::abs(modularity(edge, Partition::all_in_one(2))) < 1e-15);
  CHECK(std::abs(modularity(t, Partition::all_in_one(6))) < 1e-15);
  CHECK_THROWS_AS(modularity(CoPurchaseGraph::from_edges(3, {}), Partition::singletons(3)), DataError);
}

TEST_CASE("partition relabeling is dense in first-appearance order") {
  const auto p = Partition::from_labels(std::vector<std::uint32_t>{7, 3, 7, 9});
  CHECK(p.community == std::vector<std::uint32_t>{0, 1, 0, 2});
  CHECK(p.count == 3);
}

TEST_CASE("Louvain recovers the two triangles on 10 of 10 seeds") {
  const auto t = fixtures::two_triangles();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    LouvainOptions opts;
    opts.check_moves = true;
    const auto r = louvain(t, seed, opts);
    const auto& c = r.partition.community;
    CHECK(r.partition.count == 2);
    CHECK(c[0] == c[1]);
    CHECK(c[1] == c[2]);
    CHECK(c[3] == c[4]);
    CHECK(c[4] == c[5]);
    CHECK(c[0] != c[3]);
    CHECK(r.modularity == doctest::Approx(5.0 / 14.0));
  }
}

TEST_CASE("Louvain modularity never decreases across passes") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = fixtures::random_graph(60 + seed * 3, 0.06, seed);
    if (g.edge_count() == 0) continue;
    LouvainOptions opts;
    opts.check_moves = true;  // every single move must raise Q
    const auto r = louvain(g, seed, opts);
    REQUIRE(!r.level_modularity.empty());
    for (std::size_t i = 1; i < r.level_modularity.size(); ++i) {
      CHECK(r.level_modularity[i] >= r.level_modularity[i - 1] - 1e-12);
    }
    CHECK(r.modularity == doctest::Approx(modularity(g, r.partition)).epsilon(1e-10));
    CHECK(r.modularity >= r.level_modularity.front() - 1e-12);
  }
}

TEST_CASE("Louvain is deterministic per seed and finds planted structure") {
  fixtures::CatalogSpec spec;
  spec.products = 600;
  spec.communities = 6;
  spec.within_community = 0.97;
  const auto built = build_graph(filter_valid(fixtures::make_catalog(spec, 5)));
  const auto lcc = largest_cc(built.graph).graph;
  const auto a = louvain(lcc, 3);
  const auto b = louvain(lcc, 3);
  CHECK(a.partition.community == b.partition.community);
  CHECK(a.modularity > 0.6);
}

TEST_CASE("pair-weight modularity reduces to standard modularity for a delta weight") {
  const auto g = fixtures::random_graph(50, 0.1, 12);
  const auto p = random_partition(50, 4);
  const auto res = modularity_by_pair_weight(
      g, [&](NodeId i, NodeId j) { return p.community[i] == p.community[j] ? 1.0 : 0.0; }, 0, 1);
  CHECK(res.exact);
  CHECK(res.q == doctest::Approx(modularity(g, p)).epsilon(1e-12));
}

TEST_CASE("category-similarity modularity matches the pairwise oracle and its sampler") {
  const auto g = fixtures::random_attributed_graph(120, 0.05, 21);
  const CategorySimilarity sim(4);
  const auto weight = [&](NodeId i, NodeId j) {
    return sim.weight(g.attributes(i).category_paths, g.attributes(j).category_paths);
  };
  const double expected = pairwise_q(g, weight);
  const auto exact = modularity_by_category_similarity(g, 4, 0, 1);
  CHECK(exact.exact);
  CHECK(exact.q == doctest::Approx(expected).epsilon(1e-12));
  CHECK(exact.standard_error == 0.0);

  const auto sampled = modularity_by_category_similarity(g, 4, 400'000, 7, 0);
  CHECK_FALSE(sampled.exact);
  CHECK(sampled.samples == 400'000);
  CHECK(sampled.edge_term == doctest::Approx(exact.edge_term));
  CHECK(sampled.standard_error > 0.0);
  CHECK(std::abs(sampled.q - exact.q) < 5.0 * sampled.standard_error);
  const auto again = modularity_by_category_similarity(g, 4, 400'000, 7, 0);
  CHECK(again.q == sampled.q);
}

TEST_CASE("compensated sum keeps small terms") {
  CompensatedSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  CHECK(s.value() == 1000.0);
}
