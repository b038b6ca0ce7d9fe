#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "copurchase/error.hpp"
#include "copurchase/graph_stats.hpp"
#include "copurchase/rng.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace copurchase;

namespace {

// Union-find component count.
std::size_t uf_components(const CoPurchaseGraph& g) {
  std::vector<NodeId> parent(g.node_count());
  std::iota(parent.begin(), parent.end(), NodeId{0});
  auto find = [&](NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  g.for_each_edge([&](NodeId u, NodeId v) { parent[find(u)] = find(v); });
  std::size_t roots = 0;
  for (NodeId v = 0; v < g.node_count(); ++v) roots += find(v) == v;
  return roots;
}

// Mixing-matrix assortativity computed straight from the definition.
double mixing_matrix_r(const CoPurchaseGraph& g, const std::vector<std::uint32_t>& labels) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> e;
  double total = 0.0;
  g.for_each_edge([&](NodeId u, NodeId v) {
    e[{labels[u], labels[v]}] += 1.0;
    e[{labels[v], labels[u]}] += 1.0;
    total += 2.0;
  });
  std::map<std::uint32_t, double> a, b;
  double trace = 0.0;
  for (auto& [key, w] : e) {
    w /= total;
    a[key.first] += w;
    b[key.second] += w;
    if (key.first == key.second) trace += w;
  }
  double ab = 0.0;
  for (const auto& [label, x] : a) ab += x * b[label];
  return (trace - ab) / (1.0 - ab);
}

double brute_clustering(const CoPurchaseGraph& g, NodeId v) {
  const auto nb = g.neighbors(v);
  if (nb.size() < 2) return 0.0;
  std::size_t links = 0;
  for (std::size_t i = 0; i < nb.size(); ++i)
    for (std::size_t j = i + 1; j < nb.size(); ++j) links += g.has_edge(nb[i], nb[j]);
  return 2.0 * static_cast<double>(links) / static_cast<double>(nb.size() * (nb.size() - 1));
}

std::vector<std::uint32_t> random_labels(std::size_t n, std::uint32_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint32_t> l(n);
  for (auto& x : l) x = static_cast<std::uint32_t>(rng.uniform_index(k));
  return l;
}

}  // namespace

TEST_CASE("component counts match union-find") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = fixtures::random_graph(80, 0.02, seed);
    const auto c = connected_components(g);
    CHECK(c.count() == uf_components(g));
    CHECK(std::accumulate(c.size.begin(), c.size.end(), std::size_t{0}) == g.node_count());
    std::size_t non_singleton = 0;
    for (auto s : c.size) non_singleton += s > 1;
    CHECK(c.non_singleton() == non_singleton);
    const auto desc = c.sizes_descending();
    CHECK(std::is_sorted(desc.rbegin(), desc.rend()));
  }
}

TEST_CASE("largest component ties go to the component with the smallest node") {
  const std::vector<Edge> edges = {{4, 5}, {0, 1}, {2, 3}};
  const auto g = CoPurchaseGraph::from_edges(7, edges);
  const auto lcc = largest_cc(g);
  CHECK(lcc.original_ids == std::vector<NodeId>{0, 1});
  CHECK_THROWS_AS(largest_cc(CoPurchaseGraph::from_edges(3, {})), DataError);
}

TEST_CASE("assortativity matches the mixing-matrix oracle") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t n = 10 + seed % 41;
    const auto g = fixtures::random_graph(n, 0.15, seed);
    if (g.edge_count() == 0) continue;
    const auto labels = random_labels(n, 1 + seed % 5, seed + 100);
    const double expected = mixing_matrix_r(g, labels);
    if (!std::isfinite(expected)) continue;  // single label: 0/0
    CHECK(attribute_assortativity(g, labels) == doctest::Approx(expected).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 30);
}

TEST_CASE("assortativity extremes") {
  // Two disconnected cliques with distinct labels: r = 1.
  std::vector<Edge> edges = {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}};
  const auto g = CoPurchaseGraph::from_edges(6, edges);
  CHECK(attribute_assortativity(g, std::vector<std::uint32_t>{0, 0, 0, 1, 1, 1}) == doctest::Approx(1.0));
  // Complete bipartite K3,3 across two labels: r = -1.
  edges.clear();
  for (NodeId u = 0; u < 3; ++u)
    for (NodeId v = 3; v < 6; ++v) edges.emplace_back(u, v);
  const auto b = CoPurchaseGraph::from_edges(6, edges);
  CHECK(attribute_assortativity(b, std::vector<std::uint32_t>{0, 0, 0, 1, 1, 1}) == doctest::Approx(-1.0));
}

TEST_CASE("group labels number the four main groups first") {
  const auto g = fixtures::random_attributed_graph(30, 0.1, 2, 6);
  const auto labels = group_labels(g);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const auto kind = g.attributes(v).group.kind;
    if (kind != Group::Kind::Other) CHECK(labels[v] == static_cast<std::uint32_t>(kind));
    else CHECK(labels[v] >= 4);
  }
}

TEST_CASE("power-law fit recovers the exponent of inverse-CDF samples") {
  const double alpha = 3.5;
  Rng rng(2024);
  std::vector<std::size_t> degrees(1'000'000);
  for (auto& k : degrees) {
    // P(K >= k) = k^(1 - alpha) for integer k >= 1.
    const double u = 1.0 - rng.uniform01();
    k = static_cast<std::size_t>(std::floor(std::pow(u, -1.0 / (alpha - 1.0))));
  }
  const auto fit = fit_power_law_ccdf(degree_distribution(degrees));
  MESSAGE("ccdf alpha " << fit.alpha << ", hill alpha " << fit.hill_alpha << ", r2 " << fit.r_squared);
  CHECK(std::abs(fit.alpha - alpha) <= 0.2);
  CHECK(fit.r_squared > 0.9);
  // The k_min - 1/2 continuous approximation is only accurate away from k = 1.
  const auto tail = fit_power_law_ccdf(degree_distribution(degrees), 6);
  MESSAGE("k_min 6: ccdf alpha " << tail.alpha << ", hill alpha " << tail.hill_alpha);
  CHECK(std::abs(tail.hill_alpha - alpha) <= 0.2);
}

TEST_CASE("power-law fit needs enough distinct degrees") {
  const std::vector<std::size_t> degrees = {1, 1, 2, 2, 3};
  CHECK_THROWS_AS(fit_power_law_ccdf(degree_distribution(degrees)), DataError);
}

TEST_CASE("degree distribution ccdf starts at one and decreases") {
  const auto g = fixtures::random_graph(200, 0.03, 8);
  const auto d = degree_distribution(g);
  REQUIRE(!d.ccdf.empty());
  CHECK(d.ccdf.front().second == doctest::Approx(1.0));
  for (std::size_t i = 1; i < d.ccdf.size(); ++i) CHECK(d.ccdf[i].second < d.ccdf[i - 1].second);
  std::size_t total = 0;
  for (const auto& [k, n] : d.histogram) total += n;
  CHECK(total == g.node_count());
}

TEST_CASE("clustering coefficients match brute-force triangle counts") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = fixtures::random_graph(70, 0.12, seed);
    const auto all = all_clustering(g);
    for (NodeId v = 0; v < g.node_count(); ++v) {
      CHECK(all[v] == doctest::Approx(brute_clustering(g, v)));
      CHECK(clustering_coefficient(g, v) == doctest::Approx(all[v]));
    }
  }
  const auto t = fixtures::two_triangles();
  CHECK(clustering_coefficient(t, 0) == doctest::Approx(1.0));
  CHECK(clustering_coefficient(t, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(clustering_coefficient(MaskedView(t, 0, 1), 2) == doctest::Approx(0.0));
}

TEST_CASE("degree centrality normalizes by n - 1") {
  const auto t = fixtures::two_triangles();
  const auto c = degree_centrality(t);
  CHECK(c[2] == doctest::Approx(3.0 / 5.0));
  CHECK(c[0] == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("BFS sample is connected, distinct and seeded") {
  const auto g = largest_cc(fixtures::random_graph(300, 0.02, 4)).graph;
  const auto a = bfs_sample(g, 100, 9);
  CHECK(a == bfs_sample(g, 100, 9));
  CHECK(a.size() == 100);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  const auto sub = induced_subgraph(g, a);
  CHECK(connected_components(sub.graph).count() == 1);
  CHECK_THROWS_AS(bfs_sample(g, g.node_count() + 1, 1), DataError);
}

TEST_CASE("top-degree neighborhood contains the hubs and their neighbors") {
  const auto g = fixtures::random_graph(100, 0.05, 6);
  const auto sub = top_degree_neighborhood(g, 3);
  std::vector<NodeId> order(g.node_count());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return g.degree(a) > g.degree(b); });
  for (int i = 0; i < 3; ++i) {
    CHECK(std::count(sub.original_ids.begin(), sub.original_ids.end(), order[i]) == 1);
    for (NodeId w : g.neighbors(order[i])) {
      CHECK(std::count(sub.original_ids.begin(), sub.original_ids.end(), w) == 1);
    }
  }
}

TEST_CASE("structure checksum sees single-edge changes") {
  const auto a = fixtures::two_triangles();
  std::vector<Edge> edges = a.edges();
  edges.pop_back();
  const auto b = CoPurchaseGraph::from_edges(6, edges);
  CHECK(structure_checksum(a) == structure_checksum(fixtures::two_triangles()));
  CHECK(structure_checksum(a) != structure_checksum(b));
}
