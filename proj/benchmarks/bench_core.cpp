#include <benchmark/benchmark.h>

#include <vector>

#include "copurchase/community.hpp"
#include "copurchase/dataset.hpp"
#include "copurchase/evalkit.hpp"
#include "copurchase/forest.hpp"
#include "copurchase/graph_stats.hpp"
#include "copurchase/rng.hpp"

using namespace copurchase;

namespace {

// Preferential-attachment style graph: each new node links to one earlier
// endpoint drawn from the edge list, plus a second with probability `p2`, which gives a heavy-tailed degree
// distribution like the co-purchase network.
std::vector<Edge> scale_free_edges(std::size_t n, double p2, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  std::vector<NodeId> ends = {0, 1};
  edges.emplace_back(0, 1);
  for (NodeId v = 2; v < n; ++v) {
    const std::size_t links = rng.uniform01() < p2 ? 2 : 1;
    for (std::size_t j = 0; j < links; ++j) {
      const NodeId t = ends[rng.uniform_index(ends.size())];
      edges.emplace_back(v, t);
      ends.push_back(v);
      ends.push_back(t);
    }
  }
  return edges;
}

std::vector<NodeAttributes> attributes(std::size_t n, std::uint64_t seed) {
  static const char* labels[] = {"Book", "Music", "DVD", "Video"};
  Rng rng(seed);
  std::vector<NodeAttributes> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].asin = std::to_string(i);
    out[i].group = Group::from_label(labels[rng.uniform_index(4)]);
    const auto c = static_cast<std::int64_t>(rng.uniform_index(20));
    out[i].category_paths = {{283155, 1000, 2000 + c, 3000 + c * 10 + static_cast<std::int64_t>(rng.uniform_index(5))}};
  }
  return out;
}

CoPurchaseGraph make_graph(std::size_t n) {
  return CoPurchaseGraph::from_edges(n, scale_free_edges(n, 0.5, 1), attributes(n, 2));
}

void BM_BuildCsr(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto edges = scale_free_edges(n, 0.5, 1);
  const auto attrs = attributes(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(CoPurchaseGraph::from_edges(n, edges, attrs));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(edges.size()));
}
BENCHMARK(BM_BuildCsr)->Arg(10'000)->Arg(100'000);

void BM_Clustering(benchmark::State& state) {
  const auto g = make_graph(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(all_clustering(g));
}
BENCHMARK(BM_Clustering)->Arg(10'000)->Arg(100'000);

void BM_Louvain(benchmark::State& state) {
  const auto g = make_graph(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(louvain(g, 1).modularity);
}
BENCHMARK(BM_Louvain)->Arg(10'000)->Arg(50'000)->Unit(benchmark::kMillisecond);

void BM_CategorySimilarity(benchmark::State& state) {
  const auto attrs = attributes(1000, 3);
  const CategorySimilarity sim(8);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim(attrs[i % 1000].category_paths, attrs[(i * 7 + 3) % 1000].category_paths));
    ++i;
  }
}
BENCHMARK(BM_CategorySimilarity);

void BM_ForestTraining(benchmark::State& state) {
  const auto g = make_graph(20'000);
  const auto cc = all_clustering(g);
  const FeatureContext ctx(g, cc);
  DatasetSpec spec;
  spec.positives = spec.negatives = static_cast<std::size_t>(state.range(0));
  const auto samples = make_training_set(g, spec, 4);
  const auto X = build_features(ctx, samples, FeatureVariant::Full);
  const auto y = labels_of(samples);
  ForestParams params;
  for (auto _ : state) benchmark::DoNotOptimize(train_forest(X, y, params, 5));
}
BENCHMARK(BM_ForestTraining)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_EvaluateRandom(benchmark::State& state) {
  const auto g = make_graph(50'000);
  EvalConfig config;
  config.subgraph_nodes = static_cast<std::size_t>(state.range(0));
  config.repeats = 1;
  const RandomScorer scorer(1);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_protocol(g, scorer, config).top5);
}
BENCHMARK(BM_EvaluateRandom)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
