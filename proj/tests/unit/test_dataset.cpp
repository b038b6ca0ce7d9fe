#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "copurchase/dataset.hpp"
#include "copurchase/error.hpp"
#include "copurchase/graph_stats.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace copurchase;

namespace {

CoPurchaseGraph catalog_graph(std::uint64_t seed, std::size_t products = 2000) {
  fixtures::CatalogSpec spec;
  spec.products = products;
  return build_graph(filter_valid(fixtures::make_catalog(spec, seed))).graph;
}

}  // namespace

TEST_CASE("training set respects the sampling contract") {
  const auto g = largest_cc(catalog_graph(1)).graph;
  const auto pool = one_degree_nodes(g);
  REQUIRE(pool.size() >= 50);
  DatasetSpec spec;
  spec.positives = 50;
  spec.negatives = 70;
  const auto samples = make_training_set(g, spec, 3);
  CHECK(samples.size() == 120);
  CHECK_NOTHROW(check_samples(g, samples));

  std::set<NodeId> positive_sources;
  std::size_t positives = 0;
  for (const auto& s : samples) {
    if (!s.label) continue;
    ++positives;
    positive_sources.insert(s.source);
    CHECK(g.degree(s.source) == 1);
    CHECK(g.neighbors(s.source)[0] == s.target);
  }
  CHECK(positives == 50);
  CHECK(positive_sources.size() == 50);  // without replacement
  CHECK(make_training_set(g, spec, 3) == samples);
  CHECK(make_training_set(g, spec, 4) != samples);
}

TEST_CASE("isolated-mode negatives point at degree-0 nodes") {
  const auto g = catalog_graph(2);
  DatasetSpec spec;
  spec.positives = 20;
  spec.negatives = 40;
  spec.negative_mode = NegativeMode::Isolated;
  const auto samples = make_training_set(g, spec, 1);
  CHECK_NOTHROW(check_samples(g, samples, NegativeMode::Isolated));
  for (const auto& s : samples) {
    if (!s.label) CHECK(g.degree(s.target) == 0);
  }
  CHECK_THROWS_AS(make_training_set(largest_cc(g).graph, spec, 1), DataError);
}

TEST_CASE("too few 1-degree nodes is a data error") {
  DatasetSpec spec;
  spec.positives = 5;
  CHECK_THROWS_AS(make_training_set(fixtures::two_triangles(), spec, 1), DataError);
}

TEST_CASE("check_samples catches broken pairs") {
  const auto g = fixtures::two_triangles();
  CHECK_THROWS_AS(check_samples(g, std::vector<PairSample>{{0, 1, 0}}), InvariantViolation);
  CHECK_THROWS_AS(check_samples(g, std::vector<PairSample>{{0, 5, 1}}), InvariantViolation);
  CHECK_THROWS_AS(check_samples(g, std::vector<PairSample>{{4, 4, 0}}), InvariantViolation);
  CHECK_NOTHROW(check_samples(g, std::vector<PairSample>{{0, 5, 0}}));
}

TEST_CASE("split is stratified and complete") {
  std::vector<PairSample> samples;
  for (NodeId i = 0; i < 100; ++i) samples.push_back({i, i + 1, static_cast<std::uint8_t>(i < 30)});
  const auto s = split(samples, 0.8, 9);
  CHECK(s.train.size() == 80);
  CHECK(s.test.size() == 20);
  std::size_t train_pos = 0;
  for (const auto& x : s.train) train_pos += x.label;
  CHECK(train_pos == 24);
  std::multiset<NodeId> all;
  for (const auto& x : s.train) all.insert(x.source);
  for (const auto& x : s.test) all.insert(x.source);
  CHECK(all.size() == 100);
  CHECK(std::set<NodeId>(all.begin(), all.end()).size() == 100);
  CHECK(split(samples, 0.8, 9).train == s.train);

  const std::vector<PairSample> two = {{0, 1, 1}, {2, 3, 0}};
  const auto t = split(two, 0.5, 1);
  CHECK(t.train.size() == 1);
  CHECK(t.test.size() == 1);
  CHECK_THROWS_AS(split(two, 1.0, 1), DataError);
}

TEST_CASE("positive features are built with their own edge hidden") {
  const auto g = largest_cc(catalog_graph(3)).graph;
  const auto cc = all_clustering(g);
  const FeatureContext ctx(g, cc);
  DatasetSpec spec;
  spec.positives = 10;
  spec.negatives = 10;
  const auto samples = make_training_set(g, spec, 2);
  const auto X = build_features(ctx, samples, FeatureVariant::Full);
  CHECK(X.rows == samples.size());
  CHECK(X.cols == feature_width(FeatureVariant::Full, {}));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto& s = samples[r];
    const FeatureContext view = s.label ? ctx.masked(s.source, s.target) : ctx;
    const auto expected = pair_feature(view, s.source, s.target, FeatureVariant::Full);
    const auto row = X.row(r);
    CHECK(std::vector<double>(row.begin(), row.end()) == expected);
    if (s.label) {
      CHECK(row[16] == doctest::Approx(std::log1p(static_cast<double>(g.degree(s.target) - 1))));
    }
  }
  CHECK(labels_of(samples).size() == samples.size());
}

TEST_CASE("samples and feature tables round-trip through CSV") {
  const auto g = largest_cc(catalog_graph(4)).graph;
  DatasetSpec spec;
  spec.positives = 15;
  spec.negatives = 15;
  const auto samples = make_training_set(g, spec, 5);
  std::stringstream io;
  write_samples_csv(io, g, samples);
  CHECK(io.str().rfind("source_asin,target_asin,label\n", 0) == 0);
  CHECK(read_samples_csv(io, g) == samples);

  std::istringstream bad("source_asin,target_asin,label\nNOPE,B000000001,1\n");
  CHECK_THROWS_AS(read_samples_csv(bad, g), DataError);

  const auto cc = all_clustering(g);
  const auto X = build_features(FeatureContext(g, cc), samples, FeatureVariant::NoCluster);
  std::ostringstream table;
  const auto cols = feature_columns(FeatureVariant::NoCluster, {});
  write_feature_csv(table, X, cols, "no_cluster", labels_of(samples));
  const std::string text = table.str();
  CHECK(text.rfind("# variant=no_cluster", 0) == 0);
  CHECK(text.find("dst_log_degree") != std::string::npos);
  CHECK(text.find("dst_clustering") == std::string::npos);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == samples.size() + 2);
}
