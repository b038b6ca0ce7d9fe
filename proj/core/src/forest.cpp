#include "copurchase/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "copurchase/error.hpp"
#include "copurchase/parallel.hpp"
#include "copurchase/rng.hpp"
#include "json.hpp"

namespace copurchase {

double DecisionTree::predict(std::span<const double> x) const {
  std::int32_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[i].value;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes[i].feature >= 0) {
      stack.emplace_back(nodes[i].left, d + 1);
      stack.emplace_back(nodes[i].right, d + 1);
    }
  }
  return deepest;
}

double Forest::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features) {
    throw DataError("predict_proba: expected " + std::to_string(n_features) + " features, got " +
                    std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return trees.empty() ? 0.0 : sum / static_cast<double>(trees.size());
}

double gini(std::size_t positives, std::size_t total) noexcept {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(positives) / static_cast<double>(total);
  return 2.0 * p * (1.0 - p);
}

std::optional<SplitChoice> best_split(const FeatureMatrix& X, std::span<const std::uint8_t> y,
                                      std::span<const std::size_t> rows,
                                      std::span<const std::size_t> features,
                                      std::size_t min_samples_leaf) {
  const std::size_t n = rows.size();
  const std::size_t leaf = std::max<std::size_t>(min_samples_leaf, 1);
  if (n < 2 * leaf) return std::nullopt;

  std::size_t total_pos = 0;
  for (std::size_t r : rows) total_pos += y[r];
  const double parent = gini(total_pos, n);
  if (parent == 0.0) return std::nullopt;

  std::vector<std::size_t> order(features.begin(), features.end());
  std::sort(order.begin(), order.end());

  std::optional<SplitChoice> best;
  std::vector<std::pair<double, std::uint8_t>> column(n);
  const double dn = static_cast<double>(n);
  for (std::size_t f : order) {
    for (std::size_t i = 0; i < n; ++i) column[i] = {X.values[rows[i] * X.cols + f], y[rows[i]]};
    std::sort(column.begin(), column.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (column.front().first == column.back().first) continue;

    std::size_t left_pos = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_pos += column[i].second;
      const std::size_t left_n = i + 1;
      if (column[i].first == column[i + 1].first) continue;
      if (left_n < leaf || n - left_n < leaf) continue;
      const std::size_t right_n = n - left_n;
      const double gain = parent -
                          (static_cast<double>(left_n) / dn) * gini(left_pos, left_n) -
                          (static_cast<double>(right_n) / dn) * gini(total_pos - left_pos, right_n);
      if (gain > 1e-12 && (!best || gain > best->gain + 1e-12)) {
        const double a = column[i].first;
        const double b = column[i + 1].first;
        double mid = a + (b - a) / 2.0;
        if (!(mid < b)) mid = a;
        best = SplitChoice{f, mid, gain};
      }
    }
  }
  return best;
}

namespace {

struct TreeBuilder {
  const FeatureMatrix& X;
  std::span<const std::uint8_t> y;
  const ForestParams& params;
  std::size_t mtry;
  Rng rng;
  DecisionTree tree;
  std::vector<std::size_t> all_features;

  std::int32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();

    std::size_t pos = 0;
    for (std::size_t r : rows) pos += y[r];
    tree.nodes[index].value =
        rows.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(rows.size());

    const bool pure = pos == 0 || pos == rows.size();
    if (pure || depth >= params.max_depth) return index;

    // Random feature subset: first mtry slots of a partial shuffle.
    for (std::size_t i = 0; i < mtry; ++i) {
      const std::size_t j = i + rng.uniform_index(all_features.size() - i);
      std::swap(all_features[i], all_features[j]);
    }
    const std::span<const std::size_t> candidates(all_features.data(), mtry);
    const auto split = best_split(X, y, rows, candidates, params.min_samples_leaf);
    if (!split) return index;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (X.values[r * X.cols + split->feature] <= split->threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const std::int32_t l = grow(std::move(left), depth + 1);
    const std::int32_t r = grow(std::move(right), depth + 1);
    auto& node = tree.nodes[index];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return index;
  }
};

void validate_training_input(const FeatureMatrix& X, std::span<const std::uint8_t> y) {
  if (X.rows != y.size()) throw DataError("train_forest: feature rows and labels differ in length");
  if (X.rows < 2) throw DataError("train_forest: need at least 2 rows");
  if (X.cols == 0) throw DataError("train_forest: no feature columns");
  std::size_t pos = 0;
  for (std::uint8_t label : y) {
    if (label > 1) throw DataError("train_forest: labels must be 0 or 1");
    pos += label;
  }
  if (pos == 0 || pos == y.size()) throw DataError("train_forest: labels contain a single class");
  for (std::size_t r = 0; r < X.rows; ++r) {
    for (std::size_t c = 0; c < X.cols; ++c) {
      if (!std::isfinite(X.values[r * X.cols + c])) {
        throw DataError("train_forest: non-finite feature at row " + std::to_string(r) +
                        ", column " + std::to_string(c));
      }
    }
  }
}

std::size_t resolve_mtry(const ForestParams& params, std::size_t n_features) {
  const std::size_t m = params.features_per_split != 0
                            ? params.features_per_split
                            : static_cast<std::size_t>(
                                  std::ceil(std::sqrt(static_cast<double>(n_features))));
  return std::clamp<std::size_t>(m, 1, n_features);
}

}  // namespace

DecisionTree train_tree(const FeatureMatrix& X, std::span<const std::uint8_t> y,
                        std::span<const std::size_t> rows, const ForestParams& params,
                        std::uint64_t seed) {
  TreeBuilder b{X, y, params, resolve_mtry(params, X.cols), Rng(seed), {}, {}};
  b.all_features.resize(X.cols);
  std::iota(b.all_features.begin(), b.all_features.end(), std::size_t{0});
  b.grow(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
  return std::move(b.tree);
}

std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t tree_index) {
  Rng rng(derive_seed(seed, 2 * tree_index));
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = rng.uniform_index(n);
  return rows;
}

Forest train_forest(const FeatureMatrix& X, std::span<const std::uint8_t> y,
                    const ForestParams& params, std::uint64_t seed) {
  validate_training_input(X, y);
  if (params.n_trees == 0) throw DataError("train_forest: n_trees must be positive");

  Forest forest;
  forest.n_features = X.cols;
  forest.params = params;
  forest.seed = seed;
  forest.trees.resize(params.n_trees);
  std::vector<std::vector<std::size_t>> in_bag(params.compute_oob ? params.n_trees : 0);

  parallel_for(params.n_trees, [&](std::size_t t) {
    auto rows = bootstrap_rows(X.rows, seed, t);
    forest.trees[t] = train_tree(X, y, rows, params, derive_seed(seed, 2 * t + 1));
    if (params.compute_oob) in_bag[t] = std::move(rows);
  });

  if (params.compute_oob) {
    std::vector<double> sum(X.rows, 0.0);
    std::vector<std::size_t> votes(X.rows, 0);
    std::vector<std::uint8_t> used(X.rows);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
      std::fill(used.begin(), used.end(), 0);
      for (std::size_t r : in_bag[t]) used[r] = 1;
      for (std::size_t r = 0; r < X.rows; ++r) {
        if (used[r]) continue;
        sum[r] += forest.trees[t].predict(X.row(r));
        ++votes[r];
      }
    }
    std::size_t counted = 0, correct = 0;
    for (std::size_t r = 0; r < X.rows; ++r) {
      if (votes[r] == 0) continue;
      ++counted;
      const bool predicted = sum[r] / static_cast<double>(votes[r]) >= 0.5;
      correct += predicted == (y[r] == 1);
    }
    if (counted > 0) {
      forest.oob_accuracy = static_cast<double>(correct) / static_cast<double>(counted);
    }
  }
  return forest;
}

std::vector<double> predict_proba(const Forest& forest, const FeatureMatrix& X) {
  std::vector<double> out(X.rows);
  parallel_for(X.rows, [&](std::size_t r) { out[r] = forest.predict_proba(X.row(r)); });
  return out;
}

void save_forest(const std::string& path, const Forest& forest) {
  nlohmann::json j;
  j["format"] = "copurchase-forest";
  j["version"] = 1;
  j["n_features"] = forest.n_features;
  j["seed"] = forest.seed;
  j["params"] = {{"n_trees", forest.params.n_trees},
                 {"max_depth", forest.params.max_depth},
                 {"min_samples_leaf", forest.params.min_samples_leaf},
                 {"features_per_split", forest.params.features_per_split},
                 {"compute_oob", forest.params.compute_oob}};
  if (forest.oob_accuracy) j["oob_accuracy"] = *forest.oob_accuracy;
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const auto& t : forest.trees) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   value = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump() << '\n';
}

Forest load_forest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (j.value("format", "") != "copurchase-forest" || j.value("version", 0) != 1) {
    throw DataError(path + ": not a version-1 forest file");
  }
  Forest f;
  f.n_features = j.at("n_features").get<std::size_t>();
  f.seed = j.at("seed").get<std::uint64_t>();
  const auto& p = j.at("params");
  f.params.n_trees = p.at("n_trees").get<std::size_t>();
  f.params.max_depth = p.at("max_depth").get<std::size_t>();
  f.params.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
  f.params.features_per_split = p.at("features_per_split").get<std::size_t>();
  f.params.compute_oob = p.at("compute_oob").get<bool>();
  if (j.contains("oob_accuracy")) f.oob_accuracy = j["oob_accuracy"].get<double>();
  for (const auto& t : j.at("trees")) {
    DecisionTree tree;
    const auto& feature = t.at("feature");
    tree.nodes.resize(feature.size());
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      auto& n = tree.nodes[i];
      n.feature = feature[i].get<std::int32_t>();
      n.threshold = t.at("threshold")[i].get<double>();
      n.left = t.at("left")[i].get<std::int32_t>();
      n.right = t.at("right")[i].get<std::int32_t>();
      n.value = t.at("value")[i].get<double>();
      const bool internal = n.feature >= 0;
      if (internal && (n.feature >= static_cast<std::int32_t>(f.n_features) || n.left <= 0 ||
                       n.right <= 0 || n.left >= static_cast<std::int32_t>(feature.size()) ||
                       n.right >= static_cast<std::int32_t>(feature.size()))) {
        throw DataError(path + ": corrupt tree node");
      }
    }
    if (tree.nodes.empty()) throw DataError(path + ": empty tree");
    f.trees.push_back(std::move(tree));
  }
  return f;
}

}  // namespace copurchase
