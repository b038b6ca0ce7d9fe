#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copurchase/dataset.hpp"

namespace copurchase {

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 16;
  std::size_t min_samples_leaf = 2;
  std::size_t features_per_split = 0;  // 0 -> ceil(sqrt(n_features))
  bool compute_oob = false;
};

/// Array-encoded CART node. Leaves have feature == -1; rows with
/// x[feature] <= threshold go left.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // positive-class fraction (leaves)

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  std::size_t depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct Forest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  ForestParams params;
  std::uint64_t seed = 0;
  std::optional<double> oob_accuracy;

  /// Mean of the reached leaf fractions, summed in tree order.
  double predict_proba(std::span<const double> x) const;
};

/// Gini impurity of a binary node.
double gini(std::size_t positives, std::size_t total) noexcept;

struct SplitChoice {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;  // impurity decrease
};

/// Best midpoint split over `features` for the multiset of `rows`. Ties go
/// to the lowest feature index, then the lowest threshold. Returns nullopt
/// when no split with positive gain respects min_samples_leaf.
std::optional<SplitChoice> best_split(const FeatureMatrix& X, std::span<const std::uint8_t> y,
                                      std::span<const std::size_t> rows,
                                      std::span<const std::size_t> features,
                                      std::size_t min_samples_leaf);

/// Grows one tree on the given rows (duplicates allowed). `seed` drives the
/// per-node feature subsets.
DecisionTree train_tree(const FeatureMatrix& X, std::span<const std::uint8_t> y,
                        std::span<const std::size_t> rows, const ForestParams& params,
                        std::uint64_t seed);

/// Bootstrap forest; tree t uses derive_seed(seed, t) and trees are grown in
/// parallel. Throws DataError on single-class labels or non-finite features.
Forest train_forest(const FeatureMatrix& X, std::span<const std::uint8_t> y,
                    const ForestParams& params, std::uint64_t seed);

/// Bootstrap row draw used by train_forest for tree `tree_index`.
std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t tree_index);

std::vector<double> predict_proba(const Forest& forest, const FeatureMatrix& X);

void save_forest(const std::string& path, const Forest& forest);
Forest load_forest(const std::string& path);

}  // namespace copurchase
