#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "copurchase/graph.hpp"

namespace copurchase {

/// Padding sentinel for category sequences; real ids are non-negative.
inline constexpr std::int64_t kNoCategory = -1;

/// Order: Book, DVD, Music, Video. Other groups map to all zeros.
std::array<double, 4> group_onehot(const Group& group) noexcept;

/// Truncates to `depth` or pads with kNoCategory.
std::vector<std::int64_t> pad_path(std::span<const std::int64_t> ids, std::size_t depth);

/// Best-matching-path category similarity.
///
/// For every pair of paths (one from each product) the positionwise match
/// vector marks depth i with 1 when both padded ids are equal and not the
/// sentinel. The pair whose deepest 1 is deepest wins; if several pairs
/// reach the same depth, the one with more matches wins, then the
/// lexicographically larger vector. That makes the result independent of
/// argument order. No match anywhere gives the zero vector.
class CategorySimilarity {
 public:
  explicit CategorySimilarity(std::size_t depth = 8) : depth_(depth) {}

  std::size_t depth() const noexcept { return depth_; }

  std::vector<std::uint8_t> operator()(std::span<const std::vector<std::int64_t>> paths_u,
                                       std::span<const std::vector<std::int64_t>> paths_v) const;

  /// Mean of the similarity vector (its fraction of ones).
  double weight(std::span<const std::vector<std::int64_t>> paths_u,
                std::span<const std::vector<std::int64_t>> paths_v) const;

 private:
  std::size_t depth_;
};

/// Feature blocks that can be removed for ablation.
enum class FeatureVariant { Full, NoGroup, NoCategory, NoDegree, NoCluster };

/// Accepts full, no_group, no_category, no_degree, no_cluster.
FeatureVariant parse_variant(std::string_view name);
std::string variant_name(FeatureVariant v);

struct FeatureConfig {
  std::size_t category_depth = 8;
  /// Append D(u), CC(u) after the target's structural features.
  bool include_source_structure = false;
};

struct NodeFeature {
  std::array<double, 4> group_onehot{};
  double log_degree = 0.0;  // ln(1 + deg)
  double clustering = 0.0;

  static constexpr std::size_t width = 6;
  std::array<double, width> as_array() const noexcept;
};

/// Column names of the pair layout
/// [G(u), G(v), Sim_c(u,v), D(v), CC(v) (, D(u), CC(u))] minus the blocks
/// the variant removes.
std::vector<std::string> feature_columns(FeatureVariant variant, const FeatureConfig& config);
std::size_t feature_width(FeatureVariant variant, const FeatureConfig& config);

/// Graph-side inputs for feature extraction: a (possibly masked) view plus
/// a clustering cache for the unmasked graph. Clustering is recomputed for
/// nodes whose value the hidden edge can change (its endpoints and their
/// common neighbors).
class FeatureContext {
 public:
  FeatureContext(const CoPurchaseGraph& g, std::span<const double> clustering_cache,
                 FeatureConfig config = {});

  /// Same context with edge {a, b} hidden.
  FeatureContext masked(NodeId a, NodeId b) const;

  const MaskedView& view() const noexcept { return view_; }
  const CoPurchaseGraph& graph() const noexcept { return view_.base(); }
  const FeatureConfig& config() const noexcept { return config_; }
  const CategorySimilarity& similarity() const noexcept { return similarity_; }

  double clustering(NodeId v) const;
  double log_degree(NodeId v) const;
  NodeFeature node_feature(NodeId v) const;
  std::vector<std::uint8_t> category_similarity(NodeId u, NodeId v) const;

 private:
  MaskedView view_;
  std::span<const double> cache_;
  FeatureConfig config_;
  CategorySimilarity similarity_;
};

/// Appends the pair layout for (u, v) to `out` (cleared first).
void pair_feature(const FeatureContext& ctx, NodeId u, NodeId v, FeatureVariant variant,
                  std::vector<double>& out);
std::vector<double> pair_feature(const FeatureContext& ctx, NodeId u, NodeId v,
                                 FeatureVariant variant);

}  // namespace copurchase
