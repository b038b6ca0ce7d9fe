#include "copurchase/features.hpp"

#include <algorithm>
#include <cmath>

#include "copurchase/error.hpp"
#include "copurchase/graph_stats.hpp"

namespace copurchase {

std::array<double, 4> group_onehot(const Group& group) noexcept {
  std::array<double, 4> out{};
  if (group.kind != Group::Kind::Other) out[static_cast<std::size_t>(group.kind)] = 1.0;
  return out;
}

std::vector<std::int64_t> pad_path(std::span<const std::int64_t> ids, std::size_t depth) {
  std::vector<std::int64_t> out(depth, kNoCategory);
  std::copy_n(ids.begin(), std::min(depth, ids.size()), out.begin());
  return out;
}

std::vector<std::uint8_t> CategorySimilarity::operator()(
    std::span<const std::vector<std::int64_t>> paths_u,
    std::span<const std::vector<std::int64_t>> paths_v) const {
  std::vector<std::uint8_t> best(depth_, 0);
  std::vector<std::uint8_t> match(depth_, 0);
  long best_deepest = -1;
  std::size_t best_ones = 0;

  for (const auto& a : paths_u) {
    for (const auto& b : paths_v) {
      const std::size_t limit = std::min({depth_, a.size(), b.size()});
      long deepest = -1;
      std::size_t ones = 0;
      std::fill(match.begin(), match.end(), 0);
      for (std::size_t i = 0; i < limit; ++i) {
        if (a[i] == b[i] && a[i] != kNoCategory) {
          match[i] = 1;
          deepest = static_cast<long>(i);
          ++ones;
        }
      }
      if (deepest < 0) continue;
      const bool better =
          deepest > best_deepest ||
          (deepest == best_deepest &&
           (ones > best_ones || (ones == best_ones && match > best)));
      if (better) {
        best = match;
        best_deepest = deepest;
        best_ones = ones;
      }
    }
  }
  return best;
}

double CategorySimilarity::weight(std::span<const std::vector<std::int64_t>> paths_u,
                                  std::span<const std::vector<std::int64_t>> paths_v) const {
  if (depth_ == 0) return 0.0;
  const auto v = (*this)(paths_u, paths_v);
  return static_cast<double>(std::count(v.begin(), v.end(), 1)) / static_cast<double>(depth_);
}

FeatureVariant parse_variant(std::string_view name) {
  if (name == "full") return FeatureVariant::Full;
  if (name == "no_group") return FeatureVariant::NoGroup;
  if (name == "no_category") return FeatureVariant::NoCategory;
  if (name == "no_degree") return FeatureVariant::NoDegree;
  if (name == "no_cluster") return FeatureVariant::NoCluster;
  throw DataError("unknown feature variant \"" + std::string(name) +
                  "\" (expected full, no_group, no_category, no_degree, no_cluster)");
}

std::string variant_name(FeatureVariant v) {
  switch (v) {
    case FeatureVariant::Full: return "full";
    case FeatureVariant::NoGroup: return "no_group";
    case FeatureVariant::NoCategory: return "no_category";
    case FeatureVariant::NoDegree: return "no_degree";
    case FeatureVariant::NoCluster: return "no_cluster";
  }
  return "full";
}

std::array<double, NodeFeature::width> NodeFeature::as_array() const noexcept {
  return {group_onehot[0], group_onehot[1], group_onehot[2], group_onehot[3], log_degree,
          clustering};
}

std::vector<std::string> feature_columns(FeatureVariant variant, const FeatureConfig& config) {
  static constexpr const char* kGroups[] = {"book", "dvd", "music", "video"};
  std::vector<std::string> cols;
  if (variant != FeatureVariant::NoGroup) {
    for (const char* g : kGroups) cols.push_back(std::string("src_group_") + g);
    for (const char* g : kGroups) cols.push_back(std::string("dst_group_") + g);
  }
  if (variant != FeatureVariant::NoCategory) {
    for (std::size_t i = 0; i < config.category_depth; ++i) {
      cols.push_back("sim_c_" + std::to_string(i));
    }
  }
  if (variant != FeatureVariant::NoDegree) cols.emplace_back("dst_log_degree");
  if (variant != FeatureVariant::NoCluster) cols.emplace_back("dst_clustering");
  if (config.include_source_structure) {
    if (variant != FeatureVariant::NoDegree) cols.emplace_back("src_log_degree");
    if (variant != FeatureVariant::NoCluster) cols.emplace_back("src_clustering");
  }
  return cols;
}

std::size_t feature_width(FeatureVariant variant, const FeatureConfig& config) {
  return feature_columns(variant, config).size();
}

FeatureContext::FeatureContext(const CoPurchaseGraph& g, std::span<const double> clustering_cache,
                               FeatureConfig config)
    : view_(g), cache_(clustering_cache), config_(config), similarity_(config.category_depth) {
  if (!cache_.empty() && cache_.size() != g.node_count()) {
    throw DataError("clustering cache size does not match graph");
  }
}

FeatureContext FeatureContext::masked(NodeId a, NodeId b) const {
  FeatureContext out = *this;
  out.view_ = MaskedView(graph(), a, b);
  return out;
}

double FeatureContext::clustering(NodeId v) const {
  if (cache_.empty()) return clustering_coefficient(view_, v);
  if (view_.masking()) {
    const auto [a, b] = view_.hidden_edge();
    if (v == a || v == b || (graph().has_edge(v, a) && graph().has_edge(v, b))) {
      return clustering_coefficient(view_, v);
    }
  }
  return cache_[v];
}

double FeatureContext::log_degree(NodeId v) const {
  return std::log1p(static_cast<double>(view_.degree(v)));
}

NodeFeature FeatureContext::node_feature(NodeId v) const {
  NodeFeature f;
  f.group_onehot = group_onehot(graph().attributes(v).group);
  f.log_degree = log_degree(v);
  f.clustering = clustering(v);
  return f;
}

std::vector<std::uint8_t> FeatureContext::category_similarity(NodeId u, NodeId v) const {
  return similarity_(graph().attributes(u).category_paths, graph().attributes(v).category_paths);
}

void pair_feature(const FeatureContext& ctx, NodeId u, NodeId v, FeatureVariant variant,
                  std::vector<double>& out) {
  out.clear();
  const auto& g = ctx.graph();
  if (variant != FeatureVariant::NoGroup) {
    for (double x : group_onehot(g.attributes(u).group)) out.push_back(x);
    for (double x : group_onehot(g.attributes(v).group)) out.push_back(x);
  }
  if (variant != FeatureVariant::NoCategory) {
    for (std::uint8_t bit : ctx.category_similarity(u, v)) out.push_back(bit);
  }
  if (variant != FeatureVariant::NoDegree) out.push_back(ctx.log_degree(v));
  if (variant != FeatureVariant::NoCluster) out.push_back(ctx.clustering(v));
  if (ctx.config().include_source_structure) {
    if (variant != FeatureVariant::NoDegree) out.push_back(ctx.log_degree(u));
    if (variant != FeatureVariant::NoCluster) out.push_back(ctx.clustering(u));
  }
}

std::vector<double> pair_feature(const FeatureContext& ctx, NodeId u, NodeId v,
                                 FeatureVariant variant) {
  std::vector<double> out;
  pair_feature(ctx, u, v, variant, out);
  return out;
}

}  // namespace copurchase
