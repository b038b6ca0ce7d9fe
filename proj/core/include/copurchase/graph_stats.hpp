#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "copurchase/graph.hpp"

namespace copurchase {

struct Components {
  std::vector<std::uint32_t> label;  // component id per node, numbered in order of first node
  std::vector<std::size_t> size;     // indexed by component id

  std::size_t count() const noexcept { return size.size(); }
  std::size_t non_singleton() const;
  std::vector<std::size_t> sizes_descending() const;
};

Components connected_components(const CoPurchaseGraph& g);

/// Induced subgraph on the largest component, node order ascending by
/// original id. Ties go to the component holding the smallest node index.
/// Throws DataError on an edgeless graph.
Subgraph largest_cc(const CoPurchaseGraph& g);

struct DegreeDistribution {
  std::map<std::size_t, std::size_t> histogram;       // degree -> node count
  std::vector<std::pair<std::size_t, double>> ccdf;  // (k, P(K >= k)), ascending k
};

DegreeDistribution degree_distribution(const CoPurchaseGraph& g);
DegreeDistribution degree_distribution(std::span<const std::size_t> degrees);

struct PowerLawFit {
  double alpha = 0.0;       // 1 - slope of log CCDF against log k
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;   // distinct degrees used
  std::size_t k_min = 1;
  double hill_alpha = 0.0;  // discrete-approximation MLE over k >= k_min
};

/// Least-squares line through (ln k, ln CCDF(k)) for k >= max(k_min, 1).
/// Throws DataError with fewer than 5 distinct degrees in range.
PowerLawFit fit_power_law_ccdf(const DegreeDistribution& dist, std::size_t k_min = 1);

/// Newman's categorical assortativity for dense labels 0..L-1.
/// Returns 1 when the denominator vanishes. Throws on an edgeless graph.
double attribute_assortativity(const CoPurchaseGraph& g, std::span<const std::uint32_t> labels);

/// Dense label per node from its group (Book, DVD, Music, Video, then one
/// id per distinct Other label in order of first appearance).
std::vector<std::uint32_t> group_labels(const CoPurchaseGraph& g);

double clustering_coefficient(const MaskedView& view, NodeId v);
double clustering_coefficient(const CoPurchaseGraph& g, NodeId v);
std::vector<double> all_clustering(const CoPurchaseGraph& g);

/// deg(v) / (n - 1).
std::vector<double> degree_centrality(const CoPurchaseGraph& g);

/// Seeded uniform start node, then BFS (neighbors in ascending order) until
/// `n` nodes are collected. Returned in visit order. Throws DataError when
/// the start node's component has fewer than n nodes.
std::vector<NodeId> bfs_sample(const CoPurchaseGraph& g, std::size_t n, std::uint64_t seed);

/// Induced subgraph on the k highest-degree nodes plus their neighbors.
/// Ties at rank k go to the lower node index.
Subgraph top_degree_neighborhood(const CoPurchaseGraph& g, std::size_t k = 50);

/// FNV-1a over the CSR arrays; equal structure gives equal checksums.
std::uint64_t structure_checksum(const CoPurchaseGraph& g);

}  // namespace copurchase
