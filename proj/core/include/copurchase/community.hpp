#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "copurchase/graph.hpp"

namespace copurchase {

/// Node-to-community assignment with dense ids 0..count-1.
struct Partition {
  std::vector<std::uint32_t> community;
  std::uint32_t count = 0;

  /// Relabels arbitrary labels densely in order of first appearance.
  static Partition from_labels(std::span<const std::uint32_t> labels);
  static Partition singletons(std::size_t n);
  static Partition all_in_one(std::size_t n);
};

/// Q = sum_c [ l_c / m - (d_c / 2m)^2 ]. Throws DataError when m = 0.
double modularity(const CoPurchaseGraph& g, const Partition& p);

double modularity_by_attribute(const CoPurchaseGraph& g, std::span<const std::uint32_t> labels);

struct LouvainOptions {
  double resolution = 1.0;
  /// Recompute Q exactly after every local move and throw
  /// InvariantViolation unless it strictly increased. O(n + m) per move,
  /// meant for tests on small graphs.
  bool check_moves = false;
  std::size_t max_levels = 64;
};

struct LouvainResult {
  Partition partition;
  double modularity = 0.0;
  /// Q of the flattened partition after each aggregation level.
  std::vector<double> level_modularity;
  std::size_t moves = 0;
};

/// Two-phase Louvain (local moving with seeded node order, then
/// aggregation) until a level produces no move. Throws DataError on an
/// edgeless graph.
LouvainResult louvain(const CoPurchaseGraph& g, std::uint64_t seed, const LouvainOptions& options = {});

/// Pair weight in [0, 1]; for category similarity this is the mean of the
/// similarity vector.
using PairWeight = std::function<double(NodeId, NodeId)>;

struct SimilarityModularity {
  double q = 0.0;
  double edge_term = 0.0;        // (1/2m) sum_ij A_ij w_ij
  double null_term = 0.0;        // sum_ij k_i k_j w_ij / (2m)^2
  double standard_error = 0.0;   // of null_term; 0 in exact mode
  double edge_restricted_q = 0.0;  // null model summed over adjacent pairs only
  bool exact = false;
  std::size_t samples = 0;
};

/// Modularity with delta(c_i, c_j) replaced by a pair weight. The edge term
/// is always exact; the null-model term is exact when n <= exact_max_nodes,
/// otherwise estimated from `pair_samples` pairs drawn with probability
/// proportional to k_i k_j.
SimilarityModularity modularity_by_pair_weight(const CoPurchaseGraph& g, const PairWeight& weight,
                                               std::size_t pair_samples, std::uint64_t seed,
                                               std::size_t exact_max_nodes = 2000);

/// Pair weight = mean of the category-similarity vector at the given depth.
SimilarityModularity modularity_by_category_similarity(const CoPurchaseGraph& g, std::size_t depth,
                                                       std::size_t pair_samples,
                                                       std::uint64_t seed,
                                                       std::size_t exact_max_nodes = 2000);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace copurchase
