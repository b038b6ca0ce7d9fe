#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "copurchase/features.hpp"
#include "copurchase/graph.hpp"

namespace copurchase {

struct PairSample {
  NodeId source = 0;
  NodeId target = 0;
  std::uint8_t label = 0;

  friend bool operator==(const PairSample&, const PairSample&) = default;
};

/// Where negative targets come from.
enum class NegativeMode {
  NonAdjacent,  // uniform over nodes that are neither the source nor adjacent to it
  Isolated,     // uniform over degree-0 nodes
};

NegativeMode parse_negative_mode(std::string_view name);
std::string_view negative_mode_name(NegativeMode mode) noexcept;

/// All degree-1 nodes, ascending.
std::vector<NodeId> one_degree_nodes(const CoPurchaseGraph& g);

struct DatasetSpec {
  std::size_t positives = 10000;
  std::size_t negatives = 10000;
  NegativeMode negative_mode = NegativeMode::NonAdjacent;
};

/// Positives: distinct 1-degree sources paired with their only neighbor.
/// Negatives: 1-degree sources (drawn with replacement) paired with a
/// uniform non-neighbor. Output order is shuffled by seed.
std::vector<PairSample> make_training_set(const CoPurchaseGraph& g, const DatasetSpec& spec,
                                          std::uint64_t seed);

struct Split {
  std::vector<PairSample> train;
  std::vector<PairSample> test;
};

/// Stratified seeded split; train receives round(fraction * N) samples,
/// apportioned between the classes by largest remainder.
Split split(std::span<const PairSample> samples, double train_fraction, std::uint64_t seed);

/// Throws InvariantViolation if a positive is not an edge from a 1-degree
/// source or a negative is an edge or a self-pair.
void check_samples(const CoPurchaseGraph& g, std::span<const PairSample> samples,
                   NegativeMode mode = NegativeMode::NonAdjacent);

/// Row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const noexcept {
    return {values.data() + r * cols, cols};
  }
};

/// Materialises pair features. Positive pairs are featurised with their own
/// edge hidden, which matches how a new product (no edges yet) is scored.
FeatureMatrix build_features(const FeatureContext& ctx, std::span<const PairSample> samples,
                             FeatureVariant variant);
std::vector<std::uint8_t> labels_of(std::span<const PairSample> samples);

/// `source_asin,target_asin,label`.
void write_samples_csv(std::ostream& out, const CoPurchaseGraph& g,
                       std::span<const PairSample> samples);
std::vector<PairSample> read_samples_csv(std::istream& in, const CoPurchaseGraph& g);

/// Header row of column names preceded by a `# variant=...` comment line.
void write_feature_csv(std::ostream& out, const FeatureMatrix& m,
                       std::span<const std::string> columns, std::string_view variant,
                       std::span<const std::uint8_t> labels = {});

}  // namespace copurchase
