#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "copurchase/dataset.hpp"
#include "copurchase/features.hpp"
#include "copurchase/forest.hpp"
#include "copurchase/sage.hpp"

namespace copurchase {

/// Scores link candidates for one query node. `ctx` already hides the
/// query's ground-truth edge; `stream` is a per-query id that seeded
/// scorers use to stay deterministic under parallel evaluation.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual void score(const FeatureContext& ctx, NodeId query, std::span<const NodeId> candidates,
                     std::uint64_t stream, std::span<double> out) const = 0;
};

/// Uniform(0, 1) scores from Rng(derive_seed(seed, stream)).
class RandomScorer final : public Scorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  void score(const FeatureContext& ctx, NodeId query, std::span<const NodeId> candidates,
             std::uint64_t stream, std::span<double> out) const override;

 private:
  std::uint64_t seed_;
};

class ForestScorer final : public Scorer {
 public:
  ForestScorer(const Forest& forest, FeatureVariant variant) : forest_(forest), variant_(variant) {}
  std::string name() const override { return "rf"; }
  void score(const FeatureContext& ctx, NodeId query, std::span<const NodeId> candidates,
             std::uint64_t stream, std::span<double> out) const override;

 private:
  const Forest& forest_;
  FeatureVariant variant_;
};

class SageScorer final : public Scorer {
 public:
  SageScorer(const SageParams& params, const SageHyper& hyper, std::uint64_t seed)
      : params_(params), hyper_(hyper), seed_(seed) {}
  std::string name() const override { return "sage"; }
  void score(const FeatureContext& ctx, NodeId query, std::span<const NodeId> candidates,
             std::uint64_t stream, std::span<double> out) const override;

 private:
  const SageParams& params_;
  SageHyper hyper_;
  std::uint64_t seed_;
};

/// Candidate positions ordered by descending score, ties by ascending
/// position.
std::vector<std::size_t> ranking(std::span<const double> scores);

/// 1-based rank of candidate `truth` under the same ordering.
std::size_t rank_of(std::span<const double> scores, std::size_t truth);

std::vector<std::size_t> default_ks();

struct EvalConfig {
  std::size_t subgraph_nodes = 1000;
  std::vector<std::size_t> ks = default_ks();
  std::uint64_t seed = 0;
  std::size_t repeats = 5;
  FeatureConfig features;
};

struct EvalRepeat {
  std::uint64_t seed = 0;
  std::size_t queries = 0;
  std::size_t candidates = 0;  // per query (subgraph size - 1)
  std::vector<double> topk;    // aligned with EvalReport::ks
  double mrr = 0.0;
  bool structure_unchanged = true;  // checksum before == after
  std::vector<std::size_t> ranks;
};

struct EvalReport {
  std::string model;
  std::vector<std::size_t> ks;
  std::vector<double> topk;         // mean over repeats
  std::vector<double> topk_stddev;  // across repeats
  double top5 = 0.0;
  double mrr = 0.0;
  std::vector<EvalRepeat> repeats;
  EvalConfig config;

  std::vector<std::pair<std::size_t, double>> curve() const;
};

/// BFS-subgraph top-k protocol. Each repeat samples `subgraph_nodes` nodes
/// by BFS, takes the induced subgraph, and for every degree-1 node u with
/// neighbor t hides {u, t}, scores u against all other subgraph nodes and
/// records the rank of t. Throws DataError if a sample has no degree-1 node.
EvalReport evaluate_protocol(const CoPurchaseGraph& lcc, const Scorer& scorer,
                             const EvalConfig& config);

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  /// Set when nothing was predicted positive (precision reported as 0).
  bool no_predicted_positives = false;
};

ClassificationMetrics precision_recall_f1(std::span<const std::uint8_t> labels,
                                          std::span<const double> scores, double threshold = 0.5);

/// Mann-Whitney rank statistic with averaged ties. Throws DataError when a
/// class is missing.
double roc_auc(std::span<const std::uint8_t> labels, std::span<const double> scores);

ClassificationMetrics classification_metrics(std::span<const std::uint8_t> labels,
                                             std::span<const double> scores,
                                             double threshold = 0.5);

struct AblationRow {
  FeatureVariant variant = FeatureVariant::Full;
  ClassificationMetrics metrics;
};

/// One forest per variant on the same split and seed, evaluated on the test
/// part.
std::vector<AblationRow> run_ablation(const FeatureContext& ctx, const Split& split,
                                      const ForestParams& params,
                                      std::span<const FeatureVariant> variants,
                                      std::uint64_t seed);

std::string report_to_json(const EvalReport& report);
void write_topk_csv(std::ostream& out, const EvalReport& report);
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

}  // namespace copurchase
