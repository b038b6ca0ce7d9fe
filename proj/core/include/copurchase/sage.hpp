#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "copurchase/dataset.hpp"
#include "copurchase/features.hpp"
#include "copurchase/rng.hpp"

namespace copurchase {

struct SageHyper {
  std::size_t hidden = 16;
  std::size_t neighbor_samples = 10;  // S
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  /// When the source has no neighbors, aggregate over the target's
  /// neighborhood instead of using a zero neighbor term.
  bool proxy_aggregation = false;

  void validate() const;
};

/// One-layer mean aggregator plus a logistic head over [h_u, h_v, sim_c].
/// Matrices are row-major (hidden x features).
struct SageParams {
  std::size_t hidden = 0;
  std::size_t features = NodeFeature::width;
  std::size_t sim_width = 0;
  std::vector<double> w_self;
  std::vector<double> w_neigh;
  std::vector<double> b_emb;
  std::vector<double> w_head;  // 2 * hidden + sim_width
  double b_head = 0.0;

  static SageParams zeros(std::size_t hidden, std::size_t sim_width,
                          std::size_t features = NodeFeature::width);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every entry.
  static SageParams initialize(std::size_t hidden, std::size_t sim_width, std::uint64_t seed,
                               std::size_t features = NodeFeature::width);

  std::size_t size() const noexcept;
  /// Flat views in the order w_self, w_neigh, b_emb, w_head, b_head.
  double& at(std::size_t flat_index);
  double at(std::size_t flat_index) const;
  bool all_finite() const noexcept;

  friend bool operator==(const SageParams&, const SageParams&) = default;
};

struct NodeEmbedding {
  std::vector<double> pre;  // W_self x + W_neigh mean + b
  std::vector<double> h;    // relu(pre)
  std::array<double, NodeFeature::width> self{};
  std::array<double, NodeFeature::width> neigh_mean{};
};

/// Mean of up to S neighbor feature vectors of `aggregate_from` in the
/// context's view (all neighbors when the degree is <= S, otherwise a
/// uniform subset without replacement). Zero when it has no neighbors.
std::array<double, NodeFeature::width> neighbor_mean(const FeatureContext& ctx,
                                                     NodeId aggregate_from, std::size_t samples,
                                                     Rng& rng);

NodeEmbedding embed_node(const FeatureContext& ctx, NodeId v, const SageParams& params,
                         std::size_t samples, Rng& rng);

/// Embedding of the source endpoint, honoring proxy_aggregation.
NodeEmbedding embed_source(const FeatureContext& ctx, NodeId u, NodeId v, const SageParams& params,
                           const SageHyper& hyper, Rng& rng);

double head_logit(const SageParams& params, std::span<const double> h_u, std::span<const double> h_v,
                  std::span<const std::uint8_t> sim);

/// sigmoid(w_head . [h_u, h_v, sim_c] + b_head). Ordered: (u, v) and (v, u)
/// generally differ.
double score_pair(const FeatureContext& ctx, NodeId u, NodeId v, const SageParams& params,
                  const SageHyper& hyper, Rng& rng);

double sigmoid(double z) noexcept;

/// Mean binary cross-entropy over `batch`. Positives are embedded with their
/// own edge hidden. Sample i draws neighbors from
/// Rng(derive_seed(sampling_seed, sample_ids[i])). When `grad` is non-null
/// it receives the mean gradient (same shapes as params).
double batch_loss(const FeatureContext& ctx, const SageParams& params,
                  std::span<const PairSample> batch, std::span<const std::uint64_t> sample_ids,
                  const SageHyper& hyper, std::uint64_t sampling_seed, SageParams* grad);

struct SageTrainResult {
  SageParams params;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Seeded mini-batch SGD with momentum. Throws DataError on a non-finite loss.
SageTrainResult train_sage(const FeatureContext& ctx, std::span<const PairSample> samples,
                           const SageHyper& hyper);

/// Max relative error between analytic and central-difference gradients
/// (step 1e-5). Requires neighbor_samples >= every degree in the view so the
/// loss is deterministic. `tamper` may modify the analytic gradient first.
double grad_check(const FeatureContext& ctx, const SageParams& params,
                  std::span<const PairSample> batch, const SageHyper& hyper,
                  const std::function<void(SageParams&)>& tamper = {});

void save_sage(const std::string& path, const SageParams& params, const SageHyper& hyper);
SageParams load_sage(const std::string& path, SageHyper* hyper = nullptr);

}  // namespace copurchase
