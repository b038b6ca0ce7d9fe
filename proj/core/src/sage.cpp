#include "copurchase/sage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "copurchase/error.hpp"
#include "copurchase/parallel.hpp"
#include "json.hpp"

namespace copurchase {

void SageHyper::validate() const {
  if (hidden == 0) throw DataError("sage: hidden width must be positive");
  if (neighbor_samples == 0) throw DataError("sage: neighbor sample size must be >= 1");
  if (!(learning_rate > 0.0)) throw DataError("sage: learning rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw DataError("sage: momentum must be in [0, 1)");
  if (batch_size == 0) throw DataError("sage: batch size must be positive");
}

SageParams SageParams::zeros(std::size_t hidden, std::size_t sim_width, std::size_t features) {
  SageParams p;
  p.hidden = hidden;
  p.features = features;
  p.sim_width = sim_width;
  p.w_self.assign(hidden * features, 0.0);
  p.w_neigh.assign(hidden * features, 0.0);
  p.b_emb.assign(hidden, 0.0);
  p.w_head.assign(2 * hidden + sim_width, 0.0);
  p.b_head = 0.0;
  return p;
}

SageParams SageParams::initialize(std::size_t hidden, std::size_t sim_width, std::uint64_t seed,
                                  std::size_t features) {
  SageParams p = zeros(hidden, sim_width, features);
  Rng rng(seed);
  const double emb = 1.0 / std::sqrt(static_cast<double>(features));
  const double head = 1.0 / std::sqrt(static_cast<double>(2 * hidden + sim_width));
  for (auto& w : p.w_self) w = rng.uniform(-emb, emb);
  for (auto& w : p.w_neigh) w = rng.uniform(-emb, emb);
  for (auto& b : p.b_emb) b = rng.uniform(-emb, emb);
  for (auto& w : p.w_head) w = rng.uniform(-head, head);
  p.b_head = rng.uniform(-head, head);
  return p;
}

std::size_t SageParams::size() const noexcept {
  return w_self.size() + w_neigh.size() + b_emb.size() + w_head.size() + 1;
}

double& SageParams::at(std::size_t i) {
  if (i < w_self.size()) return w_self[i];
  i -= w_self.size();
  if (i < w_neigh.size()) return w_neigh[i];
  i -= w_neigh.size();
  if (i < b_emb.size()) return b_emb[i];
  i -= b_emb.size();
  if (i < w_head.size()) return w_head[i];
  i -= w_head.size();
  if (i == 0) return b_head;
  throw std::out_of_range("SageParams::at");
}

double SageParams::at(std::size_t i) const { return const_cast<SageParams&>(*this).at(i); }

bool SageParams::all_finite() const noexcept {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(w_self) && finite(w_neigh) && finite(b_emb) && finite(w_head) &&
         std::isfinite(b_head);
}

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::array<double, NodeFeature::width> neighbor_mean(const FeatureContext& ctx,
                                                     NodeId aggregate_from, std::size_t samples,
                                                     Rng& rng) {
  std::array<double, NodeFeature::width> mean{};
  std::vector<NodeId> nb;
  ctx.view().neighbors(aggregate_from, nb);
  if (nb.empty()) return mean;
  std::size_t take = nb.size();
  if (nb.size() > samples) {
    for (std::size_t i = 0; i < samples; ++i) {
      const std::size_t j = i + rng.uniform_index(nb.size() - i);
      std::swap(nb[i], nb[j]);
    }
    take = samples;
  }
  for (std::size_t i = 0; i < take; ++i) {
    const auto x = ctx.node_feature(nb[i]).as_array();
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += x[k];
  }
  for (auto& m : mean) m /= static_cast<double>(take);
  return mean;
}

namespace {

NodeEmbedding embed_with(const FeatureContext& ctx, NodeId v, NodeId aggregate_from,
                         const SageParams& params, std::size_t samples, Rng& rng) {
  NodeEmbedding e;
  e.self = ctx.node_feature(v).as_array();
  e.neigh_mean = neighbor_mean(ctx, aggregate_from, samples, rng);
  e.pre.assign(params.hidden, 0.0);
  e.h.assign(params.hidden, 0.0);
  const std::size_t f = params.features;
  for (std::size_t k = 0; k < params.hidden; ++k) {
    double a = params.b_emb[k];
    for (std::size_t j = 0; j < f; ++j) {
      a += params.w_self[k * f + j] * e.self[j] + params.w_neigh[k * f + j] * e.neigh_mean[j];
    }
    e.pre[k] = a;
    e.h[k] = a > 0.0 ? a : 0.0;
  }
  return e;
}

}  // namespace

NodeEmbedding embed_node(const FeatureContext& ctx, NodeId v, const SageParams& params,
                         std::size_t samples, Rng& rng) {
  return embed_with(ctx, v, v, params, samples, rng);
}

NodeEmbedding embed_source(const FeatureContext& ctx, NodeId u, NodeId v, const SageParams& params,
                           const SageHyper& hyper, Rng& rng) {
  const bool borrow = hyper.proxy_aggregation && ctx.view().degree(u) == 0;
  return embed_with(ctx, u, borrow ? v : u, params, hyper.neighbor_samples, rng);
}

double head_logit(const SageParams& params, std::span<const double> h_u, std::span<const double> h_v,
                  std::span<const std::uint8_t> sim) {
  double z = params.b_head;
  const std::size_t h = params.hidden;
  for (std::size_t k = 0; k < h; ++k) z += params.w_head[k] * h_u[k];
  for (std::size_t k = 0; k < h; ++k) z += params.w_head[h + k] * h_v[k];
  const std::size_t s = std::min(sim.size(), params.sim_width);
  for (std::size_t k = 0; k < s; ++k) z += params.w_head[2 * h + k] * sim[k];
  return z;
}

double score_pair(const FeatureContext& ctx, NodeId u, NodeId v, const SageParams& params,
                  const SageHyper& hyper, Rng& rng) {
  const auto eu = embed_source(ctx, u, v, params, hyper, rng);
  const auto ev = embed_node(ctx, v, params, hyper.neighbor_samples, rng);
  const auto sim = ctx.category_similarity(u, v);
  return sigmoid(head_logit(params, eu.h, ev.h, sim));
}

namespace {

// Loss of one sample; accumulates its gradient into `grad` when given.
double sample_loss(const FeatureContext& base, const SageParams& params, const PairSample& s,
                   const SageHyper& hyper, Rng& rng, SageParams* grad) {
  const FeatureContext ctx = s.label ? base.masked(s.source, s.target) : base;
  const auto eu = embed_source(ctx, s.source, s.target, params, hyper, rng);
  const auto ev = embed_node(ctx, s.target, params, hyper.neighbor_samples, rng);
  const auto sim = ctx.category_similarity(s.source, s.target);
  const double z = head_logit(params, eu.h, ev.h, sim);
  const double y = s.label ? 1.0 : 0.0;
  // softplus(z) - y z, stable for large |z|.
  const double loss = std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));

  if (grad != nullptr) {
    const double dz = sigmoid(z) - y;
    const std::size_t h = params.hidden;
    const std::size_t f = params.features;
    grad->b_head += dz;
    for (std::size_t k = 0; k < h; ++k) {
      grad->w_head[k] += dz * eu.h[k];
      grad->w_head[h + k] += dz * ev.h[k];
    }
    const std::size_t sw = std::min(sim.size(), params.sim_width);
    for (std::size_t k = 0; k < sw; ++k) grad->w_head[2 * h + k] += dz * sim[k];

    for (std::size_t k = 0; k < h; ++k) {
      const double du = eu.pre[k] > 0.0 ? dz * params.w_head[k] : 0.0;
      const double dv = ev.pre[k] > 0.0 ? dz * params.w_head[h + k] : 0.0;
      if (du == 0.0 && dv == 0.0) continue;
      grad->b_emb[k] += du + dv;
      for (std::size_t j = 0; j < f; ++j) {
        grad->w_self[k * f + j] += du * eu.self[j] + dv * ev.self[j];
        grad->w_neigh[k * f + j] += du * eu.neigh_mean[j] + dv * ev.neigh_mean[j];
      }
    }
  }
  return loss;
}

void add_scaled(SageParams& into, const SageParams& from, double scale) {
  for (std::size_t i = 0; i < into.size(); ++i) into.at(i) += scale * from.at(i);
}

}  // namespace

double batch_loss(const FeatureContext& ctx, const SageParams& params,
                  std::span<const PairSample> batch, std::span<const std::uint64_t> sample_ids,
                  const SageHyper& hyper, std::uint64_t sampling_seed, SageParams* grad) {
  if (batch.empty()) return 0.0;
  if (sample_ids.size() != batch.size()) throw DataError("batch_loss: sample id count mismatch");

  std::vector<double> losses(batch.size());
  std::vector<SageParams> grads;
  if (grad != nullptr) {
    grads.assign(batch.size(), SageParams::zeros(params.hidden, params.sim_width, params.features));
  }
  parallel_for(batch.size(), [&](std::size_t i) {
    Rng rng(derive_seed(sampling_seed, sample_ids[i]));
    losses[i] = sample_loss(ctx, params, batch[i], hyper, rng, grad ? &grads[i] : nullptr);
  });

  const double inv = 1.0 / static_cast<double>(batch.size());
  if (grad != nullptr) {
    *grad = SageParams::zeros(params.hidden, params.sim_width, params.features);
    for (const auto& g : grads) add_scaled(*grad, g, inv);
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total * inv;
}

SageTrainResult train_sage(const FeatureContext& ctx, std::span<const PairSample> samples,
                           const SageHyper& hyper) {
  hyper.validate();
  const std::size_t sim_width = ctx.config().category_depth;
  SageTrainResult result;
  result.params = SageParams::initialize(hyper.hidden, sim_width, derive_seed(hyper.seed, 0));
  if (hyper.epochs == 0 || samples.empty()) return result;

  SageParams& params = result.params;
  SageParams velocity = SageParams::zeros(hyper.hidden, sim_width);
  SageParams grad;
  std::vector<std::uint64_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  std::vector<PairSample> batch;
  std::vector<std::uint64_t> ids;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(hyper.seed, 2 * epoch + 1));
    shuffle_rng.shuffle(order.begin(), order.end());
    const std::uint64_t sampling_seed = derive_seed(hyper.seed, 2 * epoch + 2);

    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      ids.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                 order.begin() + static_cast<std::ptrdiff_t>(end));
      batch.clear();
      for (auto id : ids) batch.push_back(samples[id]);

      const double loss = batch_loss(ctx, params, batch, ids, hyper, sampling_seed, &grad);
      if (!std::isfinite(loss) || !grad.all_finite()) {
        throw DataError("sage training diverged (non-finite loss in epoch " +
                        std::to_string(epoch) + "); lower the learning rate");
      }
      epoch_total += loss * static_cast<double>(batch.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity.at(i) = hyper.momentum * velocity.at(i) + grad.at(i);
        params.at(i) -= hyper.learning_rate * velocity.at(i);
      }
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(samples.size()));
  }
  return result;
}

double grad_check(const FeatureContext& ctx, const SageParams& params,
                  std::span<const PairSample> batch, const SageHyper& hyper,
                  const std::function<void(SageParams&)>& tamper) {
  const auto& g = ctx.graph();
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (g.degree(v) > hyper.neighbor_samples) {
      throw DataError("grad_check: neighbor sampling must be disabled (S >= max degree)");
    }
  }
  std::vector<std::uint64_t> ids(batch.size());
  std::iota(ids.begin(), ids.end(), std::uint64_t{0});

  SageParams analytic;
  batch_loss(ctx, params, batch, ids, hyper, 0, &analytic);
  if (tamper) tamper(analytic);

  constexpr double kStep = 1e-5;
  // Floor keeps exact-zero and near-zero gradients from dividing by noise.
  constexpr double kFloor = 1e-6;
  double worst = 0.0;
  SageParams probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double original = probe.at(i);
    probe.at(i) = original + kStep;
    const double up = batch_loss(ctx, probe, batch, ids, hyper, 0, nullptr);
    probe.at(i) = original - kStep;
    const double down = batch_loss(ctx, probe, batch, ids, hyper, 0, nullptr);
    probe.at(i) = original;
    const double numeric = (up - down) / (2.0 * kStep);
    const double a = analytic.at(i);
    const double err = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), kFloor);
    worst = std::max(worst, err);
  }
  return worst;
}

void save_sage(const std::string& path, const SageParams& p, const SageHyper& hyper) {
  nlohmann::json j;
  j["format"] = "copurchase-sage";
  j["version"] = 1;
  j["shape"] = {{"hidden", p.hidden}, {"features", p.features}, {"sim_width", p.sim_width}};
  j["hyper"] = {{"hidden", hyper.hidden},
                {"neighbor_samples", hyper.neighbor_samples},
                {"learning_rate", hyper.learning_rate},
                {"momentum", hyper.momentum},
                {"batch_size", hyper.batch_size},
                {"epochs", hyper.epochs},
                {"seed", hyper.seed},
                {"proxy_aggregation", hyper.proxy_aggregation}};
  j["w_self"] = p.w_self;
  j["w_neigh"] = p.w_neigh;
  j["b_emb"] = p.b_emb;
  j["w_head"] = p.w_head;
  j["b_head"] = p.b_head;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << '\n';
}

SageParams load_sage(const std::string& path, SageHyper* hyper) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (j.value("format", "") != "copurchase-sage" || j.value("version", 0) != 1) {
    throw DataError(path + ": not a version-1 sage parameter file");
  }
  const auto& shape = j.at("shape");
  SageParams p = SageParams::zeros(shape.at("hidden").get<std::size_t>(),
                                   shape.at("sim_width").get<std::size_t>(),
                                   shape.at("features").get<std::size_t>());
  auto fill = [&](const char* key, std::vector<double>& dst) {
    auto values = j.at(key).get<std::vector<double>>();
    if (values.size() != dst.size()) throw DataError(path + ": shape mismatch in " + key);
    dst = std::move(values);
  };
  fill("w_self", p.w_self);
  fill("w_neigh", p.w_neigh);
  fill("b_emb", p.b_emb);
  fill("w_head", p.w_head);
  p.b_head = j.at("b_head").get<double>();
  if (!p.all_finite()) throw DataError(path + ": non-finite parameters");
  if (hyper != nullptr) {
    const auto& h = j.at("hyper");
    hyper->hidden = h.at("hidden").get<std::size_t>();
    hyper->neighbor_samples = h.at("neighbor_samples").get<std::size_t>();
    hyper->learning_rate = h.at("learning_rate").get<double>();
    hyper->momentum = h.at("momentum").get<double>();
    hyper->batch_size = h.at("batch_size").get<std::size_t>();
    hyper->epochs = h.at("epochs").get<std::size_t>();
    hyper->seed = h.at("seed").get<std::uint64_t>();
    hyper->proxy_aggregation = h.at("proxy_aggregation").get<bool>();
  }
  return p;
}

}  // namespace copurchase
