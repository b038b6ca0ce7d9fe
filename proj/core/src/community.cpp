#include "copurchase/community.hpp"

#include <algorithm>
#include <deque>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "copurchase/error.hpp"
#include "copurchase/features.hpp"
#include "copurchase/parallel.hpp"
#include "copurchase/rng.hpp"

namespace copurchase {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

Partition Partition::from_labels(std::span<const std::uint32_t> labels) {
  Partition p;
  p.community.resize(labels.size());
  std::unordered_map<std::uint32_t, std::uint32_t> dense;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto [it, inserted] = dense.emplace(labels[i], p.count);
    if (inserted) ++p.count;
    p.community[i] = it->second;
  }
  return p;
}

Partition Partition::singletons(std::size_t n) {
  Partition p;
  p.community.resize(n);
  std::iota(p.community.begin(), p.community.end(), 0u);
  p.count = static_cast<std::uint32_t>(n);
  return p;
}

Partition Partition::all_in_one(std::size_t n) {
  Partition p;
  p.community.assign(n, 0);
  p.count = n == 0 ? 0 : 1;
  return p;
}

double modularity(const CoPurchaseGraph& g, const Partition& p) {
  if (g.edge_count() == 0) throw DataError("modularity: graph has no edges");
  if (p.community.size() != g.node_count()) {
    throw DataError("modularity: partition does not cover the graph");
  }
  std::vector<double> intra(p.count, 0.0);
  std::vector<double> total(p.count, 0.0);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    total[p.community[v]] += static_cast<double>(g.degree(v));
  }
  g.for_each_edge([&](NodeId u, NodeId v) {
    if (p.community[u] == p.community[v]) intra[p.community[u]] += 1.0;
  });
  const double m = static_cast<double>(g.edge_count());
  CompensatedSum q;
  for (std::uint32_t c = 0; c < p.count; ++c) {
    const double share = total[c] / (2.0 * m);
    q.add(intra[c] / m);
    q.add(-share * share);
  }
  return q.value();
}

double modularity_by_attribute(const CoPurchaseGraph& g, std::span<const std::uint32_t> labels) {
  return modularity(g, Partition::from_labels(labels));
}

namespace {

// Weighted graph used between Louvain levels. self_loop[i] holds the
// internal weight of aggregated node i, counted once.
struct LevelGraph {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;
  std::vector<double> self_loop;
  std::vector<double> strength;  // 2 * self_loop + incident weight
  double total_weight = 0.0;     // m

  std::size_t size() const { return adj.size(); }

  static LevelGraph from_graph(const CoPurchaseGraph& g) {
    LevelGraph lg;
    const std::size_t n = g.node_count();
    lg.adj.resize(n);
    lg.self_loop.assign(n, 0.0);
    lg.strength.assign(n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
      lg.adj[v].reserve(g.degree(v));
      for (NodeId w : g.neighbors(v)) lg.adj[v].emplace_back(w, 1.0);
      lg.strength[v] = static_cast<double>(g.degree(v));
    }
    lg.total_weight = static_cast<double>(g.edge_count());
    return lg;
  }

  double modularity(std::span<const std::uint32_t> community, double resolution) const {
    const std::size_t c = *std::max_element(community.begin(), community.end()) + 1;
    std::vector<double> in(c, 0.0), tot(c, 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      tot[community[i]] += strength[i];
      in[community[i]] += self_loop[i];
      for (const auto& [j, w] : adj[i]) {
        if (i < j && community[i] == community[j]) in[community[i]] += w;
      }
    }
    CompensatedSum q;
    for (std::size_t k = 0; k < c; ++k) {
      const double share = tot[k] / (2.0 * total_weight);
      q.add(in[k] / total_weight - resolution * share * share);
    }
    return q.value();
  }
};

// One local-moving phase. Returns the number of moves made.
std::size_t local_moving(const LevelGraph& lg, std::vector<std::uint32_t>& community, Rng& rng,
                         const LouvainOptions& options) {
  const std::size_t n = lg.size();
  const double m = lg.total_weight;
  std::vector<double> tot(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) tot[community[i]] += lg.strength[i];

  std::vector<double> link(n, 0.0);
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::uint32_t> touched;
  // Nodes are visited from a FIFO queue seeded in shuffled order. After a
  // move only neighbors outside the new community are re-queued, so late
  // passes touch the few nodes that can still change instead of all of them.
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  rng.shuffle(order.begin(), order.end());
  std::deque<std::uint32_t> queue(order.begin(), order.end());
  std::vector<std::uint8_t> queued(n, 1);

  double current_q = options.check_moves ? lg.modularity(community, options.resolution) : 0.0;
  std::size_t moves = 0;
  while (!queue.empty()) {
    const std::uint32_t i = queue.front();
    queue.pop_front();
    queued[i] = 0;
    const std::uint32_t own = community[i];
    const double k_i = lg.strength[i];

    touched.clear();
    touched.push_back(own);
    seen[own] = 1;
    for (const auto& [j, w] : lg.adj[i]) {
      const std::uint32_t c = community[j];
      if (!seen[c]) {
        seen[c] = 1;
        touched.push_back(c);
      }
      link[c] += w;
    }

    tot[own] -= k_i;
    auto gain = [&](std::uint32_t c) {
      return link[c] / m - options.resolution * tot[c] * k_i / (2.0 * m * m);
    };
    const double stay = gain(own);
    std::uint32_t best = own;
    double best_gain = stay;
    for (std::uint32_t c : touched) {
      const double g_c = gain(c);
      if (g_c > best_gain + 1e-12) {
        best_gain = g_c;
        best = c;
      }
    }
    tot[best] += k_i;
    for (std::uint32_t c : touched) {
      link[c] = 0.0;
      seen[c] = 0;
    }

    if (best != own) {
      community[i] = best;
      ++moves;
      for (const auto& [j, w] : lg.adj[i]) {
        if (!queued[j] && community[j] != best) {
          queued[j] = 1;
          queue.push_back(j);
        }
      }
      if (options.check_moves) {
        const double q = lg.modularity(community, options.resolution);
        if (!(q > current_q)) {
          throw InvariantViolation("Louvain move did not increase modularity: " +
                                   std::to_string(current_q) + " -> " + std::to_string(q));
        }
        current_q = q;
      }
    }
  }
  return moves;
}

std::uint32_t renumber(std::vector<std::uint32_t>& community) {
  std::vector<std::uint32_t> dense(community.size(), static_cast<std::uint32_t>(-1));
  std::uint32_t next = 0;
  for (auto& c : community) {
    if (dense[c] == static_cast<std::uint32_t>(-1)) dense[c] = next++;
    c = dense[c];
  }
  return next;
}

LevelGraph aggregate(const LevelGraph& lg, std::span<const std::uint32_t> community,
                     std::uint32_t count) {
  LevelGraph out;
  out.adj.resize(count);
  out.self_loop.assign(count, 0.0);
  out.strength.assign(count, 0.0);
  out.total_weight = lg.total_weight;

  std::vector<std::vector<std::uint32_t>> members(count);
  for (std::uint32_t i = 0; i < lg.size(); ++i) members[community[i]].push_back(i);

  std::vector<double> weight(count, 0.0);
  std::vector<std::uint32_t> touched;
  for (std::uint32_t c = 0; c < count; ++c) {
    touched.clear();
    for (std::uint32_t i : members[c]) {
      out.self_loop[c] += lg.self_loop[i];
      out.strength[c] += lg.strength[i];
      for (const auto& [j, w] : lg.adj[i]) {
        const std::uint32_t d = community[j];
        if (d == c) {
          if (i < j) out.self_loop[c] += w;
          continue;
        }
        if (weight[d] == 0.0) touched.push_back(d);
        weight[d] += w;
      }
    }
    std::sort(touched.begin(), touched.end());
    out.adj[c].reserve(touched.size());
    for (std::uint32_t d : touched) {
      out.adj[c].emplace_back(d, weight[d]);
      weight[d] = 0.0;
    }
  }
  return out;
}

}  // namespace

LouvainResult louvain(const CoPurchaseGraph& g, std::uint64_t seed, const LouvainOptions& options) {
  if (g.edge_count() == 0) throw DataError("louvain: graph has no edges");
  Rng rng(seed);

  LouvainResult result;
  std::vector<std::uint32_t> flat(g.node_count());
  std::iota(flat.begin(), flat.end(), 0u);

  LevelGraph level = LevelGraph::from_graph(g);
  for (std::size_t depth = 0; depth < options.max_levels; ++depth) {
    std::vector<std::uint32_t> community(level.size());
    std::iota(community.begin(), community.end(), 0u);
    const std::size_t moves = local_moving(level, community, rng, options);
    result.moves += moves;
    if (moves == 0) break;

    const std::uint32_t count = renumber(community);
    for (auto& c : flat) c = community[c];
    Partition current;
    current.community = flat;
    current.count = count;
    result.level_modularity.push_back(modularity(g, current));

    if (count == level.size()) break;
    level = aggregate(level, community, count);
  }

  result.partition = Partition::from_labels(flat);
  result.modularity = modularity(g, result.partition);
  return result;
}

SimilarityModularity modularity_by_pair_weight(const CoPurchaseGraph& g, const PairWeight& weight,
                                               std::size_t pair_samples, std::uint64_t seed,
                                               std::size_t exact_max_nodes) {
  if (g.edge_count() == 0) throw DataError("modularity: graph has no edges");
  const std::size_t n = g.node_count();
  const double m = static_cast<double>(g.edge_count());
  const double two_m = 2.0 * m;

  SimilarityModularity out;

  // Edge terms, one row per node, summed in node order.
  std::vector<double> edge_rows(n, 0.0), restricted_rows(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const auto u = static_cast<NodeId>(i);
    CompensatedSum a, r;
    const double ku = static_cast<double>(g.degree(u));
    for (NodeId v : g.neighbors(u)) {
      const double w = weight(u, v);
      a.add(w);
      r.add((1.0 - ku * static_cast<double>(g.degree(v)) / two_m) * w);
    }
    edge_rows[i] = a.value();
    restricted_rows[i] = r.value();
  });
  CompensatedSum edge_sum, restricted_sum;
  for (std::size_t i = 0; i < n; ++i) {
    edge_sum.add(edge_rows[i]);
    restricted_sum.add(restricted_rows[i]);
  }
  out.edge_term = edge_sum.value() / two_m;
  out.edge_restricted_q = restricted_sum.value() / two_m;

  if (n <= exact_max_nodes) {
    std::vector<double> rows(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      const auto u = static_cast<NodeId>(i);
      const double ku = static_cast<double>(g.degree(u));
      if (ku == 0.0) return;
      CompensatedSum s;
      for (NodeId v = 0; v < n; ++v) {
        const double kv = static_cast<double>(g.degree(v));
        if (kv != 0.0) s.add(ku * kv * weight(u, v));
      }
      rows[i] = s.value();
    });
    CompensatedSum total;
    for (double r : rows) total.add(r);
    out.null_term = total.value() / (two_m * two_m);
    out.exact = true;
  } else {
    if (pair_samples < 2) throw DataError("modularity: need at least 2 pair samples");
    // Uniform edge ends are degree-proportional node draws.
    const auto offsets = g.offsets();
    const auto owner = [&](std::size_t end) {
      return static_cast<NodeId>(std::upper_bound(offsets.begin(), offsets.end(), end) -
                                 offsets.begin() - 1);
    };
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (pair_samples + kChunk - 1) / kChunk;
    std::vector<double> sums(chunks, 0.0), squares(chunks, 0.0);
    const std::size_t ends = g.adjacency().size();
    parallel_for(chunks, [&](std::size_t c) {
      Rng rng(derive_seed(seed, c));
      const std::size_t count = std::min(kChunk, pair_samples - c * kChunk);
      CompensatedSum s, s2;
      for (std::size_t k = 0; k < count; ++k) {
        const NodeId a = owner(rng.uniform_index(ends));
        const NodeId b = owner(rng.uniform_index(ends));
        const double w = weight(a, b);
        s.add(w);
        s2.add(w * w);
      }
      sums[c] = s.value();
      squares[c] = s2.value();
    });
    CompensatedSum s, s2;
    for (std::size_t c = 0; c < chunks; ++c) {
      s.add(sums[c]);
      s2.add(squares[c]);
    }
    const double N = static_cast<double>(pair_samples);
    const double mean = s.value() / N;
    const double var = std::max(0.0, (s2.value() - N * mean * mean) / (N - 1.0));
    out.null_term = mean;
    out.standard_error = std::sqrt(var / N);
    out.samples = pair_samples;
  }
  out.q = out.edge_term - out.null_term;
  return out;
}

SimilarityModularity modularity_by_category_similarity(const CoPurchaseGraph& g, std::size_t depth,
                                                       std::size_t pair_samples,
                                                       std::uint64_t seed,
                                                       std::size_t exact_max_nodes) {
  const CategorySimilarity sim(depth);
  return modularity_by_pair_weight(
      g, [&](NodeId u, NodeId v) { return sim.weight(g.attributes(u).category_paths,
                                                      g.attributes(v).category_paths); },
      pair_samples, seed, exact_max_nodes);
}

}  // namespace copurchase
