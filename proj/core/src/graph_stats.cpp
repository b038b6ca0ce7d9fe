#include "copurchase/graph_stats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>
#include <unordered_map>

#include "copurchase/error.hpp"
#include "copurchase/parallel.hpp"
#include "copurchase/rng.hpp"

namespace copurchase {

std::size_t Components::non_singleton() const {
  return static_cast<std::size_t>(
      std::count_if(size.begin(), size.end(), [](std::size_t s) { return s >= 2; }));
}

std::vector<std::size_t> Components::sizes_descending() const {
  auto out = size;
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

Components connected_components(const CoPurchaseGraph& g) {
  constexpr std::uint32_t kUnset = static_cast<std::uint32_t>(-1);
  Components c;
  c.label.assign(g.node_count(), kUnset);
  std::vector<NodeId> queue;
  for (NodeId s = 0; s < g.node_count(); ++s) {
    if (c.label[s] != kUnset) continue;
    const auto id = static_cast<std::uint32_t>(c.size.size());
    queue.assign(1, s);
    c.label[s] = id;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      for (NodeId w : g.neighbors(queue[head])) {
        if (c.label[w] == kUnset) {
          c.label[w] = id;
          queue.push_back(w);
        }
      }
    }
    c.size.push_back(queue.size());
  }
  return c;
}

Subgraph largest_cc(const CoPurchaseGraph& g) {
  if (g.edge_count() == 0) throw DataError("largest_cc: graph has no edges");
  const Components c = connected_components(g);
  // Labels follow the smallest member index, so the first maximum wins ties.
  const auto best = static_cast<std::uint32_t>(
      std::max_element(c.size.begin(), c.size.end()) - c.size.begin());
  std::vector<NodeId> members;
  members.reserve(c.size[best]);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (c.label[v] == best) members.push_back(v);
  }
  return induced_subgraph(g, members);
}

DegreeDistribution degree_distribution(std::span<const std::size_t> degrees) {
  DegreeDistribution d;
  for (std::size_t k : degrees) ++d.histogram[k];
  const double n = static_cast<double>(degrees.size());
  std::size_t at_least = degrees.size();
  d.ccdf.reserve(d.histogram.size());
  for (const auto& [k, count] : d.histogram) {
    d.ccdf.emplace_back(k, static_cast<double>(at_least) / n);
    at_least -= count;
  }
  return d;
}

DegreeDistribution degree_distribution(const CoPurchaseGraph& g) {
  std::vector<std::size_t> degrees(g.node_count());
  for (NodeId v = 0; v < g.node_count(); ++v) degrees[v] = g.degree(v);
  return degree_distribution(degrees);
}

PowerLawFit fit_power_law_ccdf(const DegreeDistribution& dist, std::size_t k_min) {
  PowerLawFit fit;
  fit.k_min = std::max<std::size_t>(k_min, 1);

  std::vector<double> xs, ys;
  for (const auto& [k, p] : dist.ccdf) {
    if (k < fit.k_min) continue;
    xs.push_back(std::log(static_cast<double>(k)));
    ys.push_back(std::log(p));
  }
  if (xs.size() < 5) {
    throw DataError("power-law fit needs at least 5 distinct degrees >= k_min, got " +
                    std::to_string(xs.size()));
  }

  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.alpha = 1.0 - fit.slope;
  fit.points = xs.size();

  double log_sum = 0;
  std::size_t tail = 0;
  const double shift = static_cast<double>(fit.k_min) - 0.5;
  for (const auto& [k, count] : dist.histogram) {
    if (k < fit.k_min) continue;
    log_sum += static_cast<double>(count) * std::log(static_cast<double>(k) / shift);
    tail += count;
  }
  fit.hill_alpha = log_sum > 0 ? 1.0 + static_cast<double>(tail) / log_sum : 0.0;
  return fit;
}

double attribute_assortativity(const CoPurchaseGraph& g, std::span<const std::uint32_t> labels) {
  if (g.edge_count() == 0) throw DataError("assortativity: graph has no edges");
  if (labels.size() != g.node_count()) throw DataError("assortativity: label count mismatch");

  // Symmetric mixing matrix: e_ii is the fraction of edge ends joining equal
  // labels, a_i = b_i is the fraction of edge ends attached to label i.
  const std::uint32_t L = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<double> ends(L, 0.0);
  std::size_t same = 0;
  for (NodeId v = 0; v < g.node_count(); ++v) ends[labels[v]] += static_cast<double>(g.degree(v));
  g.for_each_edge([&](NodeId u, NodeId v) {
    if (labels[u] == labels[v]) ++same;
  });
  const double two_m = 2.0 * static_cast<double>(g.edge_count());
  double sum_ab = 0.0;
  for (double e : ends) sum_ab += (e / two_m) * (e / two_m);
  const double trace = static_cast<double>(same) / static_cast<double>(g.edge_count());
  const double denom = 1.0 - sum_ab;
  if (std::abs(denom) < 1e-15) return 1.0;
  return (trace - sum_ab) / denom;
}

std::vector<std::uint32_t> group_labels(const CoPurchaseGraph& g) {
  std::vector<std::uint32_t> labels(g.node_count());
  std::unordered_map<std::string, std::uint32_t> other;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const Group& grp = g.attributes(v).group;
    if (grp.kind != Group::Kind::Other) {
      labels[v] = static_cast<std::uint32_t>(grp.kind);
    } else {
      const auto [it, inserted] =
          other.emplace(grp.other, static_cast<std::uint32_t>(4 + other.size()));
      labels[v] = it->second;
    }
  }
  return labels;
}

double clustering_coefficient(const MaskedView& view, NodeId v) {
  const std::size_t d = view.degree(v);
  if (d < 2) return 0.0;
  std::vector<NodeId> nb;
  view.neighbors(v, nb);
  std::size_t links = 0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    for (std::size_t j = i + 1; j < nb.size(); ++j) {
      if (view.has_edge(nb[i], nb[j])) ++links;
    }
  }
  return 2.0 * static_cast<double>(links) / (static_cast<double>(d) * static_cast<double>(d - 1));
}

double clustering_coefficient(const CoPurchaseGraph& g, NodeId v) {
  return clustering_coefficient(MaskedView(g), v);
}

std::vector<double> all_clustering(const CoPurchaseGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<double> cc(n, 0.0);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(thread_limit(), n));
  const std::size_t block = (n + workers - 1) / std::max<std::size_t>(workers, 1);
  parallel_for(workers, [&](std::size_t w) {
    std::vector<std::uint8_t> mark(n, 0);
    const std::size_t begin = w * block;
    const std::size_t end = std::min(n, begin + block);
    for (std::size_t v = begin; v < end; ++v) {
      const auto nb = g.neighbors(static_cast<NodeId>(v));
      if (nb.size() < 2) continue;
      for (NodeId x : nb) mark[x] = 1;
      std::size_t twice_links = 0;
      for (NodeId x : nb) {
        for (NodeId y : g.neighbors(x)) twice_links += mark[y];
      }
      for (NodeId x : nb) mark[x] = 0;
      const double d = static_cast<double>(nb.size());
      cc[v] = static_cast<double>(twice_links) / (d * (d - 1.0));
    }
  });
  return cc;
}

std::vector<double> degree_centrality(const CoPurchaseGraph& g) {
  std::vector<double> out(g.node_count(), 0.0);
  if (g.node_count() < 2) return out;
  const double scale = 1.0 / static_cast<double>(g.node_count() - 1);
  for (NodeId v = 0; v < g.node_count(); ++v) out[v] = static_cast<double>(g.degree(v)) * scale;
  return out;
}

std::vector<NodeId> bfs_sample(const CoPurchaseGraph& g, std::size_t n, std::uint64_t seed) {
  if (n == 0) return {};
  if (g.node_count() == 0) throw DataError("bfs_sample: empty graph");
  Rng rng(seed);
  const auto start = static_cast<NodeId>(rng.uniform_index(g.node_count()));

  std::vector<std::uint8_t> seen(g.node_count(), 0);
  std::vector<NodeId> order;
  order.reserve(n);
  order.push_back(start);
  seen[start] = 1;
  for (std::size_t head = 0; head < order.size() && order.size() < n; ++head) {
    for (NodeId w : g.neighbors(order[head])) {
      if (seen[w]) continue;
      seen[w] = 1;
      order.push_back(w);
      if (order.size() == n) break;
    }
  }
  if (order.size() < n) {
    throw DataError("bfs_sample: requested " + std::to_string(n) + " nodes but only " +
                    std::to_string(order.size()) + " are reachable from the start node");
  }
  return order;
}

Subgraph top_degree_neighborhood(const CoPurchaseGraph& g, std::size_t k) {
  if (k > g.node_count()) throw DataError("top_degree_neighborhood: k exceeds node count");
  std::vector<NodeId> order(g.node_count());
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return g.degree(a) > g.degree(b); });

  std::vector<std::uint8_t> keep(g.node_count(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    keep[order[i]] = 1;
    for (NodeId w : g.neighbors(order[i])) keep[w] = 1;
  }
  std::vector<NodeId> members;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (keep[v]) members.push_back(v);
  }
  return induced_subgraph(g, members);
}

std::uint64_t structure_checksum(const CoPurchaseGraph& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  mix(g.node_count());
  for (std::size_t o : g.offsets()) mix(o);
  for (NodeId v : g.adjacency()) mix(v);
  return h;
}

}  // namespace copurchase
