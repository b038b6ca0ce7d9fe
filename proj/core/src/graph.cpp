#include "copurchase/graph.hpp"

#include <algorithm>
#include <cstdio>

#include "copurchase/error.hpp"

namespace copurchase {

namespace {

std::string synthetic_asin(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%010zu", index);
  return buf;
}

}  // namespace

CoPurchaseGraph CoPurchaseGraph::from_edges(std::size_t node_count, std::span<const Edge> edges,
                                            std::vector<NodeAttributes> attributes) {
  if (attributes.empty()) {
    attributes.resize(node_count);
    for (std::size_t i = 0; i < node_count; ++i) attributes[i].asin = synthetic_asin(i);
  }
  if (attributes.size() != node_count) {
    throw InvariantViolation("attribute count does not match node count");
  }

  std::vector<std::size_t> degree(node_count + 1, 0);
  for (const auto& [u, v] : edges) {
    if (u >= node_count || v >= node_count) throw DataError("edge endpoint out of range");
    if (u == v) continue;
    ++degree[u];
    ++degree[v];
  }
  std::vector<std::size_t> offsets(node_count + 1, 0);
  for (std::size_t i = 0; i < node_count; ++i) offsets[i + 1] = offsets[i] + degree[i];
  std::vector<NodeId> adjacency(offsets.back());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    adjacency[cursor[u]++] = v;
    adjacency[cursor[v]++] = u;
  }

  // Sort and dedupe each list, then compact.
  std::vector<std::size_t> compact(node_count + 1, 0);
  std::size_t write = 0;
  for (std::size_t v = 0; v < node_count; ++v) {
    auto first = adjacency.begin() + static_cast<std::ptrdiff_t>(offsets[v]);
    auto last = adjacency.begin() + static_cast<std::ptrdiff_t>(offsets[v + 1]);
    std::sort(first, last);
    last = std::unique(first, last);
    compact[v] = write;
    for (auto it = first; it != last; ++it) adjacency[write++] = *it;
  }
  compact[node_count] = write;
  adjacency.resize(write);
  adjacency.shrink_to_fit();

  CoPurchaseGraph g;
  g.offsets_ = std::move(compact);
  g.adjacency_ = std::move(adjacency);
  g.attributes_ = std::move(attributes);
  g.index_asins();
  return g;
}

CoPurchaseGraph CoPurchaseGraph::from_csr(std::vector<std::size_t> offsets,
                                          std::vector<NodeId> adjacency,
                                          std::vector<NodeAttributes> attributes) {
  CoPurchaseGraph g;
  g.offsets_ = std::move(offsets);
  g.adjacency_ = std::move(adjacency);
  g.attributes_ = std::move(attributes);
  g.check_invariants();
  g.index_asins();
  return g;
}

void CoPurchaseGraph::index_asins() {
  asin_index_.clear();
  asin_index_.reserve(attributes_.size());
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    asin_index_.emplace(attributes_[i].asin, static_cast<NodeId>(i));
  }
}

bool CoPurchaseGraph::has_edge(NodeId u, NodeId v) const noexcept {
  if (degree(u) > degree(v)) std::swap(u, v);
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::optional<NodeId> CoPurchaseGraph::find(std::string_view asin) const {
  const auto it = asin_index_.find(std::string(asin));
  if (it == asin_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Edge> CoPurchaseGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for_each_edge([&](NodeId u, NodeId v) { out.emplace_back(u, v); });
  return out;
}

void CoPurchaseGraph::check_invariants() const {
  const std::size_t n = attributes_.size();
  if (offsets_.size() != n + 1 || offsets_.front() != 0 || offsets_.back() != adjacency_.size()) {
    throw InvariantViolation("CSR offsets inconsistent with node/adjacency sizes");
  }
  if (adjacency_.size() % 2 != 0) throw InvariantViolation("degree sum is odd");
  for (NodeId u = 0; u < n; ++u) {
    if (offsets_[u] > offsets_[u + 1]) throw InvariantViolation("CSR offsets not monotone");
    const auto nb = neighbors(u);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const NodeId v = nb[i];
      if (v >= n) throw InvariantViolation("neighbor out of range");
      if (v == u) throw InvariantViolation("self-loop at node " + std::to_string(u));
      if (i > 0 && nb[i - 1] >= v) throw InvariantViolation("neighbor list not strictly sorted");
      const auto back = neighbors(v);
      if (!std::binary_search(back.begin(), back.end(), u)) {
        throw InvariantViolation("asymmetric adjacency " + std::to_string(u) + "->" +
                                 std::to_string(v));
      }
    }
  }
}

BuildResult build_graph(std::span<const ProductRecord> records) {
  BuildResult result;
  BuildStats& stats = result.stats;
  stats.records = records.size();

  std::unordered_map<std::string_view, NodeId> index;
  index.reserve(records.size());
  std::vector<const ProductRecord*> kept;
  kept.reserve(records.size());
  for (const auto& r : records) {
    if (index.emplace(r.asin, static_cast<NodeId>(kept.size())).second) {
      kept.push_back(&r);
    } else {
      ++stats.duplicate_asins;
      if (stats.duplicate_examples.size() < 20) stats.duplicate_examples.push_back(r.asin);
    }
  }

  std::vector<Edge> edges;
  for (NodeId u = 0; u < kept.size(); ++u) {
    for (const auto& target : kept[u]->similar_asins) {
      const auto it = index.find(target);
      if (it == index.end()) {
        ++stats.dropped_references;
      } else if (it->second == u) {
        ++stats.self_references;
      } else {
        edges.emplace_back(u, it->second);
      }
    }
  }

  std::vector<NodeAttributes> attrs;
  attrs.reserve(kept.size());
  for (const auto* r : kept) {
    NodeAttributes a;
    a.asin = r->asin;
    a.group = r->group.value_or(Group{});
    a.category_paths.reserve(r->category_paths.size());
    for (const auto& path : r->category_paths) a.category_paths.push_back(path.ids());
    attrs.push_back(std::move(a));
  }
  result.graph = CoPurchaseGraph::from_edges(kept.size(), edges, std::move(attrs));
  return result;
}

Subgraph induced_subgraph(const CoPurchaseGraph& g, std::span<const NodeId> nodes) {
  constexpr NodeId kAbsent = static_cast<NodeId>(-1);
  std::vector<NodeId> remap(g.node_count(), kAbsent);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (remap[nodes[i]] != kAbsent) throw DataError("duplicate node in induced_subgraph");
    remap[nodes[i]] = static_cast<NodeId>(i);
  }

  std::vector<std::size_t> offsets(nodes.size() + 1, 0);
  std::vector<NodeId> adjacency;
  std::vector<NodeAttributes> attrs;
  attrs.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::size_t begin = adjacency.size();
    for (NodeId w : g.neighbors(nodes[i])) {
      if (remap[w] != kAbsent) adjacency.push_back(remap[w]);
    }
    std::sort(adjacency.begin() + static_cast<std::ptrdiff_t>(begin), adjacency.end());
    offsets[i + 1] = adjacency.size();
    attrs.push_back(g.attributes(nodes[i]));
  }

  Subgraph sub;
  sub.graph = CoPurchaseGraph::from_csr(std::move(offsets), std::move(adjacency), std::move(attrs));
  sub.original_ids.assign(nodes.begin(), nodes.end());
  return sub;
}

MaskedView::MaskedView(const CoPurchaseGraph& g, NodeId a, NodeId b) noexcept : g_(&g) {
  if (a != b && g.has_edge(a, b)) {
    a_ = a;
    b_ = b;
    hidden_ = true;
  }
}

bool MaskedView::has_edge(NodeId u, NodeId v) const noexcept {
  if (hidden_ && ((u == a_ && v == b_) || (u == b_ && v == a_))) return false;
  return g_->has_edge(u, v);
}

void MaskedView::neighbors(NodeId v, std::vector<NodeId>& out) const {
  out.clear();
  for_each_neighbor(v, [&](NodeId w) { out.push_back(w); });
}

}  // namespace copurchase
