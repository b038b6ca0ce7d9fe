#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "copurchase/meta_parser.hpp"

namespace copurchase {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Per-node attributes carried into the graph. Category paths keep ids only.
struct NodeAttributes {
  std::string asin;
  Group group;
  std::vector<std::vector<std::int64_t>> category_paths;

  friend bool operator==(const NodeAttributes&, const NodeAttributes&) = default;
};

/// Immutable undirected simple graph in CSR form. Neighbor lists are sorted,
/// symmetric, free of self-loops and parallel edges.
class CoPurchaseGraph {
 public:
  CoPurchaseGraph() = default;

  /// Builds from an arbitrary edge list. Self-loops are dropped and
  /// duplicates (in either orientation) collapse to one edge. `attributes`
  /// is either empty (synthetic ASINs are assigned) or has one entry per node.
  static CoPurchaseGraph from_edges(std::size_t node_count, std::span<const Edge> edges,
                                    std::vector<NodeAttributes> attributes = {});

  /// Adopts ready-made CSR arrays, validating every structural invariant.
  static CoPurchaseGraph from_csr(std::vector<std::size_t> offsets, std::vector<NodeId> adjacency,
                                  std::vector<NodeAttributes> attributes);

  std::size_t node_count() const noexcept { return attributes_.size(); }
  std::size_t edge_count() const noexcept { return adjacency_.size() / 2; }

  std::size_t degree(NodeId v) const noexcept { return offsets_[v + 1] - offsets_[v]; }
  std::span<const NodeId> neighbors(NodeId v) const noexcept {
    return {adjacency_.data() + offsets_[v], degree(v)};
  }
  bool has_edge(NodeId u, NodeId v) const noexcept;

  const NodeAttributes& attributes(NodeId v) const noexcept { return attributes_[v]; }
  std::span<const NodeAttributes> all_attributes() const noexcept { return attributes_; }
  std::optional<NodeId> find(std::string_view asin) const;

  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const NodeId> adjacency() const noexcept { return adjacency_; }

  /// Calls f(u, v) once per undirected edge with u < v, in CSR order.
  template <class F>
  void for_each_edge(F&& f) const {
    for (NodeId u = 0; u < node_count(); ++u) {
      for (NodeId v : neighbors(u)) {
        if (u < v) f(u, v);
      }
    }
  }

  std::vector<Edge> edges() const;

  /// Throws InvariantViolation if symmetry, sortedness, self-loop or
  /// degree-sum invariants fail.
  void check_invariants() const;

 private:
  void index_asins();

  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
  std::vector<NodeAttributes> attributes_;
  std::unordered_map<std::string, NodeId> asin_index_;
};

struct BuildStats {
  std::size_t records = 0;
  std::size_t dropped_references = 0;  // similar ASINs absent from the record set
  std::size_t self_references = 0;
  std::size_t duplicate_asins = 0;     // later records with an already-seen ASIN
  std::vector<std::string> duplicate_examples;
};

struct BuildResult {
  CoPurchaseGraph graph;
  BuildStats stats;
};

/// One node per (first-seen) record, one undirected edge per resolvable
/// similar reference. Deterministic in input order.
BuildResult build_graph(std::span<const ProductRecord> records);

/// Induced subgraph plus the original id of every new node.
struct Subgraph {
  CoPurchaseGraph graph;
  std::vector<NodeId> original_ids;
};

/// Nodes keep the order given in `nodes` (new id i is nodes[i]).
Subgraph induced_subgraph(const CoPurchaseGraph& g, std::span<const NodeId> nodes);

/// Read-only view of a graph with at most one edge hidden. Hiding is an
/// overlay; the underlying graph is never touched.
class MaskedView {
 public:
  explicit MaskedView(const CoPurchaseGraph& g) noexcept : g_(&g) {}
  /// Hides edge {a, b}. No-op if the edge does not exist.
  MaskedView(const CoPurchaseGraph& g, NodeId a, NodeId b) noexcept;

  const CoPurchaseGraph& base() const noexcept { return *g_; }
  std::size_t node_count() const noexcept { return g_->node_count(); }
  bool masking() const noexcept { return hidden_; }
  Edge hidden_edge() const noexcept { return {a_, b_}; }

  std::size_t degree(NodeId v) const noexcept {
    return g_->degree(v) - (hidden_ && (v == a_ || v == b_) ? 1 : 0);
  }
  bool has_edge(NodeId u, NodeId v) const noexcept;
  bool is_endpoint(NodeId v) const noexcept { return hidden_ && (v == a_ || v == b_); }

  template <class F>
  void for_each_neighbor(NodeId v, F&& f) const {
    const NodeId skip = !hidden_ ? v : (v == a_ ? b_ : (v == b_ ? a_ : v));
    for (NodeId w : g_->neighbors(v)) {
      if (w != skip) f(w);
    }
  }

  void neighbors(NodeId v, std::vector<NodeId>& out) const;

 private:
  const CoPurchaseGraph* g_;
  NodeId a_ = 0;
  NodeId b_ = 0;
  bool hidden_ = false;
};

}  // namespace copurchase
