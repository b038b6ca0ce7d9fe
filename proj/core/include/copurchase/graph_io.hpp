#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "copurchase/graph.hpp"
#include "copurchase/meta_parser.hpp"

namespace copurchase {

// Binary formats are little-endian host layout with a magic + version
// header. They are caches for the CLI stages, not interchange formats.

void save_graph(const std::string& path, const CoPurchaseGraph& g,
                std::span<const NodeId> original_ids = {});
CoPurchaseGraph load_graph(const std::string& path, std::vector<NodeId>* original_ids = nullptr);

void save_records(const std::string& path, std::span<const ProductRecord> records);
std::vector<ProductRecord> load_records(const std::string& path);

/// `u,v` header then one line per undirected edge (u < v).
void write_edge_csv(std::ostream& out, const CoPurchaseGraph& g);
/// `node,asin,group,categories` with categories as `;`-separated paths of
/// `/`-separated ids.
void write_node_csv(std::ostream& out, const CoPurchaseGraph& g,
                    std::span<const NodeId> original_ids = {});
/// Reads the pair written by write_edge_csv / write_node_csv.
CoPurchaseGraph read_graph_csv(std::istream& nodes, std::istream& edges);

/// GEXF 1.2 with `asin`, `group` and `degree` node attributes.
void write_gexf(std::ostream& out, const CoPurchaseGraph& g,
                std::span<const NodeId> original_ids = {});

}  // namespace copurchase
