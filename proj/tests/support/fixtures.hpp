#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "copurchase/graph.hpp"
#include "copurchase/meta_parser.hpp"

namespace fixtures {

struct CatalogSpec {
  std::size_t products = 400;
  std::size_t communities = 4;    // products in one community share group and categories
  double discontinued = 0.03;
  double missing_title = 0.02;
  double dangling_reference = 0.05;  // similar ASIN that is not in the catalog
  std::size_t max_similar = 5;
  double within_community = 0.9;
};

/// Synthetic amazon-meta catalog with planted communities. Every
/// non-discontinued record carries a review summary so that write/parse
/// round-trips compare equal.
std::vector<copurchase::ProductRecord> make_catalog(const CatalogSpec& spec, std::uint64_t seed);

std::string to_metadata_text(const std::vector<copurchase::ProductRecord>& records);

/// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Erdos-Renyi G(n, p) graph with synthetic attributes.
copurchase::CoPurchaseGraph random_graph(std::size_t n, double p, std::uint64_t seed);

/// G(n, p) graph whose nodes get a random group and one random category path.
copurchase::CoPurchaseGraph random_attributed_graph(std::size_t n, double p, std::uint64_t seed,
                                                    std::size_t groups = 4);

/// Two triangles {0,1,2} and {3,4,5} joined by the edge 2-3.
copurchase::CoPurchaseGraph two_triangles();

}  // namespace fixtures
