#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <sstream>
#include <unistd.h>

#include "copurchase/rng.hpp"

namespace fixtures {

using namespace copurchase;

namespace {

std::string asin_of(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "B%09zu", i);
  return buf;
}

CategoryPath community_path(std::size_t community, std::size_t leaf) {
  CategoryPath p;
  p.levels.push_back({"Books", 283155});
  p.levels.push_back({"Subjects", 1000});
  p.levels.push_back({"Topic " + std::to_string(community), static_cast<std::int64_t>(2000 + community)});
  p.levels.push_back({"Shelf " + std::to_string(leaf),
                      static_cast<std::int64_t>(3000 + community * 10 + leaf)});
  return p;
}

}  // namespace

std::vector<ProductRecord> make_catalog(const CatalogSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const Group::Kind kinds[] = {Group::Kind::Book, Group::Kind::DVD, Group::Kind::Music, Group::Kind::Video};
  std::vector<ProductRecord> out;
  out.reserve(spec.products);
  for (std::size_t i = 0; i < spec.products; ++i) {
    ProductRecord r;
    r.id = static_cast<std::int64_t>(i);
    r.asin = asin_of(i);
    if (rng.uniform01() < spec.discontinued) {
      r.discontinued = true;
      out.push_back(std::move(r));
      continue;
    }
    const std::size_t c = i % spec.communities;
    if (rng.uniform01() >= spec.missing_title) r.title = "Product " + std::to_string(i) + " volume " + std::to_string(c);
    Group g;
    g.kind = kinds[c % 4];
    r.group = g;
    r.salesrank = static_cast<std::int64_t>(rng.uniform_index(1'000'000));

    const std::size_t k = rng.uniform_index(spec.max_similar + 1);
    for (std::size_t j = 0; j < k; ++j) {
      std::string target;
      if (rng.uniform01() < spec.dangling_reference) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "X%09zu", static_cast<std::size_t>(rng.uniform_index(1'000'000'000)));
        target = buf;
      } else {
        std::size_t t;
        if (rng.uniform01() < spec.within_community) {
          const std::size_t members = (spec.products - c + spec.communities - 1) / spec.communities;
          t = c + spec.communities * rng.uniform_index(members);
        } else {
          t = rng.uniform_index(spec.products);
        }
        if (t == i) continue;
        target = asin_of(t);
      }
      if (std::find(r.similar_asins.begin(), r.similar_asins.end(), target) == r.similar_asins.end()) {
        r.similar_asins.push_back(target);
      }
    }
    const std::size_t paths = 1 + rng.uniform_index(2);
    for (std::size_t p = 0; p < paths; ++p) r.category_paths.push_back(community_path(c, (i + p) % 3));
    ReviewSummary rs;
    rs.total = static_cast<int>(rng.uniform_index(50));
    rs.downloaded = rs.total;
    rs.avg_rating = rs.total ? 0.5 * static_cast<double>(2 + rng.uniform_index(9)) : 0.0;
    r.review_summary = rs;
    out.push_back(std::move(r));
  }
  return out;
}

std::string to_metadata_text(const std::vector<ProductRecord>& records) {
  std::ostringstream out;
  write_metadata(out, records);
  return out.str();
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("copurchase-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

CoPurchaseGraph random_graph(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (rng.uniform01() < p) edges.emplace_back(u, v);
    }
  }
  return CoPurchaseGraph::from_edges(n, edges);
}

CoPurchaseGraph random_attributed_graph(std::size_t n, double p, std::uint64_t seed, std::size_t groups) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (rng.uniform01() < p) edges.emplace_back(u, v);
    }
  }
  const Group::Kind kinds[] = {Group::Kind::Book, Group::Kind::DVD, Group::Kind::Music, Group::Kind::Video};
  std::vector<NodeAttributes> attrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    attrs[i].asin = asin_of(i);
    const std::size_t g = rng.uniform_index(groups);
    if (g < 4) {
      attrs[i].group.kind = kinds[g];
    } else {
      attrs[i].group.kind = Group::Kind::Other;
      attrs[i].group.other = "Group" + std::to_string(g);
    }
    const std::size_t paths = rng.uniform_index(3);
    for (std::size_t q = 0; q < paths; ++q) {
      std::vector<std::int64_t> ids;
      const std::size_t len = 1 + rng.uniform_index(5);
      for (std::size_t l = 0; l < len; ++l) ids.push_back(static_cast<std::int64_t>(rng.uniform_index(3)));
      attrs[i].category_paths.push_back(ids);
    }
  }
  return CoPurchaseGraph::from_edges(n, edges, std::move(attrs));
}

CoPurchaseGraph two_triangles() {
  const std::vector<Edge> edges = {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}};
  return CoPurchaseGraph::from_edges(6, edges);
}

}  // namespace fixtures
