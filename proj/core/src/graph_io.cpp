#include "copurchase/graph_io.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "copurchase/error.hpp"

namespace copurchase {

namespace {

constexpr char kGraphMagic[8] = {'C', 'P', 'G', 'R', 'A', 'P', 'H', '1'};
constexpr char kRecordMagic[8] = {'C', 'P', 'R', 'E', 'C', 'S', '0', '1'};

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot write " + path);
  }

  template <class T>
    requires std::is_trivially_copyable_v<T>
  void pod(const T& value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof value);
  }

  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  template <class T>
  void array(std::span<const T> values) {
    pod<std::uint64_t>(values.size());
    out_.write(reinterpret_cast<const char*>(values.data()),
               static_cast<std::streamsize>(values.size_bytes()));
  }

  void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

  void group(const Group& g) {
    pod<std::uint8_t>(static_cast<std::uint8_t>(g.kind));
    string(g.other);
  }

  void finish() {
    out_.flush();
    if (!out_) throw DataError("write failed");
  }

 private:
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw DataError("cannot open " + path);
  }

  template <class T>
    requires std::is_trivially_copyable_v<T>
  T pod() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof value);
    check();
    return value;
  }

  std::string string() {
    const auto n = pod<std::uint64_t>();
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }

  template <class T>
  std::vector<T> array() {
    const auto n = pod<std::uint64_t>();
    std::vector<T> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    check();
    return v;
  }

  void expect_magic(const char (&magic)[8]) {
    char buf[8];
    in_.read(buf, 8);
    check();
    if (std::memcmp(buf, magic, 8) != 0) {
      throw DataError(path_ + ": unexpected file type or version");
    }
  }

  Group group() {
    const auto kind = pod<std::uint8_t>();
    if (kind > static_cast<std::uint8_t>(Group::Kind::Other)) throw DataError(path_ + ": bad group");
    return {static_cast<Group::Kind>(kind), string()};
  }

 private:
  void check() {
    if (!in_) throw DataError(path_ + ": truncated file");
  }

  std::ifstream in_;
  std::string path_;
};

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

template <class Int>
Int to_int(std::string_view s, const char* what) {
  Int v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw DataError(std::string("bad integer in ") + what + ": \"" + std::string(s) + "\"");
  }
  return v;
}

}  // namespace

void save_graph(const std::string& path, const CoPurchaseGraph& g,
                std::span<const NodeId> original_ids) {
  BinaryWriter w(path);
  w.raw(kGraphMagic, 8);
  w.array(g.offsets());
  w.array(g.adjacency());
  w.array(original_ids);
  w.pod<std::uint64_t>(g.node_count());
  for (const auto& a : g.all_attributes()) {
    w.string(a.asin);
    w.group(a.group);
    w.pod<std::uint64_t>(a.category_paths.size());
    for (const auto& path_ids : a.category_paths) w.array(std::span<const std::int64_t>(path_ids));
  }
  w.finish();
}

CoPurchaseGraph load_graph(const std::string& path, std::vector<NodeId>* original_ids) {
  BinaryReader r(path);
  r.expect_magic(kGraphMagic);
  auto offsets = r.array<std::size_t>();
  auto adjacency = r.array<NodeId>();
  auto ids = r.array<NodeId>();
  const auto n = r.pod<std::uint64_t>();
  std::vector<NodeAttributes> attrs(n);
  for (auto& a : attrs) {
    a.asin = r.string();
    a.group = r.group();
    a.category_paths.resize(r.pod<std::uint64_t>());
    for (auto& p : a.category_paths) p = r.array<std::int64_t>();
  }
  if (original_ids != nullptr) *original_ids = std::move(ids);
  return CoPurchaseGraph::from_csr(std::move(offsets), std::move(adjacency), std::move(attrs));
}

void save_records(const std::string& path, std::span<const ProductRecord> records) {
  BinaryWriter w(path);
  w.raw(kRecordMagic, 8);
  w.pod<std::uint64_t>(records.size());
  for (const auto& r : records) {
    w.pod<std::int64_t>(r.id);
    w.string(r.asin);
    std::uint8_t flags = 0;
    if (r.title) flags |= 1;
    if (r.group) flags |= 2;
    if (r.salesrank) flags |= 4;
    if (r.review_summary) flags |= 8;
    if (r.discontinued) flags |= 16;
    w.pod(flags);
    if (r.title) w.string(*r.title);
    if (r.group) w.group(*r.group);
    if (r.salesrank) w.pod<std::int64_t>(*r.salesrank);
    if (r.review_summary) {
      w.pod<std::int32_t>(r.review_summary->total);
      w.pod<std::int32_t>(r.review_summary->downloaded);
      w.pod<double>(r.review_summary->avg_rating);
    }
    w.pod<std::uint64_t>(r.similar_asins.size());
    for (const auto& s : r.similar_asins) w.string(s);
    w.pod<std::uint64_t>(r.category_paths.size());
    for (const auto& p : r.category_paths) {
      w.pod<std::uint64_t>(p.levels.size());
      for (const auto& level : p.levels) {
        w.string(level.name);
        w.pod<std::int64_t>(level.cat_id);
      }
    }
  }
  w.finish();
}

std::vector<ProductRecord> load_records(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kRecordMagic);
  std::vector<ProductRecord> out(r.pod<std::uint64_t>());
  for (auto& rec : out) {
    rec.id = r.pod<std::int64_t>();
    rec.asin = r.string();
    const auto flags = r.pod<std::uint8_t>();
    if (flags & 1) rec.title = r.string();
    if (flags & 2) rec.group = r.group();
    if (flags & 4) rec.salesrank = r.pod<std::int64_t>();
    if (flags & 8) {
      ReviewSummary s;
      s.total = r.pod<std::int32_t>();
      s.downloaded = r.pod<std::int32_t>();
      s.avg_rating = r.pod<double>();
      rec.review_summary = s;
    }
    rec.discontinued = (flags & 16) != 0;
    rec.similar_asins.resize(r.pod<std::uint64_t>());
    for (auto& s : rec.similar_asins) s = r.string();
    rec.category_paths.resize(r.pod<std::uint64_t>());
    for (auto& p : rec.category_paths) {
      p.levels.resize(r.pod<std::uint64_t>());
      for (auto& level : p.levels) {
        level.name = r.string();
        level.cat_id = r.pod<std::int64_t>();
      }
    }
  }
  return out;
}

void write_edge_csv(std::ostream& out, const CoPurchaseGraph& g) {
  out << "u,v\n";
  g.for_each_edge([&](NodeId u, NodeId v) { out << u << ',' << v << '\n'; });
}

void write_node_csv(std::ostream& out, const CoPurchaseGraph& g,
                    std::span<const NodeId> original_ids) {
  out << (original_ids.empty() ? "node,asin,group,categories\n"
                               : "node,asin,group,categories,original_id\n");
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const auto& a = g.attributes(v);
    std::string cats;
    for (std::size_t p = 0; p < a.category_paths.size(); ++p) {
      if (p > 0) cats += ';';
      for (std::size_t i = 0; i < a.category_paths[p].size(); ++i) {
        if (i > 0) cats += '/';
        cats += std::to_string(a.category_paths[p][i]);
      }
    }
    out << v << ',' << a.asin << ',' << csv_field(a.group.label()) << ',' << cats;
    if (!original_ids.empty()) out << ',' << original_ids[v];
    out << '\n';
  }
}

CoPurchaseGraph read_graph_csv(std::istream& nodes, std::istream& edges) {
  std::string line;
  std::vector<NodeAttributes> attrs;
  std::getline(nodes, line);  // header
  while (std::getline(nodes, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 4) throw DataError("node csv: expected at least 4 columns");
    if (to_int<std::size_t>(f[0], "node csv") != attrs.size()) {
      throw DataError("node csv: node ids must be dense and ascending");
    }
    NodeAttributes a;
    a.asin = f[1];
    a.group = Group::from_label(f[2]);
    std::stringstream paths(f[3]);
    std::string path;
    while (std::getline(paths, path, ';')) {
      std::vector<std::int64_t> ids;
      std::stringstream levels(path);
      std::string id;
      while (std::getline(levels, id, '/')) ids.push_back(to_int<std::int64_t>(id, "node csv"));
      a.category_paths.push_back(std::move(ids));
    }
    attrs.push_back(std::move(a));
  }

  std::vector<Edge> edge_list;
  std::getline(edges, line);
  while (std::getline(edges, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 2) throw DataError("edge csv: expected u,v");
    edge_list.emplace_back(to_int<NodeId>(f[0], "edge csv"), to_int<NodeId>(f[1], "edge csv"));
  }
  const std::size_t n = attrs.size();
  return CoPurchaseGraph::from_edges(n, edge_list, std::move(attrs));
}

void write_gexf(std::ostream& out, const CoPurchaseGraph& g,
                std::span<const NodeId> original_ids) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<gexf xmlns=\"http://www.gexf.net/1.2draft\" version=\"1.2\">\n"
      << "  <graph mode=\"static\" defaultedgetype=\"undirected\">\n"
      << "    <attributes class=\"node\">\n"
      << "      <attribute id=\"0\" title=\"asin\" type=\"string\"/>\n"
      << "      <attribute id=\"1\" title=\"group\" type=\"string\"/>\n"
      << "      <attribute id=\"2\" title=\"degree\" type=\"integer\"/>\n"
      << "      <attribute id=\"3\" title=\"original_id\" type=\"integer\"/>\n"
      << "    </attributes>\n"
      << "    <nodes>\n";
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const auto& a = g.attributes(v);
    out << "      <node id=\"" << v << "\" label=\"" << xml_escape(a.asin) << "\">\n"
        << "        <attvalues>\n"
        << "          <attvalue for=\"0\" value=\"" << xml_escape(a.asin) << "\"/>\n"
        << "          <attvalue for=\"1\" value=\"" << xml_escape(a.group.label()) << "\"/>\n"
        << "          <attvalue for=\"2\" value=\"" << g.degree(v) << "\"/>\n"
        << "          <attvalue for=\"3\" value=\""
        << (original_ids.empty() ? v : original_ids[v]) << "\"/>\n"
        << "        </attvalues>\n"
        << "      </node>\n";
  }
  out << "    </nodes>\n    <edges>\n";
  std::size_t e = 0;
  g.for_each_edge([&](NodeId u, NodeId v) {
    out << "      <edge id=\"" << e++ << "\" source=\"" << u << "\" target=\"" << v << "\"/>\n";
  });
  out << "    </edges>\n  </graph>\n</gexf>\n";
}

}  // namespace copurchase
