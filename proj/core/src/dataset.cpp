#include "copurchase/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "copurchase/error.hpp"
#include "copurchase/parallel.hpp"
#include "copurchase/rng.hpp"

namespace copurchase {

NegativeMode parse_negative_mode(std::string_view name) {
  if (name == "non_adjacent") return NegativeMode::NonAdjacent;
  if (name == "isolated") return NegativeMode::Isolated;
  throw DataError("unknown negative mode \"" + std::string(name) +
                  "\" (expected non_adjacent or isolated)");
}

std::string_view negative_mode_name(NegativeMode mode) noexcept {
  return mode == NegativeMode::Isolated ? "isolated" : "non_adjacent";
}

std::vector<NodeId> one_degree_nodes(const CoPurchaseGraph& g) {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (g.degree(v) == 1) out.push_back(v);
  }
  return out;
}

namespace {

NodeId draw_non_neighbor(const CoPurchaseGraph& g, NodeId source, Rng& rng) {
  const std::size_t n = g.node_count();
  if (g.degree(source) + 1 >= n) {
    throw DataError("node " + std::to_string(source) + " is adjacent to every other node");
  }
  for (int attempt = 0; attempt < 64; ++attempt) {
    const auto v = static_cast<NodeId>(rng.uniform_index(n));
    if (v != source && !g.has_edge(source, v)) return v;
  }
  // Dense neighborhood: enumerate the complement instead of retrying.
  std::vector<NodeId> pool;
  for (NodeId v = 0; v < n; ++v) {
    if (v != source && !g.has_edge(source, v)) pool.push_back(v);
  }
  return pool[rng.uniform_index(pool.size())];
}

}  // namespace

std::vector<PairSample> make_training_set(const CoPurchaseGraph& g, const DatasetSpec& spec,
                                          std::uint64_t seed) {
  std::vector<NodeId> pool = one_degree_nodes(g);
  if (pool.size() < spec.positives) {
    throw DataError("make_training_set: need " + std::to_string(spec.positives) +
                    " 1-degree nodes, graph has " + std::to_string(pool.size()));
  }
  if (spec.negatives > 0 && pool.empty()) {
    throw DataError("make_training_set: no 1-degree nodes to use as negative sources");
  }
  std::vector<NodeId> isolated;
  if (spec.negative_mode == NegativeMode::Isolated && spec.negatives > 0) {
    for (NodeId v = 0; v < g.node_count(); ++v) {
      if (g.degree(v) == 0) isolated.push_back(v);
    }
    if (isolated.empty()) {
      throw DataError("make_training_set: negatives=isolated but the graph has no isolated nodes");
    }
  }

  Rng rng(seed);
  std::vector<PairSample> out;
  out.reserve(spec.positives + spec.negatives);

  // Partial Fisher-Yates: the first `positives` slots become the sample.
  std::vector<NodeId> order = pool;
  for (std::size_t i = 0; i < spec.positives; ++i) {
    const std::size_t j = i + rng.uniform_index(order.size() - i);
    std::swap(order[i], order[j]);
    out.push_back({order[i], g.neighbors(order[i])[0], 1});
  }

  for (std::size_t i = 0; i < spec.negatives; ++i) {
    const NodeId source = pool[rng.uniform_index(pool.size())];
    const NodeId target = spec.negative_mode == NegativeMode::Isolated
                              ? isolated[rng.uniform_index(isolated.size())]
                              : draw_non_neighbor(g, source, rng);
    out.push_back({source, target, 0});
  }

  rng.shuffle(out.begin(), out.end());
  return out;
}

Split split(std::span<const PairSample> samples, double train_fraction, std::uint64_t seed) {
  if (samples.empty()) throw DataError("split: no samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DataError("split: train fraction must be in (0, 1)");
  }

  std::vector<PairSample> by_class[2];
  for (const auto& s : samples) by_class[s.label ? 1 : 0].push_back(s);

  const auto total = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(samples.size())));
  std::size_t take[2];
  double frac[2];
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = train_fraction * static_cast<double>(by_class[c].size());
    take[c] = static_cast<std::size_t>(std::floor(exact));
    frac[c] = exact - std::floor(exact);
    assigned += take[c];
  }
  // Largest remainder; positives win ties.
  const int first = frac[1] >= frac[0] ? 1 : 0;
  for (int c : {first, 1 - first}) {
    if (assigned < total && take[c] < by_class[c].size()) {
      ++take[c];
      ++assigned;
    }
  }

  Rng rng(seed);
  Split out;
  for (int c : {1, 0}) {
    auto& members = by_class[c];
    rng.shuffle(members.begin(), members.end());
    out.train.insert(out.train.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(take[c]));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(take[c]),
                    members.end());
  }
  rng.shuffle(out.train.begin(), out.train.end());
  rng.shuffle(out.test.begin(), out.test.end());
  return out;
}

void check_samples(const CoPurchaseGraph& g, std::span<const PairSample> samples,
                   NegativeMode mode) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::string where = "sample " + std::to_string(i);
    if (s.source >= g.node_count() || s.target >= g.node_count()) {
      throw InvariantViolation(where + ": node out of range");
    }
    if (s.label == 1) {
      if (!g.has_edge(s.source, s.target)) throw InvariantViolation(where + ": positive is not an edge");
      if (g.degree(s.source) != 1) throw InvariantViolation(where + ": positive source degree != 1");
    } else {
      if (s.source == s.target) throw InvariantViolation(where + ": self pair");
      if (g.has_edge(s.source, s.target)) throw InvariantViolation(where + ": negative is an edge");
      if (mode == NegativeMode::Isolated && g.degree(s.target) != 0) {
        throw InvariantViolation(where + ": negative target is not isolated");
      }
    }
  }
}

FeatureMatrix build_features(const FeatureContext& ctx, std::span<const PairSample> samples,
                             FeatureVariant variant) {
  FeatureMatrix m;
  m.rows = samples.size();
  m.cols = feature_width(variant, ctx.config());
  m.values.assign(m.rows * m.cols, 0.0);
  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    const FeatureContext local = s.label ? ctx.masked(s.source, s.target) : ctx;
    std::vector<double> row;
    pair_feature(local, s.source, s.target, variant, row);
    if (row.size() != m.cols) throw InvariantViolation("pair feature width changed between pairs");
    std::copy(row.begin(), row.end(), m.values.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  });
  return m;
}

std::vector<std::uint8_t> labels_of(std::span<const PairSample> samples) {
  std::vector<std::uint8_t> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return y;
}

void write_samples_csv(std::ostream& out, const CoPurchaseGraph& g,
                       std::span<const PairSample> samples) {
  out << "source_asin,target_asin,label\n";
  for (const auto& s : samples) {
    out << g.attributes(s.source).asin << ',' << g.attributes(s.target).asin << ','
        << static_cast<int>(s.label) << '\n';
  }
}

std::vector<PairSample> read_samples_csv(std::istream& in, const CoPurchaseGraph& g) {
  std::vector<PairSample> out;
  std::string line;
  std::getline(in, line);
  if (line.rfind("source_asin,target_asin,label", 0) != 0) {
    throw DataError("samples csv: unexpected header");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw DataError("samples csv: malformed line \"" + line + "\"");
    }
    const auto u = g.find(std::string_view(line).substr(0, c1));
    const auto v = g.find(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
    const std::string label = line.substr(c2 + 1);
    if (!u || !v) throw DataError("samples csv: ASIN not in graph: \"" + line + "\"");
    if (label != "0" && label != "1") throw DataError("samples csv: bad label in \"" + line + "\"");
    out.push_back({*u, *v, static_cast<std::uint8_t>(label == "1")});
  }
  return out;
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& m,
                       std::span<const std::string> columns, std::string_view variant,
                       std::span<const std::uint8_t> labels) {
  out << "# variant=" << variant << " columns=" << m.cols << '\n';
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  if (!labels.empty()) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << row[c];
    }
    if (!labels.empty()) out << ',' << static_cast<int>(labels[r]);
    out << '\n';
  }
}

}  // namespace copurchase
