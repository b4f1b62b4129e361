#include "walklm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "walklm/binio.hpp"

namespace walklm {

FeatureValue FeatureValue::from_categorical(std::string label) {
  FeatureValue v;
  v.kind = FeatureKind::categorical;
  v.cat = std::move(label);
  return v;
}

FeatureValue FeatureValue::from_count(uint64_t n) {
  FeatureValue v;
  v.kind = FeatureKind::count;
  v.count = n;
  return v;
}

FeatureValue FeatureValue::from_ratio(double r) {
  if (!std::isfinite(r) || r < 0.0)
    throw std::runtime_error("ratio feature must be finite and non-negative, got " + std::to_string(r));
  FeatureValue v;
  v.kind = FeatureKind::ratio;
  v.ratio = r;
  return v;
}

bool FeatureValue::operator==(const FeatureValue& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case FeatureKind::categorical: return cat == o.cat;
    case FeatureKind::count: return count == o.count;
    case FeatureKind::ratio: return ratio == o.ratio;
  }
  return false;
}

TemporalGraph TemporalGraph::build(uint32_t num_nodes, uint16_t arity,
                                   const std::vector<EdgeRecord>& edges,
                                   std::vector<uint64_t>* csr_to_input) {
  if (num_nodes == 0) throw std::runtime_error("graph must have at least one node");
  TemporalGraph g;
  g.num_nodes_ = num_nodes;
  g.arity_ = arity;
  g.idxptr_.assign(num_nodes + 1, 0);

  for (const EdgeRecord& e : edges) {
    if (e.src >= num_nodes || e.dst >= num_nodes)
      throw std::runtime_error("edge endpoint " + std::to_string(std::max(e.src, e.dst)) +
                               " out of range for " + std::to_string(num_nodes) + " nodes");
    if (!std::isfinite(e.ts) || e.ts < 0.0)
      throw std::runtime_error("edge timestamp must be finite and non-negative");
    if (e.feats.size() != arity)
      throw std::runtime_error("edge has " + std::to_string(e.feats.size()) +
                               " features, graph arity is " + std::to_string(arity));
    g.idxptr_[e.src + 1]++;
  }
  std::partial_sum(g.idxptr_.begin(), g.idxptr_.end(), g.idxptr_.begin());

  uint64_t m = edges.size();
  // Per-row (timestamp, input position) pairs; stable sort on timestamp only
  // keeps the input order for ties, which the walk replay contract relies on.
  std::vector<uint64_t> order(m);
  {
    std::vector<uint64_t> cursor(g.idxptr_.begin(), g.idxptr_.end() - 1);
    for (uint64_t i = 0; i < m; ++i) order[cursor[edges[i].src]++] = i;
  }
  for (uint32_t u = 0; u < num_nodes; ++u) {
    auto row = order.begin() + static_cast<int64_t>(g.idxptr_[u]);
    auto row_end = order.begin() + static_cast<int64_t>(g.idxptr_[u + 1]);
    std::stable_sort(row, row_end,
                     [&edges](uint64_t a, uint64_t b) { return edges[a].ts < edges[b].ts; });
  }

  g.col_.resize(m);
  g.ts_.resize(m);
  g.feats_.resize(m * arity);
  for (uint64_t e = 0; e < m; ++e) {
    const EdgeRecord& r = edges[order[e]];
    g.col_[e] = r.dst;
    g.ts_[e] = r.ts;
    for (uint16_t k = 0; k < arity; ++k) g.feats_[e * arity + k] = r.feats[k];
  }
  if (csr_to_input) *csr_to_input = std::move(order);
  return g;
}

uint64_t TemporalGraph::first_at_or_after(NodeId u, Timestamp t) const {
  auto begin = ts_.begin() + static_cast<int64_t>(idxptr_[u]);
  auto end = ts_.begin() + static_cast<int64_t>(idxptr_[u + 1]);
  return static_cast<uint64_t>(std::lower_bound(begin, end, t) - ts_.begin());
}

NodeId TemporalGraph::edge_src(uint64_t e) const {
  auto it = std::upper_bound(idxptr_.begin(), idxptr_.end(), e);
  return static_cast<NodeId>((it - idxptr_.begin()) - 1);
}

TemporalGraph TemporalGraph::transpose() const {
  std::vector<EdgeRecord> rev;
  rev.reserve(num_edges());
  for (uint64_t e = 0; e < num_edges(); ++e) {
    EdgeRecord r;
    r.src = col_[e];
    r.dst = edge_src(e);
    r.ts = ts_[e];
    r.feats.assign(feats_.begin() + static_cast<int64_t>(e * arity_),
                   feats_.begin() + static_cast<int64_t>((e + 1) * arity_));
    rev.push_back(std::move(r));
  }
  return build(num_nodes_, arity_, rev);
}

// ---------------------------------------------------------------------------
// serialization

static constexpr char kMagic[4] = {'C', 'G', 'F', 'M'};
static constexpr uint32_t kVersion = 1;

void TemporalGraph::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u64(os, num_nodes_);
  write_u64(os, num_edges());
  write_u16(os, arity_);
  write_array(os, idxptr_);
  write_array(os, col_);
  write_array(os, ts_);
  write_u64(os, feats_.size());
  for (const FeatureValue& f : feats_) {
    write_u8(os, static_cast<uint8_t>(f.kind));
    switch (f.kind) {
      case FeatureKind::categorical: write_string(os, f.cat); break;
      case FeatureKind::count: write_u64(os, f.count); break;
      case FeatureKind::ratio: write_f64(os, f.ratio); break;
    }
  }
  if (!os) throw std::runtime_error("write failure on '" + path + "'");
}

TemporalGraph TemporalGraph::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open graph file '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("'" + path + "' is not a graph file (bad magic)");
  uint32_t version = read_u32(is, "graph version");
  if (version != kVersion)
    throw std::runtime_error("unsupported graph file version " + std::to_string(version));

  TemporalGraph g;
  uint64_t num_nodes = read_u64(is, "node count");
  uint64_t num_edges = read_u64(is, "edge count");
  if (num_nodes == 0 || num_nodes > UINT32_MAX)
    throw std::runtime_error("graph file has invalid node count");
  g.num_nodes_ = static_cast<uint32_t>(num_nodes);
  g.arity_ = read_u16(is, "arity");
  g.idxptr_ = read_array<uint64_t>(is, "idxptr");
  g.col_ = read_array<NodeId>(is, "col");
  g.ts_ = read_array<Timestamp>(is, "ts");
  uint64_t nfeat = read_u64(is, "feature count");
  g.feats_.resize(nfeat);
  for (uint64_t i = 0; i < nfeat; ++i) {
    auto kind = read_u8(is, "feature kind");
    FeatureValue& f = g.feats_[i];
    switch (kind) {
      case 0: f = FeatureValue::from_categorical(read_string(is, "feature label")); break;
      case 1: f = FeatureValue::from_count(read_u64(is, "feature count value")); break;
      case 2: f = FeatureValue::from_ratio(read_f64(is, "feature ratio value")); break;
      default: throw std::runtime_error("unknown feature kind tag " + std::to_string(kind));
    }
  }

  // Structural validation: a corrupt file should fail here, not in a walk.
  if (g.idxptr_.size() != num_nodes + 1 || g.idxptr_.front() != 0 || g.idxptr_.back() != num_edges)
    throw std::runtime_error("graph file idxptr is inconsistent with its edge count");
  if (g.col_.size() != num_edges || g.ts_.size() != num_edges || nfeat != num_edges * g.arity_)
    throw std::runtime_error("graph file array lengths are inconsistent");
  for (size_t u = 0; u + 1 < g.idxptr_.size(); ++u) {
    if (g.idxptr_[u] > g.idxptr_[u + 1])
      throw std::runtime_error("graph file idxptr is not non-decreasing");
    for (uint64_t e = g.idxptr_[u]; e + 1 < g.idxptr_[u + 1]; ++e)
      if (g.ts_[e] > g.ts_[e + 1])
        throw std::runtime_error("graph file row " + std::to_string(u) + " is not time-sorted");
  }
  for (NodeId v : g.col_)
    if (v >= g.num_nodes_) throw std::runtime_error("graph file has out-of-range destination node");
  return g;
}

bool TemporalGraph::operator==(const TemporalGraph& o) const {
  return num_nodes_ == o.num_nodes_ && arity_ == o.arity_ && idxptr_ == o.idxptr_ &&
         col_ == o.col_ && ts_ == o.ts_ && feats_ == o.feats_;
}

}  // namespace walklm
