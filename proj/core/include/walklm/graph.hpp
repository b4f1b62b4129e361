#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace walklm {

using NodeId = uint32_t;
using EdgeIdx = int64_t;
using Timestamp = double;

enum class FeatureKind : uint8_t { categorical = 0, count = 1, ratio = 2 };

// One edge-feature value. Tagged struct rather than std::variant so the
// binary serialization stays a one-byte kind + payload.
struct FeatureValue {
  FeatureKind kind = FeatureKind::categorical;
  std::string cat;     // categorical label
  uint64_t count = 0;  // non-negative integer
  double ratio = 0.0;  // non-negative real

  static FeatureValue from_categorical(std::string label);
  static FeatureValue from_count(uint64_t n);
  static FeatureValue from_ratio(double r);  // throws if negative or non-finite

  bool operator==(const FeatureValue& o) const;
};

struct EdgeRecord {
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp ts = 0.0;
  std::vector<FeatureValue> feats;  // exactly graph arity entries
};

// Directed temporal multigraph in CSR form. Each row's edges are sorted by
// timestamp ascending with input order preserved on ties, so binary search
// over a row answers "first edge at time >= t" and walk replay is stable.
class TemporalGraph {
 public:
  // Builds from an edge list. Duplicate (src, dst, ts) rows are all kept.
  // Throws on out-of-range node ids, non-finite/negative timestamps, or a
  // record whose feature count differs from `arity`. When csr_to_input is
  // given it receives the permutation mapping CSR edge index -> input index,
  // which split manifests need to carry labels across the reordering.
  static TemporalGraph build(uint32_t num_nodes, uint16_t arity,
                             const std::vector<EdgeRecord>& edges,
                             std::vector<uint64_t>* csr_to_input = nullptr);

  uint32_t num_nodes() const { return num_nodes_; }
  uint64_t num_edges() const { return col_.size(); }
  uint16_t arity() const { return arity_; }

  const std::vector<uint64_t>& idxptr() const { return idxptr_; }
  const std::vector<NodeId>& col() const { return col_; }
  const std::vector<Timestamp>& ts() const { return ts_; }

  uint64_t out_degree(NodeId u) const { return idxptr_[u + 1] - idxptr_[u]; }

  // First edge index in u's row with timestamp >= t, or the row end if none.
  // The caller gets the half-open candidate range [result, row_end(u)).
  uint64_t first_at_or_after(NodeId u, Timestamp t) const;
  uint64_t row_begin(NodeId u) const { return idxptr_[u]; }
  uint64_t row_end(NodeId u) const { return idxptr_[u + 1]; }

  // Feature vector of edge e (arity() entries; empty span when arity is 0).
  const FeatureValue* edge_feats(uint64_t e) const { return feats_.data() + e * arity_; }

  // Source node of edge e (binary search over idxptr).
  NodeId edge_src(uint64_t e) const;

  // Same edges with src/dst swapped; features and tie order travel along.
  TemporalGraph transpose() const;

  // Binary format: magic "CGFM", version, counts, then the four arrays,
  // each length-prefixed, all little-endian.
  void save(const std::string& path) const;
  static TemporalGraph load(const std::string& path);

  bool operator==(const TemporalGraph& o) const;

 private:
  uint32_t num_nodes_ = 0;
  uint16_t arity_ = 0;
  std::vector<uint64_t> idxptr_;
  std::vector<NodeId> col_;
  std::vector<Timestamp> ts_;
  std::vector<FeatureValue> feats_;  // num_edges * arity, row-major
};

}  // namespace walklm
