#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "walklm/graph.hpp"

namespace walklm {

// How to read an edge list out of a CSV: which columns are endpoints and
// timestamp, which columns become features (and of what kind), optional
// equality filters (ANDed) and an optional label column.
struct ColumnSchema {
  std::string src_column;
  std::string dst_column;
  std::string ts_column;

  struct FeatureColumn {
    std::string column;
    FeatureKind kind = FeatureKind::categorical;
  };
  std::vector<FeatureColumn> features;

  struct Filter {
    std::string column;
    std::string equals;
  };
  std::vector<Filter> filters;

  std::string label_column;                     // empty: unlabeled data
  std::vector<std::string> anomalous_values;    // label values marking an anomaly

  std::string to_json() const;
  static ColumnSchema from_json_text(const std::string& text);
  static ColumnSchema load(const std::string& path);
  void save(const std::string& path) const;
};

struct IngestResult {
  std::vector<EdgeRecord> edges;
  std::vector<int> labels;             // aligned with edges; all 0 when unlabeled
  std::vector<std::string> entities;   // dense node id -> original name, first-appearance order
  uint64_t rows_filtered = 0;          // dropped by filter predicates
  uint64_t rows_malformed = 0;         // dropped with a parse error
  std::vector<std::string> malformed_samples;  // first few error messages
};

// Parses a CSV with a header row. A missing schema column is fatal; a
// malformed row (bad timestamp, bad count, wrong field count) is counted,
// sampled into malformed_samples, and skipped.
IngestResult parse_edge_csv(const std::string& path, const ColumnSchema& schema);

// ---------------------------------------------------------------------------
// ground-truth labeling for red-team style datasets

struct CompromiseEvent {
  std::string host;
  double time = 0.0;  // seconds; the attack day is floor(time / 86400)
};

// CSV with header "host,time".
std::vector<CompromiseEvent> read_compromise_csv(const std::string& path);

// Marks an edge anomalous iff its source entity has a compromise event with
// edge.ts >= event.time and both timestamps on the same (UTC) day. Unknown
// hosts in the event list are an error.
void apply_compromise_labels(IngestResult& data, const std::vector<CompromiseEvent>& events);

// ---------------------------------------------------------------------------
// splitting

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  uint64_t seed = 0;
};

// Edge indices per split. Benign edges are shuffled by the seed and cut
// val/test by floor(frac*n) with train taking the remainder; every anomalous
// edge goes to the test split. Requires at least 10 benign edges.
struct SplitResult {
  std::vector<uint64_t> train, val, test_benign, test_anomalous;
  uint64_t seed = 0;
  uint64_t num_edges = 0;
};

SplitResult split_benign(const std::vector<int>& labels, const SplitSpec& spec);

// Text manifest listing each split as inclusive index ranges over the CSR
// edge order of the dataset's graph.bin.
void save_split_manifest(const std::string& path, const SplitResult& s);
SplitResult load_split_manifest(const std::string& path);

// ---------------------------------------------------------------------------
// synthetic block-structured traffic

struct SyntheticSpec {
  uint32_t num_nodes = 200;
  uint32_t num_blocks = 2;
  uint32_t edges_per_node = 100;  // benign edge count = num_nodes * edges_per_node
  double intra_block_p = 0.95;
  double horizon = 1e6;           // timestamps uniform in [0, horizon)
  uint32_t num_anomalies = 200;
  std::vector<std::string> feature_kinds;  // entries from {"categorical", "count"}
  uint64_t seed = 0;

  std::string to_json() const;
  static SyntheticSpec from_json_text(const std::string& text);
  static SyntheticSpec load(const std::string& path);
};

struct SyntheticData {
  std::vector<EdgeRecord> edges;
  std::vector<int> labels;
  uint32_t num_nodes = 0;
  uint16_t arity = 0;
};

// Benign edges mostly stay inside contiguous node blocks and carry features
// drawn from the source block's distribution; anomalies always cross blocks,
// land late in the horizon, and carry destination-block-styled features.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

uint32_t synthetic_block_of(uint32_t node, uint32_t num_nodes, uint32_t num_blocks);

// CSV round-trip for the synth CLI: header src,dst,ts,label,f0..fk-1 plus a
// matching ColumnSchema.
void write_edges_csv(const std::string& path, const SyntheticData& data);
ColumnSchema synthetic_schema(const SyntheticSpec& spec);

// entities.txt: dense id -> name, one per line.
void save_entities(const std::string& path, const std::vector<std::string>& entities);
std::vector<std::string> load_entities(const std::string& path);

}  // namespace walklm
