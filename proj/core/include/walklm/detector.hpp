#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "walklm/metrics.hpp"
#include "walklm/trainer.hpp"

namespace walklm {

// One scored test edge. Higher score = more anomalous. label is the ground
// truth when known, -1 otherwise.
struct ScoredEdge {
  EdgeRecord edge;
  double score = 0.0;
  int label = -1;
};

struct ScoreReport {
  std::vector<ScoredEdge> edges;
  MetricsReport metrics;
  bool metrics_defined = false;  // false when labels are absent or single-class
};

// Scores an edge set with a checkpointed model (checkpoint vocab hash must
// match the dataset vocabulary) and computes ranking metrics when the labels
// contain both classes. labels may be empty (all unknown). Throws on an
// empty edge set.
ScoreReport score_report(const WalkData& wd, const Checkpoint& ckpt, FinetuneMode head,
                         const std::vector<EdgeRecord>& edges, const std::vector<int>& labels,
                         int walk_hops, uint64_t seed, int workers = 0);

// CSV with header src,dst,ts,score,label. Endpoints are written as entity
// names when a name table is given, as numeric node ids otherwise; unknown
// labels become an empty field.
void write_scores_csv(const std::string& path, const std::vector<ScoredEdge>& rows,
                      const std::vector<std::string>& entities = {});

// Reads back the score and label columns (entity names are not resolved).
// Rows with an empty label field come back as -1.
struct ScoresFile {
  std::vector<double> scores;
  std::vector<int> labels;
};
ScoresFile read_scores_csv(const std::string& path);

}  // namespace walklm
