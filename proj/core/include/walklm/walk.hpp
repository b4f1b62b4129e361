#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "walklm/graph.hpp"

namespace walklm {

// Marks a step where the walker had no admissible edge and stayed put.
constexpr EdgeIdx kStuck = -1;

// A sampled walk. nodes has one more entry than edge_indices; step i goes
// nodes[i] -> nodes[i+1] via edge_indices[i], or repeats nodes[i] when the
// entry is kStuck. For reverse-temporal walks the stored indices refer to
// the transposed graph the walk was sampled on.
struct Walk {
  std::vector<NodeId> nodes;
  std::vector<EdgeIdx> edge_indices;
};

enum class WalkMode : uint8_t { static_uniform = 0, temporal = 1, temporal_reverse = 2 };

// Forward temporal walk: at each hop choose uniformly among edges leaving the
// current node with timestamp >= the previously taken edge's timestamp
// (>= 0 for the first hop). Once no such edge exists the walk is stuck and
// repeats the current node for every remaining hop; the time bound is not
// advanced by stuck steps.
Walk temporal_walk(const TemporalGraph& g, NodeId start, int hops, uint64_t seed);

// Uniform neighbor sampling with no time constraint.
Walk static_walk(const TemporalGraph& g, NodeId start, int hops, uint64_t seed);

// Walk backward in time from `terminal`: sampled on the transposed graph
// g_rev, choosing uniformly among in-edges with timestamp <= the current
// bound (t_max initially), then returned in forward reading order, so node
// timestamps are non-decreasing left to right and the walk ends at
// `terminal`. Stuck padding therefore appears at the front.
Walk reverse_temporal_walk(const TemporalGraph& g_rev, NodeId terminal, int hops,
                           Timestamp t_max, uint64_t seed);

struct WalkConfig {
  int token_budget = 64;  // hop count is derived from this (one hop can
                          // emit as little as one token when stuck)
  WalkMode mode = WalkMode::temporal;
  uint64_t rng_seed = 0;
  uint64_t batch_counter = 0;  // bumped by the caller once per batch
};

// One walk per start node, sampled in parallel. Walk i uses the RNG stream
// hash(rng_seed, starts[i], batch_counter, i), so results are identical
// whatever the worker count, including sequential execution. For
// temporal_reverse mode, t_max[i] bounds walk i (infinity when omitted).
std::vector<Walk> sample_walk_batch(const TemporalGraph& g, const std::vector<NodeId>& starts,
                                    const WalkConfig& cfg,
                                    const std::vector<Timestamp>& t_max = {});

}  // namespace walklm
