#include "walklm/walk.hpp"

#include <algorithm>
#include <stdexcept>

#include "walklm/rng.hpp"
#include "walklm/threading.hpp"

namespace walklm {

namespace {

void check_start(const TemporalGraph& g, NodeId start) {
  if (start >= g.num_nodes())
    throw std::runtime_error("walk start node " + std::to_string(start) + " out of range");
}

// Shared body for static and forward-temporal sampling. `temporal` decides
// whether the admissible range is the whole row or the suffix at time >= t.
Walk forward_walk(const TemporalGraph& g, NodeId start, int hops, uint64_t seed, bool temporal) {
  check_start(g, start);
  if (hops < 0) throw std::runtime_error("walk hop count must be non-negative");
  Rng rng(seed);
  Walk w;
  w.nodes.reserve(static_cast<size_t>(hops) + 1);
  w.edge_indices.reserve(static_cast<size_t>(hops));
  w.nodes.push_back(start);

  NodeId cur = start;
  Timestamp t = 0.0;
  bool stuck = false;
  for (int i = 0; i < hops; ++i) {
    if (!stuck) {
      uint64_t lo = temporal ? g.first_at_or_after(cur, t) : g.row_begin(cur);
      uint64_t hi = g.row_end(cur);
      if (lo == hi) {
        stuck = true;  // no admissible edge now; cannot recover later either
      } else {
        uint64_t e = lo + rng.next_below(hi - lo);
        cur = g.col()[e];
        t = g.ts()[e];
        w.nodes.push_back(cur);
        w.edge_indices.push_back(static_cast<EdgeIdx>(e));
        continue;
      }
    }
    // Stuck: repeat the node, leave the time bound untouched.
    w.nodes.push_back(cur);
    w.edge_indices.push_back(kStuck);
  }
  return w;
}

}  // namespace

Walk temporal_walk(const TemporalGraph& g, NodeId start, int hops, uint64_t seed) {
  return forward_walk(g, start, hops, seed, /*temporal=*/true);
}

Walk static_walk(const TemporalGraph& g, NodeId start, int hops, uint64_t seed) {
  return forward_walk(g, start, hops, seed, /*temporal=*/false);
}

Walk reverse_temporal_walk(const TemporalGraph& g_rev, NodeId terminal, int hops,
                           Timestamp t_max, uint64_t seed) {
  check_start(g_rev, terminal);
  if (hops < 0) throw std::runtime_error("walk hop count must be non-negative");
  Rng rng(seed);
  // Sample backward: admissible in-edges are those at time <= current bound.
  std::vector<NodeId> nodes{terminal};
  std::vector<EdgeIdx> edges;
  NodeId cur = terminal;
  Timestamp t = t_max;
  bool stuck = false;
  for (int i = 0; i < hops; ++i) {
    if (!stuck) {
      uint64_t lo = g_rev.row_begin(cur);
      // first edge with ts > t; everything before it is admissible
      uint64_t hi = lo;
      {
        const auto& ts = g_rev.ts();
        auto begin = ts.begin() + static_cast<int64_t>(lo);
        auto end = ts.begin() + static_cast<int64_t>(g_rev.row_end(cur));
        hi = static_cast<uint64_t>(std::upper_bound(begin, end, t) - ts.begin());
      }
      if (lo == hi) {
        stuck = true;
      } else {
        uint64_t e = lo + rng.next_below(hi - lo);
        cur = g_rev.col()[e];
        t = g_rev.ts()[e];
        nodes.push_back(cur);
        edges.push_back(static_cast<EdgeIdx>(e));
        continue;
      }
    }
    nodes.push_back(cur);
    edges.push_back(kStuck);
  }
  // Return in forward reading order: oldest node first, terminal last.
  Walk w;
  w.nodes.assign(nodes.rbegin(), nodes.rend());
  w.edge_indices.assign(edges.rbegin(), edges.rend());
  return w;
}

std::vector<Walk> sample_walk_batch(const TemporalGraph& g, const std::vector<NodeId>& starts,
                                    const WalkConfig& cfg, const std::vector<Timestamp>& t_max) {
  if (cfg.token_budget < 1) throw std::runtime_error("walk token budget must be positive");
  if (cfg.mode == WalkMode::temporal_reverse && !t_max.empty() && t_max.size() != starts.size())
    throw std::runtime_error("t_max list must match the start list length");

  // token_budget hops always suffice to fill the budget after tokenization:
  // even a fully stuck walk emits one token per hop plus the start node.
  int hops = cfg.token_budget;
  std::vector<Walk> out(starts.size());
  parallel_for(static_cast<int64_t>(starts.size()), default_worker_count(),
               [&](int64_t begin, int64_t end, int) {
                 for (int64_t i = begin; i < end; ++i) {
                   uint64_t seed = hash_stream(cfg.rng_seed,
                                               {starts[static_cast<size_t>(i)], cfg.batch_counter,
                                                static_cast<uint64_t>(i)});
                   switch (cfg.mode) {
                     case WalkMode::static_uniform:
                       out[static_cast<size_t>(i)] = static_walk(g, starts[static_cast<size_t>(i)], hops, seed);
                       break;
                     case WalkMode::temporal:
                       out[static_cast<size_t>(i)] = temporal_walk(g, starts[static_cast<size_t>(i)], hops, seed);
                       break;
                     case WalkMode::temporal_reverse: {
                       Timestamp bound = t_max.empty() ? std::numeric_limits<Timestamp>::infinity()
                                                       : t_max[static_cast<size_t>(i)];
                       out[static_cast<size_t>(i)] =
                           reverse_temporal_walk(g, starts[static_cast<size_t>(i)], hops, bound, seed);
                       break;
                     }
                   }
                 }
               });
  return out;
}

}  // namespace walklm
