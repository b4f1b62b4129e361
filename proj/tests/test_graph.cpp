#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

#include "walklm/graph.hpp"
#include "walklm/rng.hpp"

using namespace walklm;

namespace {

EdgeRecord edge(NodeId s, NodeId d, Timestamp t, std::vector<FeatureValue> f = {}) {
  EdgeRecord e;
  e.src = s;
  e.dst = d;
  e.ts = t;
  e.feats = std::move(f);
  return e;
}

std::vector<EdgeRecord> random_edges(uint32_t n, size_t count, uint64_t seed) {
  Rng rng(seed);
  std::vector<EdgeRecord> edges;
  for (size_t i = 0; i < count; ++i) {
    // Coarse timestamps so ties happen often and tie order gets exercised.
    edges.push_back(edge(static_cast<NodeId>(rng.next_below(n)),
                         static_cast<NodeId>(rng.next_below(n)),
                         static_cast<Timestamp>(rng.next_below(8)),
                         {FeatureValue::from_count(i)}));
  }
  return edges;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/walklm_test_graph_") + name;
}

}  // namespace

TEST_CASE("rows are time-sorted with input order preserved on ties") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto edges = random_edges(12, 300, seed);
    std::vector<uint64_t> perm;
    TemporalGraph g = TemporalGraph::build(12, 1, edges, &perm);

    REQUIRE(g.num_edges() == edges.size());
    REQUIRE(perm.size() == edges.size());
    // perm is a permutation
    auto sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      for (uint64_t e = g.row_begin(u); e < g.row_end(u); ++e) {
        const EdgeRecord& in = edges[perm[e]];
        CHECK(in.src == u);
        CHECK(in.dst == g.col()[e]);
        CHECK(in.ts == g.ts()[e]);
        CHECK(*g.edge_feats(e) == in.feats[0]);
        if (e + 1 < g.row_end(u)) {
          CHECK(g.ts()[e] <= g.ts()[e + 1]);
          if (g.ts()[e] == g.ts()[e + 1]) CHECK(perm[e] < perm[e + 1]);  // stable ties
        }
      }
    }
  }
}

TEST_CASE("edge_src inverts the CSR layout for every edge") {
  auto edges = random_edges(30, 500, 7);
  TemporalGraph g = TemporalGraph::build(30, 1, edges);
  for (uint64_t e = 0; e < g.num_edges(); ++e) {
    NodeId u = g.edge_src(e);
    CHECK(g.row_begin(u) <= e);
    CHECK(e < g.row_end(u));
  }
}

TEST_CASE("first_at_or_after matches a linear scan") {
  auto edges = random_edges(10, 400, 3);
  TemporalGraph g = TemporalGraph::build(10, 1, edges);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    for (Timestamp t = -1.0; t < 9.0; t += 0.5) {
      uint64_t expect = g.row_end(u);
      for (uint64_t e = g.row_begin(u); e < g.row_end(u); ++e)
        if (g.ts()[e] >= t) {
          expect = e;
          break;
        }
      CHECK(g.first_at_or_after(u, t) == expect);
    }
  }
}

TEST_CASE("transpose swaps endpoints and keeps features and tie order") {
  auto edges = random_edges(15, 400, 11);
  TemporalGraph g = TemporalGraph::build(15, 1, edges);
  TemporalGraph r = g.transpose();

  REQUIRE(r.num_edges() == g.num_edges());
  // Multiset equality of (src, dst, ts, feat) with endpoints swapped.
  auto key = [](const TemporalGraph& gg, uint64_t e, bool swap) {
    NodeId s = gg.edge_src(e), d = gg.col()[e];
    if (swap) std::swap(s, d);
    return std::tuple<NodeId, NodeId, Timestamp, uint64_t>(s, d, gg.ts()[e],
                                                           gg.edge_feats(e)->count);
  };
  std::vector<std::tuple<NodeId, NodeId, Timestamp, uint64_t>> a, b;
  for (uint64_t e = 0; e < g.num_edges(); ++e) a.push_back(key(g, e, false));
  for (uint64_t e = 0; e < r.num_edges(); ++e) b.push_back(key(r, e, true));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  // Rows of the transpose are themselves time-sorted.
  for (NodeId u = 0; u < r.num_nodes(); ++u)
    for (uint64_t e = r.row_begin(u); e + 1 < r.row_end(u); ++e)
      CHECK(r.ts()[e] <= r.ts()[e + 1]);

  // Transposing twice restores the original graph up to the order of
  // equal-time edges toward *different* destinations within a row (both
  // orders are valid time-sorted layouts). Row pointers, per-row edge
  // multisets, and the per-(src, dst) edge order must all survive.
  TemporalGraph t2 = r.transpose();
  REQUIRE(t2.num_edges() == g.num_edges());
  CHECK(t2.idxptr() == g.idxptr());
  std::vector<std::tuple<NodeId, NodeId, Timestamp, uint64_t>> c, d;
  for (uint64_t e = 0; e < g.num_edges(); ++e) c.push_back(key(g, e, false));
  for (uint64_t e = 0; e < t2.num_edges(); ++e) d.push_back(key(t2, e, false));
  std::sort(c.begin(), c.end());
  std::sort(d.begin(), d.end());
  CHECK(c == d);
  std::map<std::pair<NodeId, NodeId>, std::vector<std::pair<Timestamp, uint64_t>>> seq_g, seq_t2;
  for (uint64_t e = 0; e < g.num_edges(); ++e)
    seq_g[{g.edge_src(e), g.col()[e]}].emplace_back(g.ts()[e], g.edge_feats(e)->count);
  for (uint64_t e = 0; e < t2.num_edges(); ++e)
    seq_t2[{t2.edge_src(e), t2.col()[e]}].emplace_back(t2.ts()[e], t2.edge_feats(e)->count);
  CHECK(seq_g == seq_t2);
}

TEST_CASE("binary save/load round-trips exactly") {
  auto edges = random_edges(9, 200, 17);
  for (auto& e : edges)
    e.feats = {FeatureValue::from_count(e.feats[0].count), FeatureValue::from_categorical("TCP"),
               FeatureValue::from_ratio(0.25)};
  TemporalGraph g = TemporalGraph::build(9, 3, edges);
  const std::string path = temp_path("roundtrip.bin");
  g.save(path);
  TemporalGraph h = TemporalGraph::load(path);
  CHECK(g == h);
  std::remove(path.c_str());
}

TEST_CASE("load rejects a corrupted header") {
  auto edges = random_edges(5, 50, 1);
  TemporalGraph g = TemporalGraph::build(5, 1, edges);
  const std::string path = temp_path("corrupt.bin");
  g.save(path);
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('X', f);
    std::fclose(f);
  }
  CHECK_THROWS(TemporalGraph::load(path));
  std::remove(path.c_str());
}

TEST_CASE("build validates ids, timestamps and arity") {
  CHECK_THROWS(TemporalGraph::build(3, 0, {edge(0, 3, 1.0)}));   // dst out of range
  CHECK_THROWS(TemporalGraph::build(3, 0, {edge(3, 0, 1.0)}));   // src out of range
  CHECK_THROWS(TemporalGraph::build(3, 0, {edge(0, 1, -1.0)}));  // negative ts
  CHECK_THROWS(TemporalGraph::build(3, 0, {edge(0, 1, std::nan(""))}));
  CHECK_THROWS(TemporalGraph::build(3, 1, {edge(0, 1, 1.0)}));  // missing feature
  CHECK_NOTHROW(TemporalGraph::build(3, 0, {edge(0, 1, 0.0)}));
}

TEST_CASE("duplicate (src, dst, ts) rows are all kept") {
  std::vector<EdgeRecord> edges(4, edge(0, 1, 5.0));
  TemporalGraph g = TemporalGraph::build(2, 0, edges);
  CHECK(g.num_edges() == 4);
  CHECK(g.out_degree(0) == 4);
}

TEST_CASE("feature values validate on construction") {
  CHECK_THROWS(FeatureValue::from_ratio(-0.5));
  CHECK_THROWS(FeatureValue::from_ratio(std::numeric_limits<double>::infinity()));
  CHECK(FeatureValue::from_count(7).count == 7);
  CHECK(FeatureValue::from_categorical("UDP").cat == "UDP");
}
