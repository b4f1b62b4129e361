#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <string>
#include <vector>

#include "walklm/graph.hpp"
#include "walklm/rng.hpp"
#include "walklm/tokenizer.hpp"
#include "walklm/walk.hpp"

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

}  // namespace

TEST_CASE("categorical features pass through verbatim") {
  CHECK(feature_token(FeatureValue::from_categorical("UDP")) == "[ef:UDP]");
  CHECK(feature_token(FeatureValue::from_categorical("ntlm/v2")) == "[ef:ntlm/v2]");
}

TEST_CASE("counts up to 100 are exact, larger counts bucket by power of ten") {
  CHECK(feature_token(FeatureValue::from_count(0)) == "[ef:0]");
  CHECK(feature_token(FeatureValue::from_count(19)) == "[ef:19]");
  CHECK(feature_token(FeatureValue::from_count(100)) == "[ef:100]");
  CHECK(feature_token(FeatureValue::from_count(101)) == "[ef:10^3]");
  CHECK(feature_token(FeatureValue::from_count(999)) == "[ef:10^3]");
  CHECK(feature_token(FeatureValue::from_count(1000)) == "[ef:10^3]");  // 10^3 >= 1000
  CHECK(feature_token(FeatureValue::from_count(1001)) == "[ef:10^4]");
  CHECK(feature_token(FeatureValue::from_count(4242)) == "[ef:10^4]");
  CHECK(feature_token(FeatureValue::from_count(10000)) == "[ef:10^4]");
  CHECK(feature_token(FeatureValue::from_count(10001)) == "[ef:10^5]");
  // Exact powers of ten must not mis-bin through floating point log10.
  uint64_t p = 1000;
  for (int e = 3; e <= 19; ++e) {
    CHECK(feature_token(FeatureValue::from_count(p)) == "[ef:10^" + std::to_string(e) + "]");
    if (e < 19) p *= 10;
  }
  CHECK(feature_token(FeatureValue::from_count(UINT64_MAX)) == "[ef:10^20]");
}

TEST_CASE("ratios at or above one follow the count rule after integer cast") {
  CHECK(feature_token(FeatureValue::from_ratio(1.0)) == "[ef:1]");
  CHECK(feature_token(FeatureValue::from_ratio(2.0)) == "[ef:2]");
  CHECK(feature_token(FeatureValue::from_ratio(2.9)) == "[ef:2]");  // cast truncates
  CHECK(feature_token(FeatureValue::from_ratio(100.9)) == "[ef:100]");
  CHECK(feature_token(FeatureValue::from_ratio(150.7)) == "[ef:10^3]");
}

TEST_CASE("ratios below one truncate to two decimals") {
  CHECK(feature_token(FeatureValue::from_ratio(0.0)) == "[ef:0.00]");
  CHECK(feature_token(FeatureValue::from_ratio(0.5687)) == "[ef:0.56]");  // truncation, not rounding
  CHECK(feature_token(FeatureValue::from_ratio(0.1)) == "[ef:0.10]");
  CHECK(feature_token(FeatureValue::from_ratio(0.29)) == "[ef:0.29]");  // IEEE 0.29 is slightly below
  CHECK(feature_token(FeatureValue::from_ratio(0.07)) == "[ef:0.07]");
  CHECK(feature_token(FeatureValue::from_ratio(0.999999)) == "[ef:0.99]");
  // Every exact hundredth maps to its own label.
  for (int i = 0; i < 100; ++i) {
    char want[16];
    std::snprintf(want, sizeof(want), "[ef:0.%02d]", i);
    CHECK(feature_token(FeatureValue::from_ratio(i / 100.0)) == want);
  }
}

TEST_CASE("vocabulary layout: specials, node ids ascending, features lexicographic") {
  auto g = TemporalGraph::build(
      3, 1,
      {edge(0, 1, 1.0, {FeatureValue::from_categorical("zeta")}),
       edge(1, 2, 2.0, {FeatureValue::from_categorical("alpha")}),
       edge(2, 0, 3.0, {FeatureValue::from_count(7)})});
  Vocabulary v = Vocabulary::build(g);
  REQUIRE(v.size() == 3 + 3 + 3);
  CHECK(v.token_text(Vocabulary::kPad) == "[PAD]");
  CHECK(v.token_text(Vocabulary::kMask) == "[MASK]");
  CHECK(v.token_text(Vocabulary::kCls) == "[CLS]");
  CHECK(v.token_text(3) == "[nid:0]");
  CHECK(v.token_text(4) == "[nid:1]");
  CHECK(v.token_text(5) == "[nid:2]");
  CHECK(v.token_text(6) == "[ef:7]");      // '7' < 'a' < 'z' in byte order
  CHECK(v.token_text(7) == "[ef:alpha]");
  CHECK(v.token_text(8) == "[ef:zeta]");
  CHECK(v.node_token(2) == 5);
  CHECK(v.node_of(5) == 2);
  CHECK(v.is_node_token(3));
  CHECK(!v.is_node_token(6));
  CHECK(!v.is_node_token(Vocabulary::kCls));
}

TEST_CASE("unseen feature values fail at lookup instead of mapping to OOV") {
  auto g = TemporalGraph::build(2, 1, {edge(0, 1, 1.0, {FeatureValue::from_categorical("TCP")})});
  Vocabulary v = Vocabulary::build(g);
  CHECK_THROWS(v.feature_token_id("[ef:UDP]"));
  auto unseen = FeatureValue::from_categorical("UDP");
  CHECK_THROWS(tokenize_features(&unseen, 1, v));
}

TEST_CASE("vocabulary text round-trip preserves ids and hash") {
  auto g = TemporalGraph::build(
      4, 2,
      {edge(0, 1, 1.0, {FeatureValue::from_categorical("TCP"), FeatureValue::from_count(500)}),
       edge(2, 3, 2.0, {FeatureValue::from_categorical("UDP"), FeatureValue::from_ratio(0.25)})});
  Vocabulary v = Vocabulary::build(g);
  const std::string path = "/tmp/walklm_test_vocab.txt";
  v.save(path);
  Vocabulary w = Vocabulary::load(path);
  CHECK(w.size() == v.size());
  CHECK(w.num_nodes() == v.num_nodes());
  CHECK(w.hash() == v.hash());
  for (TokenId i = 0; i < v.size(); ++i) CHECK(w.token_text(i) == v.token_text(i));
  std::remove(path.c_str());
}

TEST_CASE("walks tokenize as node, then (features, node) units") {
  // 0 -[UDP]-> 1 -[TCP]-> 2, walked deterministically (single edges).
  auto g = TemporalGraph::build(
      3, 1,
      {edge(0, 1, 1.0, {FeatureValue::from_categorical("UDP")}),
       edge(1, 2, 2.0, {FeatureValue::from_categorical("TCP")})});
  Vocabulary v = Vocabulary::build(g);
  Walk w = temporal_walk(g, 0, 2, 0);
  REQUIRE(w.nodes == std::vector<NodeId>{0, 1, 2});

  auto toks = tokenize_walk(w, g, v, 64);
  std::vector<std::string> text;
  for (TokenId t : toks) text.push_back(v.token_text(t));
  CHECK(text == std::vector<std::string>{"[nid:0]", "[ef:UDP]", "[nid:1]", "[ef:TCP]", "[nid:2]"});

  // Stuck hops contribute only the repeated node token.
  Walk s = temporal_walk(g, 0, 4, 0);  // sticks at 2 after two hops
  auto stoks = tokenize_walk(s, g, v, 64);
  text.clear();
  for (TokenId t : stoks) text.push_back(v.token_text(t));
  CHECK(text == std::vector<std::string>{"[nid:0]", "[ef:UDP]", "[nid:1]", "[ef:TCP]", "[nid:2]",
                                         "[nid:2]", "[nid:2]"});
}

TEST_CASE("truncation never splits a (features, node) unit") {
  auto g = TemporalGraph::build(
      3, 2,
      {edge(0, 1, 1.0, {FeatureValue::from_categorical("a"), FeatureValue::from_categorical("b")}),
       edge(1, 2, 2.0, {FeatureValue::from_categorical("c"), FeatureValue::from_categorical("d")})});
  Vocabulary v = Vocabulary::build(g);
  Walk w = temporal_walk(g, 0, 2, 0);  // full sequence is 7 tokens: n f f n f f n
  for (int budget = 1; budget <= 7; ++budget) {
    auto toks = tokenize_walk(w, g, v, budget);
    REQUIRE(!toks.empty());
    CHECK(v.is_node_token(toks.back()));  // always ends on a node token
    // budget 1..3 -> just the start node; 4..6 -> one full hop; 7 -> both.
    size_t want = budget < 4 ? 1 : (budget < 7 ? 4 : 7);
    CHECK(toks.size() == want);
  }
}

TEST_CASE("edge token table assembly matches direct tokenization") {
  Rng rng(42);
  std::vector<EdgeRecord> edges;
  for (int i = 0; i < 300; ++i)
    edges.push_back(edge(static_cast<NodeId>(rng.next_below(12)),
                         static_cast<NodeId>(rng.next_below(12)), rng.next_real() * 50,
                         {FeatureValue::from_count(rng.next_below(2000)),
                          FeatureValue::from_ratio(rng.next_real())}));
  auto g = TemporalGraph::build(12, 2, edges);
  Vocabulary v = Vocabulary::build(g);
  EdgeTokenTable table(g, v);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Walk w = temporal_walk(g, static_cast<NodeId>(seed % 12), 8, seed);
    CHECK(assemble_walk_tokens(w, table, v, 20) == tokenize_walk(w, g, v, 20));
  }
}
