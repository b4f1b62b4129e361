#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "walklm/ingest.hpp"
#include "walklm/rng.hpp"

using namespace walklm;

namespace {

std::string write_tmp(const char* name, const std::string& text) {
  std::string path = std::string("/tmp/walklm_test_ingest_") + name;
  std::ofstream os(path);
  os << text;
  return path;
}

ColumnSchema basic_schema() {
  ColumnSchema s;
  s.src_column = "source";
  s.dst_column = "target";
  s.ts_column = "time";
  s.features = {{"proto", FeatureKind::categorical}, {"bytes", FeatureKind::count}};
  return s;
}

}  // namespace

TEST_CASE("csv rows become edges with interned entities in first-appearance order") {
  auto path = write_tmp("basic.csv",
                        "source,target,time,proto,bytes\n"
                        "hostB,hostA,5.0,TCP,100\n"
                        "hostA,hostC,1.5,UDP,9000\n"
                        "hostB,hostC,2.0,TCP,50\n");
  IngestResult r = parse_edge_csv(path, basic_schema());
  REQUIRE(r.edges.size() == 3);
  CHECK(r.entities == std::vector<std::string>{"hostB", "hostA", "hostC"});
  CHECK(r.edges[0].src == 0);
  CHECK(r.edges[0].dst == 1);
  CHECK(r.edges[0].ts == 5.0);
  CHECK(r.edges[0].feats[0] == FeatureValue::from_categorical("TCP"));
  CHECK(r.edges[0].feats[1] == FeatureValue::from_count(100));
  CHECK(r.edges[1].feats[1] == FeatureValue::from_count(9000));
  CHECK(r.rows_malformed == 0);
  CHECK(r.labels == std::vector<int>{0, 0, 0});
  std::remove(path.c_str());
}

TEST_CASE("quoted fields, embedded commas and doubled quotes parse correctly") {
  auto path = write_tmp("quotes.csv",
                        "source,target,time,proto,bytes\n"
                        "\"host,1\",h2,1.0,\"T\"\"C\",7\n");
  IngestResult r = parse_edge_csv(path, basic_schema());
  REQUIRE(r.edges.size() == 1);
  CHECK(r.entities[0] == "host,1");
  CHECK(r.edges[0].feats[0].cat == "T\"C");
  std::remove(path.c_str());
}

TEST_CASE("malformed rows are counted and sampled, not fatal") {
  auto path = write_tmp("malformed.csv",
                        "source,target,time,proto,bytes\n"
                        "h1,h2,1.0,TCP,10\n"
                        "h1,h2,notatime,TCP,10\n"
                        "h1,h2,2.0,TCP,-5\n"
                        "h1,h2,2.0,TCP\n"
                        "h1,h2,-3.0,TCP,10\n"
                        "h3,h4,4.0,UDP,1\n");
  IngestResult r = parse_edge_csv(path, basic_schema());
  CHECK(r.edges.size() == 2);
  CHECK(r.rows_malformed == 4);
  REQUIRE(!r.malformed_samples.empty());
  // Header counts as row 1, so the first bad data line is row 3.
  CHECK(r.malformed_samples[0].find("row 3") != std::string::npos);
  // Entities from rejected rows are not interned: only h1,h2,h3,h4 appear.
  CHECK(r.entities.size() == 4);
  std::remove(path.c_str());
}

TEST_CASE("filters drop rows before anything else sees them") {
  ColumnSchema s = basic_schema();
  s.filters = {{"proto", "TCP"}};
  auto path = write_tmp("filters.csv",
                        "source,target,time,proto,bytes\n"
                        "h1,h2,1.0,TCP,10\n"
                        "h3,h4,2.0,UDP,20\n"
                        "h1,h5,3.0,TCP,30\n");
  IngestResult r = parse_edge_csv(path, s);
  CHECK(r.edges.size() == 2);
  CHECK(r.rows_filtered == 1);
  CHECK(r.entities == std::vector<std::string>{"h1", "h2", "h5"});  // h3,h4 never interned
  std::remove(path.c_str());
}

TEST_CASE("label column marks anomalies by value set") {
  ColumnSchema s = basic_schema();
  s.label_column = "evil";
  s.anomalous_values = {"1", "redteam"};
  auto path = write_tmp("labels.csv",
                        "source,target,time,proto,bytes,evil\n"
                        "h1,h2,1.0,TCP,10,0\n"
                        "h1,h2,2.0,TCP,10,1\n"
                        "h1,h2,3.0,TCP,10,redteam\n"
                        "h1,h2,4.0,TCP,10,benign\n");
  IngestResult r = parse_edge_csv(path, s);
  CHECK(r.labels == std::vector<int>{0, 1, 1, 0});
  std::remove(path.c_str());
}

TEST_CASE("a missing schema column is fatal") {
  auto path = write_tmp("missing.csv", "source,target,time,proto\nh1,h2,1.0,TCP\n");
  CHECK_THROWS(parse_edge_csv(path, basic_schema()));  // bytes column absent
  std::remove(path.c_str());
}

TEST_CASE("schema json round-trips and rejects unknown keys") {
  ColumnSchema s = basic_schema();
  s.filters = {{"auth", "kerberos"}};
  s.label_column = "label";
  s.anomalous_values = {"1"};
  ColumnSchema t = ColumnSchema::from_json_text(s.to_json());
  CHECK(t.src_column == s.src_column);
  CHECK(t.features.size() == 2);
  CHECK(t.features[1].kind == FeatureKind::count);
  CHECK(t.filters.size() == 1);
  CHECK(t.anomalous_values == s.anomalous_values);

  CHECK_THROWS(ColumnSchema::from_json_text(R"({"src_column":"a","dst_column":"b","ts_column":"c","typo":1})"));
  CHECK_THROWS(ColumnSchema::from_json_text(
      R"({"src_column":"a","dst_column":"b","ts_column":"c","features":[{"column":"x","kind":"exotic"}]})"));
}

TEST_CASE("compromise events label edges on the same day at or after the event") {
  ColumnSchema s = basic_schema();
  auto path = write_tmp("comp.csv",
                        "source,target,time,proto,bytes\n"
                        "h1,h2,86500.0,TCP,1\n"    // day 1, after event
                        "h1,h2,86300.0,TCP,1\n"    // day 0, before day boundary
                        "h1,h2,90000.0,TCP,1\n"    // day 1, after event
                        "h2,h1,99999.0,TCP,1\n"    // different source
                        "h1,h2,172900.0,TCP,1\n"); // day 2, event day passed
  IngestResult r = parse_edge_csv(path, s);
  auto events_path = write_tmp("events.csv", "host,time\nh1,86450.0\n");
  apply_compromise_labels(r, read_compromise_csv(events_path));
  CHECK(r.labels == std::vector<int>{1, 0, 1, 0, 0});

  auto bad_events = write_tmp("bad_events.csv", "host,time\nunknown_host,5.0\n");
  CHECK_THROWS(apply_compromise_labels(r, read_compromise_csv(bad_events)));
  std::remove(path.c_str());
  std::remove(events_path.c_str());
  std::remove(bad_events.c_str());
}

TEST_CASE("benign split is an exact partition with anomalous edges forced into test") {
  Rng rng(6);
  std::vector<int> labels(500);
  for (auto& l : labels) l = rng.next_below(10) == 0;
  SplitSpec spec;
  spec.train_frac = 0.8;
  spec.val_frac = 0.1;
  spec.test_frac = 0.1;
  spec.seed = 99;
  SplitResult s = split_benign(labels, spec);

  size_t benign = 0;
  for (int l : labels) benign += l == 0;
  CHECK(s.val.size() == benign / 10);
  CHECK(s.test_benign.size() == benign / 10);
  CHECK(s.train.size() == benign - s.val.size() - s.test_benign.size());
  CHECK(s.test_anomalous.size() == labels.size() - benign);

  std::set<uint64_t> seen;
  for (const auto* part : {&s.train, &s.val, &s.test_benign, &s.test_anomalous}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    for (uint64_t e : *part) {
      CHECK(seen.insert(e).second);  // no edge in two splits
      if (part == &s.test_anomalous)
        CHECK(labels[e] == 1);
      else
        CHECK(labels[e] == 0);
    }
  }
  CHECK(seen.size() == labels.size());

  // Same seed reproduces the split; another seed moves edges around.
  SplitResult again = split_benign(labels, spec);
  CHECK(again.train == s.train);
  spec.seed = 100;
  CHECK(split_benign(labels, spec).train != s.train);
}

TEST_CASE("split fraction and size validation") {
  std::vector<int> labels(20, 0);
  SplitSpec spec;
  spec.train_frac = 0.5;
  spec.val_frac = 0.2;
  spec.test_frac = 0.2;  // sums to 0.9
  CHECK_THROWS(split_benign(labels, spec));
  spec.test_frac = 0.3;
  CHECK_NOTHROW(split_benign(labels, spec));
  std::vector<int> few(5, 0);
  CHECK_THROWS(split_benign(few, spec));  // fewer than 10 benign edges
}

TEST_CASE("split manifest round-trips and validates the partition") {
  std::vector<int> labels(200);
  Rng rng(3);
  for (auto& l : labels) l = rng.next_below(8) == 0;
  SplitSpec spec;
  spec.seed = 17;
  SplitResult s = split_benign(labels, spec);
  auto path = write_tmp("manifest.txt", "");
  save_split_manifest(path, s);
  SplitResult t = load_split_manifest(path);
  CHECK(t.train == s.train);
  CHECK(t.val == s.val);
  CHECK(t.test_benign == s.test_benign);
  CHECK(t.test_anomalous == s.test_anomalous);
  CHECK(t.seed == s.seed);
  CHECK(t.num_edges == s.num_edges);

  // Removing one edge from a section breaks the exact-partition invariant.
  std::ifstream is(path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  size_t at = text.find("num_edges 200");
  REQUIRE(at != std::string::npos);
  text.replace(at, 13, "num_edges 201");
  std::ofstream os(path);
  os << text;
  os.close();
  CHECK_THROWS(load_split_manifest(path));
  std::remove(path.c_str());
}

TEST_CASE("synthetic traffic respects blocks, horizons and label structure") {
  SyntheticSpec spec;
  spec.num_nodes = 100;
  spec.num_blocks = 4;
  spec.edges_per_node = 30;
  spec.intra_block_p = 0.9;
  spec.horizon = 5000.0;
  spec.num_anomalies = 50;
  spec.feature_kinds = {"categorical", "count"};
  spec.seed = 12;
  SyntheticData d = generate_synthetic(spec);

  REQUIRE(d.edges.size() == 100 * 30 + 50);
  REQUIRE(d.labels.size() == d.edges.size());
  CHECK(d.num_nodes == 100);
  CHECK(d.arity == 2);

  int64_t intra = 0, benign = 0;
  for (size_t i = 0; i < d.edges.size(); ++i) {
    const EdgeRecord& e = d.edges[i];
    CHECK(e.src != e.dst);
    CHECK(e.ts >= 0.0);
    CHECK(e.ts < spec.horizon);
    uint32_t bs = synthetic_block_of(e.src, 100, 4);
    uint32_t bd = synthetic_block_of(e.dst, 100, 4);
    if (d.labels[i]) {
      CHECK(bs != bd);                   // anomalies always cross blocks
      CHECK(e.ts >= 0.9 * spec.horizon); // and land late in the horizon
    } else {
      ++benign;
      intra += bs == bd;
    }
  }
  CHECK(static_cast<double>(intra) / static_cast<double>(benign) ==
        doctest::Approx(0.9).epsilon(0.02));

  // Deterministic in the seed.
  SyntheticData d2 = generate_synthetic(spec);
  CHECK(d2.edges.size() == d.edges.size());
  CHECK(d2.edges[7].src == d.edges[7].src);
  CHECK(d2.edges[7].ts == d.edges[7].ts);
}

TEST_CASE("block index is the contiguous equal partition") {
  CHECK(synthetic_block_of(0, 200, 2) == 0);
  CHECK(synthetic_block_of(99, 200, 2) == 0);
  CHECK(synthetic_block_of(100, 200, 2) == 1);
  CHECK(synthetic_block_of(199, 200, 2) == 1);
}

TEST_CASE("synthetic csv and schema feed straight back into the parser") {
  SyntheticSpec spec;
  spec.num_nodes = 40;
  spec.num_blocks = 2;
  spec.edges_per_node = 10;
  spec.num_anomalies = 20;
  spec.feature_kinds = {"categorical"};
  spec.seed = 5;
  SyntheticData d = generate_synthetic(spec);
  auto path = write_tmp("synth.csv", "");
  write_edges_csv(path, d);
  IngestResult r = parse_edge_csv(path, synthetic_schema(spec));
  REQUIRE(r.edges.size() == d.edges.size());
  CHECK(r.rows_malformed == 0);
  int anomalies = 0;
  for (int l : r.labels) anomalies += l;
  CHECK(anomalies == 20);
  // Timestamps survive the text round-trip exactly (%.17g).
  for (size_t i = 0; i < d.edges.size(); ++i) CHECK(r.edges[i].ts == d.edges[i].ts);
  std::remove(path.c_str());
}

TEST_CASE("entities file round-trips") {
  std::vector<std::string> names = {"alpha", "beta", "gamma"};
  auto path = write_tmp("entities.txt", "");
  save_entities(path, names);
  CHECK(load_entities(path) == names);
  std::remove(path.c_str());
}

TEST_CASE("synthetic spec json rejects unknown keys") {
  CHECK_THROWS(SyntheticSpec::from_json_text(R"({"nodes": 10})"));
  SyntheticSpec s = SyntheticSpec::from_json_text(R"({"num_nodes": 64, "num_blocks": 4})");
  CHECK(s.num_nodes == 64);
  CHECK(s.num_blocks == 4);
  CHECK(s.intra_block_p == 0.95);  // defaults fill the rest
}
