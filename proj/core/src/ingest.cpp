#include "walklm/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "walklm/rng.hpp"

namespace walklm {

using nlohmann::json;

namespace {

// Minimal CSV field splitter: handles quoted fields with embedded commas and
// doubled quotes. Multi-line quoted fields are not supported (event logs
// don't produce them).
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

bool parse_count(const std::string& s, uint64_t& out) {
  if (s.empty() || s[0] == '-') return false;
  char* end = nullptr;
  out = std::strtoull(s.c_str(), &end, 10);
  return end == s.c_str() + s.size();
}

FeatureKind kind_from_string(const std::string& s) {
  if (s == "categorical") return FeatureKind::categorical;
  if (s == "count") return FeatureKind::count;
  if (s == "ratio") return FeatureKind::ratio;
  throw std::runtime_error("unknown feature kind '" + s + "' (expected categorical, count or ratio)");
}

std::string kind_to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::count: return "count";
    case FeatureKind::ratio: return "ratio";
  }
  return "?";
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw std::runtime_error("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// schema

std::string ColumnSchema::to_json() const {
  json j;
  j["src_column"] = src_column;
  j["dst_column"] = dst_column;
  j["ts_column"] = ts_column;
  j["features"] = json::array();
  for (const auto& f : features)
    j["features"].push_back({{"column", f.column}, {"kind", kind_to_string(f.kind)}});
  j["filters"] = json::array();
  for (const auto& f : filters)
    j["filters"].push_back({{"column", f.column}, {"equals", f.equals}});
  j["label_column"] = label_column;
  j["anomalous_values"] = anomalous_values;
  return j.dump(2) + "\n";
}

ColumnSchema ColumnSchema::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("schema is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"src_column", "dst_column", "ts_column", "features", "filters",
                       "label_column", "anomalous_values"},
                      "schema");
  ColumnSchema s;
  s.src_column = j.at("src_column").get<std::string>();
  s.dst_column = j.at("dst_column").get<std::string>();
  s.ts_column = j.at("ts_column").get<std::string>();
  for (const auto& f : j.value("features", json::array())) {
    reject_unknown_keys(f, {"column", "kind"}, "schema feature entry");
    s.features.push_back({f.at("column").get<std::string>(),
                          kind_from_string(f.at("kind").get<std::string>())});
  }
  for (const auto& f : j.value("filters", json::array())) {
    reject_unknown_keys(f, {"column", "equals"}, "schema filter entry");
    s.filters.push_back({f.at("column").get<std::string>(), f.at("equals").get<std::string>()});
  }
  s.label_column = j.value("label_column", std::string());
  s.anomalous_values = j.value("anomalous_values", std::vector<std::string>());
  return s;
}

ColumnSchema ColumnSchema::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open schema file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

void ColumnSchema::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << to_json();
}

// ---------------------------------------------------------------------------
// CSV ingestion

IngestResult parse_edge_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open data file '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("'" + path + "' is empty (no header row)");
  std::vector<std::string> header = split_csv_line(line);
  std::unordered_map<std::string, size_t> col_of;
  for (size_t i = 0; i < header.size(); ++i) col_of[header[i]] = i;

  auto require_col = [&](const std::string& name) -> size_t {
    auto it = col_of.find(name);
    if (it == col_of.end())
      throw std::runtime_error("data file '" + path + "' has no column '" + name + "'");
    return it->second;
  };

  size_t src_i = require_col(schema.src_column);
  size_t dst_i = require_col(schema.dst_column);
  size_t ts_i = require_col(schema.ts_column);
  std::vector<size_t> feat_i;
  for (const auto& f : schema.features) feat_i.push_back(require_col(f.column));
  std::vector<size_t> filt_i;
  for (const auto& f : schema.filters) filt_i.push_back(require_col(f.column));
  bool labeled = !schema.label_column.empty();
  size_t label_i = labeled ? require_col(schema.label_column) : 0;

  IngestResult out;
  std::unordered_map<std::string, NodeId> entity_id;
  uint64_t row_no = 1;
  auto malformed = [&out, &row_no](const std::string& why) {
    out.rows_malformed++;
    if (out.malformed_samples.size() < 5)
      out.malformed_samples.push_back("row " + std::to_string(row_no) + ": " + why);
  };

  while (std::getline(is, line)) {
    ++row_no;
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size()) {
      malformed("expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(f.size()));
      continue;
    }
    bool keep = true;
    for (size_t k = 0; k < filt_i.size(); ++k)
      if (f[filt_i[k]] != schema.filters[k].equals) {
        keep = false;
        break;
      }
    if (!keep) {
      out.rows_filtered++;
      continue;
    }

    double ts;
    if (!parse_double(f[ts_i], ts) || !std::isfinite(ts) || ts < 0.0) {
      malformed("bad timestamp '" + f[ts_i] + "'");
      continue;
    }
    std::vector<FeatureValue> feats;
    feats.reserve(schema.features.size());
    bool ok = true;
    for (size_t k = 0; k < feat_i.size(); ++k) {
      const std::string& raw = f[feat_i[k]];
      switch (schema.features[k].kind) {
        case FeatureKind::categorical:
          feats.push_back(FeatureValue::from_categorical(raw));
          break;
        case FeatureKind::count: {
          uint64_t n;
          if (!parse_count(raw, n)) {
            malformed("bad count '" + raw + "' in column " + schema.features[k].column);
            ok = false;
          } else {
            feats.push_back(FeatureValue::from_count(n));
          }
          break;
        }
        case FeatureKind::ratio: {
          double r;
          if (!parse_double(raw, r) || !std::isfinite(r) || r < 0.0) {
            malformed("bad ratio '" + raw + "' in column " + schema.features[k].column);
            ok = false;
          } else {
            feats.push_back(FeatureValue::from_ratio(r));
          }
          break;
        }
      }
      if (!ok) break;
    }
    if (!ok) continue;

    // Dense ids in first-appearance order, assigned only for accepted rows.
    auto intern = [&](const std::string& name) -> NodeId {
      auto it = entity_id.find(name);
      if (it != entity_id.end()) return it->second;
      NodeId id = static_cast<NodeId>(out.entities.size());
      entity_id.emplace(name, id);
      out.entities.push_back(name);
      return id;
    };
    EdgeRecord e;
    e.src = intern(f[src_i]);
    e.dst = intern(f[dst_i]);
    e.ts = ts;
    e.feats = std::move(feats);
    out.edges.push_back(std::move(e));
    int label = 0;
    if (labeled) {
      const std::string& lv = f[label_i];
      label = std::find(schema.anomalous_values.begin(), schema.anomalous_values.end(), lv) !=
                      schema.anomalous_values.end()
                  ? 1
                  : 0;
    }
    out.labels.push_back(label);
  }
  if (out.edges.empty())
    throw std::runtime_error("'" + path + "' produced no edges (all rows filtered or malformed)");
  return out;
}

// ---------------------------------------------------------------------------
// compromise labeling

std::vector<CompromiseEvent> read_compromise_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open compromise file '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("compromise file is empty");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "host" || header[1] != "time")
    throw std::runtime_error("compromise file must have header 'host,time'");
  std::vector<CompromiseEvent> events;
  uint64_t row_no = 1;
  while (std::getline(is, line)) {
    ++row_no;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    double t;
    if (f.size() != 2 || !parse_double(f[1], t) || !std::isfinite(t) || t < 0.0)
      throw std::runtime_error("bad compromise row " + std::to_string(row_no));
    events.push_back({f[0], t});
  }
  return events;
}

void apply_compromise_labels(IngestResult& data, const std::vector<CompromiseEvent>& events) {
  std::unordered_map<std::string, NodeId> entity_id;
  for (size_t i = 0; i < data.entities.size(); ++i)
    entity_id[data.entities[i]] = static_cast<NodeId>(i);

  std::unordered_map<NodeId, std::vector<double>> times;
  for (const auto& ev : events) {
    auto it = entity_id.find(ev.host);
    if (it == entity_id.end())
      throw std::runtime_error("compromise event references unknown host '" + ev.host + "'");
    times[it->second].push_back(ev.time);
  }

  auto day_of = [](double t) { return std::floor(t / 86400.0); };
  for (size_t i = 0; i < data.edges.size(); ++i) {
    auto it = times.find(data.edges[i].src);
    if (it == times.end()) continue;
    for (double t0 : it->second) {
      if (data.edges[i].ts >= t0 && day_of(data.edges[i].ts) == day_of(t0)) {
        data.labels[i] = 1;
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// splits

SplitResult split_benign(const std::vector<int>& labels, const SplitSpec& spec) {
  if (spec.train_frac < 0 || spec.val_frac < 0 || spec.test_frac < 0 ||
      std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9)
    throw std::runtime_error("split fractions must be non-negative and sum to 1");

  SplitResult out;
  out.seed = spec.seed;
  out.num_edges = labels.size();
  std::vector<uint64_t> benign;
  for (size_t i = 0; i < labels.size(); ++i)
    (labels[i] ? out.test_anomalous : benign).push_back(i);
  if (benign.size() < 10)
    throw std::runtime_error("need at least 10 benign edges to split, got " +
                             std::to_string(benign.size()));

  Rng rng(hash_stream(spec.seed, {0x5711ULL}));
  rng.shuffle(benign);
  size_t n = benign.size();
  size_t n_val = static_cast<size_t>(std::floor(spec.val_frac * static_cast<double>(n)));
  size_t n_test = static_cast<size_t>(std::floor(spec.test_frac * static_cast<double>(n)));
  size_t n_train = n - n_val - n_test;  // train takes the remainder

  out.train.assign(benign.begin(), benign.begin() + static_cast<int64_t>(n_train));
  out.val.assign(benign.begin() + static_cast<int64_t>(n_train),
                 benign.begin() + static_cast<int64_t>(n_train + n_val));
  out.test_benign.assign(benign.begin() + static_cast<int64_t>(n_train + n_val), benign.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test_benign.begin(), out.test_benign.end());
  return out;
}

namespace {

std::string format_ranges(const std::vector<uint64_t>& sorted) {
  std::string s;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[j] + 1) ++j;
    if (!s.empty()) s += ',';
    s += std::to_string(sorted[i]);
    if (j > i) s += '-' + std::to_string(sorted[j]);
    i = j + 1;
  }
  return s;
}

std::vector<uint64_t> parse_ranges(const std::string& s, uint64_t num_edges,
                                   const std::string& section) {
  std::vector<uint64_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    size_t dash = part.find('-');
    uint64_t a, b;
    try {
      if (dash == std::string::npos) {
        a = b = std::stoull(part);
      } else {
        a = std::stoull(part.substr(0, dash));
        b = std::stoull(part.substr(dash + 1));
      }
    } catch (const std::exception&) {
      throw std::runtime_error("malformed range '" + part + "' in split section " + section);
    }
    if (a > b || b >= num_edges)
      throw std::runtime_error("range '" + part + "' out of bounds in split section " + section);
    for (uint64_t x = a; x <= b; ++x) out.push_back(x);
  }
  return out;
}

}  // namespace

void save_split_manifest(const std::string& path, const SplitResult& s) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "# edge split manifest v1\n";
  os << "seed " << s.seed << "\n";
  os << "num_edges " << s.num_edges << "\n";
  os << "train " << format_ranges(s.train) << "\n";
  os << "val " << format_ranges(s.val) << "\n";
  os << "test_benign " << format_ranges(s.test_benign) << "\n";
  os << "test_anomalous " << format_ranges(s.test_anomalous) << "\n";
  if (!os) throw std::runtime_error("write failure on '" + path + "'");
}

SplitResult load_split_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open split manifest '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line != "# edge split manifest v1")
    throw std::runtime_error("'" + path + "' is not a split manifest");
  SplitResult s;
  bool have_seed = false, have_n = false, have_train = false, have_val = false, have_tb = false,
       have_ta = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string key, rest;
    ss >> key;
    std::getline(ss, rest);
    if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
    if (key == "seed") {
      s.seed = std::stoull(rest);
      have_seed = true;
    } else if (key == "num_edges") {
      s.num_edges = std::stoull(rest);
      have_n = true;
    } else if (key == "train") {
      s.train = parse_ranges(rest, s.num_edges, key);
      have_train = true;
    } else if (key == "val") {
      s.val = parse_ranges(rest, s.num_edges, key);
      have_val = true;
    } else if (key == "test_benign") {
      s.test_benign = parse_ranges(rest, s.num_edges, key);
      have_tb = true;
    } else if (key == "test_anomalous") {
      s.test_anomalous = parse_ranges(rest, s.num_edges, key);
      have_ta = true;
    } else {
      throw std::runtime_error("unknown split manifest key '" + key + "'");
    }
  }
  if (!(have_seed && have_n && have_train && have_val && have_tb && have_ta))
    throw std::runtime_error("split manifest '" + path + "' is missing sections");
  // The four sections must partition the edge set exactly.
  std::vector<char> seen(s.num_edges, 0);
  uint64_t total = 0;
  for (const auto* part : {&s.train, &s.val, &s.test_benign, &s.test_anomalous})
    for (uint64_t e : *part) {
      if (seen[e]) throw std::runtime_error("split manifest assigns edge " + std::to_string(e) + " twice");
      seen[e] = 1;
      ++total;
    }
  if (total != s.num_edges)
    throw std::runtime_error("split manifest covers " + std::to_string(total) + " of " +
                             std::to_string(s.num_edges) + " edges");
  return s;
}

// ---------------------------------------------------------------------------
// synthetic generator

std::string SyntheticSpec::to_json() const {
  json j;
  j["num_nodes"] = num_nodes;
  j["num_blocks"] = num_blocks;
  j["edges_per_node"] = edges_per_node;
  j["intra_block_p"] = intra_block_p;
  j["horizon"] = horizon;
  j["num_anomalies"] = num_anomalies;
  j["feature_kinds"] = feature_kinds;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

SyntheticSpec SyntheticSpec::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"num_nodes", "num_blocks", "edges_per_node", "intra_block_p", "horizon",
                       "num_anomalies", "feature_kinds", "seed"},
                      "synthetic spec");
  SyntheticSpec s;
  s.num_nodes = j.value("num_nodes", s.num_nodes);
  s.num_blocks = j.value("num_blocks", s.num_blocks);
  s.edges_per_node = j.value("edges_per_node", s.edges_per_node);
  s.intra_block_p = j.value("intra_block_p", s.intra_block_p);
  s.horizon = j.value("horizon", s.horizon);
  s.num_anomalies = j.value("num_anomalies", s.num_anomalies);
  s.feature_kinds = j.value("feature_kinds", s.feature_kinds);
  s.seed = j.value("seed", s.seed);
  return s;
}

SyntheticSpec SyntheticSpec::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open synthetic spec '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

uint32_t synthetic_block_of(uint32_t node, uint32_t num_nodes, uint32_t num_blocks) {
  return static_cast<uint32_t>((static_cast<uint64_t>(node) * num_blocks) / num_nodes);
}

namespace {

FeatureValue draw_feature(const std::string& kind, uint32_t block, uint32_t num_blocks, Rng& rng) {
  if (kind == "categorical") {
    // Two preferred labels per block, 10% uniform leakage so every label
    // occurs in every block and the vocabulary is covered by any large split.
    uint32_t value;
    double r = rng.next_real();
    if (r < 0.45) {
      value = 2 * block;
    } else if (r < 0.90) {
      value = 2 * block + 1;
    } else {
      value = static_cast<uint32_t>(rng.next_below(2 * num_blocks));
    }
    return FeatureValue::from_categorical("c" + std::to_string(value));
  }
  if (kind == "count") {
    // Block-banded small integers with the same 10% leakage.
    uint64_t v = rng.next_real() < 0.9 ? block * 3 + rng.next_below(3)
                                       : rng.next_below(3ULL * num_blocks);
    return FeatureValue::from_count(v);
  }
  throw std::runtime_error("synthetic feature kind must be 'categorical' or 'count', got '" +
                           kind + "'");
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_blocks < 1 || spec.num_nodes < 2 * spec.num_blocks)
    throw std::runtime_error("synthetic spec needs at least two nodes per block");
  if (spec.num_anomalies > 0 && spec.num_blocks < 2)
    throw std::runtime_error("cross-block anomalies need at least two blocks");
  if (spec.intra_block_p < 0.0 || spec.intra_block_p > 1.0)
    throw std::runtime_error("intra_block_p must be in [0, 1]");
  if (!(spec.horizon > 0.0)) throw std::runtime_error("horizon must be positive");

  const uint32_t n = spec.num_nodes, nb = spec.num_blocks;
  std::vector<uint32_t> block_lo(nb + 1);
  for (uint32_t b = 0; b <= nb; ++b)
    block_lo[b] = static_cast<uint32_t>((static_cast<uint64_t>(b) * n + nb - 1) / nb);
  block_lo[0] = 0;
  block_lo[nb] = n;

  SyntheticData out;
  out.num_nodes = n;
  out.arity = static_cast<uint16_t>(spec.feature_kinds.size());
  Rng rng(hash_stream(spec.seed, {0x5E17ULL}));

  auto make_feats = [&](uint32_t styled_block) {
    std::vector<FeatureValue> feats;
    feats.reserve(spec.feature_kinds.size());
    for (const std::string& kind : spec.feature_kinds)
      feats.push_back(draw_feature(kind, styled_block, nb, rng));
    return feats;
  };

  uint64_t benign_count = static_cast<uint64_t>(n) * spec.edges_per_node;
  for (uint64_t i = 0; i < benign_count; ++i) {
    EdgeRecord e;
    e.src = static_cast<NodeId>(rng.next_below(n));
    uint32_t b = synthetic_block_of(e.src, n, nb);
    if (rng.next_real() < spec.intra_block_p) {
      uint32_t lo = block_lo[b], size = block_lo[b + 1] - lo;
      uint32_t pick = lo + static_cast<uint32_t>(rng.next_below(size - 1));
      e.dst = pick >= e.src ? pick + 1 : pick;  // uniform over the block minus src
    } else {
      uint32_t pick = static_cast<uint32_t>(rng.next_below(n - 1));
      e.dst = pick >= e.src ? pick + 1 : pick;  // uniform noise over everyone else
    }
    e.ts = rng.next_real() * spec.horizon;
    e.feats = make_feats(b);
    out.edges.push_back(std::move(e));
    out.labels.push_back(0);
  }

  for (uint32_t i = 0; i < spec.num_anomalies; ++i) {
    EdgeRecord e;
    e.src = static_cast<NodeId>(rng.next_below(n));
    uint32_t sb = synthetic_block_of(e.src, n, nb);
    NodeId dst;
    do {
      dst = static_cast<NodeId>(rng.next_below(n));
    } while (synthetic_block_of(dst, n, nb) == sb);
    e.dst = dst;
    // Attack traffic lands late in the horizon and is styled after the
    // *destination* block, so both the endpoint and the features look wrong
    // from the source's perspective.
    e.ts = spec.horizon * (0.9 + 0.1 * rng.next_real());
    e.feats = make_feats(synthetic_block_of(dst, n, nb));
    out.edges.push_back(std::move(e));
    out.labels.push_back(1);
  }
  return out;
}

ColumnSchema synthetic_schema(const SyntheticSpec& spec) {
  ColumnSchema s;
  s.src_column = "src";
  s.dst_column = "dst";
  s.ts_column = "ts";
  for (size_t k = 0; k < spec.feature_kinds.size(); ++k)
    s.features.push_back({"f" + std::to_string(k), kind_from_string(spec.feature_kinds[k])});
  s.label_column = "label";
  s.anomalous_values = {"1"};
  return s;
}

void write_edges_csv(const std::string& path, const SyntheticData& data) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "src,dst,ts,label";
  for (uint16_t k = 0; k < data.arity; ++k) os << ",f" << k;
  os << "\n";
  char ts_buf[32];
  for (size_t i = 0; i < data.edges.size(); ++i) {
    const EdgeRecord& e = data.edges[i];
    std::snprintf(ts_buf, sizeof(ts_buf), "%.17g", e.ts);
    os << 'h' << e.src << ",h" << e.dst << ',' << ts_buf << ',' << data.labels[i];
    for (const FeatureValue& f : e.feats) {
      os << ',';
      switch (f.kind) {
        case FeatureKind::categorical: os << f.cat; break;
        case FeatureKind::count: os << f.count; break;
        case FeatureKind::ratio: {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.17g", f.ratio);
          os << buf;
          break;
        }
      }
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failure on '" + path + "'");
}

void save_entities(const std::string& path, const std::vector<std::string>& entities) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const auto& e : entities) os << e << "\n";
  if (!os) throw std::runtime_error("write failure on '" + path + "'");
}

std::vector<std::string> load_entities(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open entities file '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) out.push_back(line);
  return out;
}

}  // namespace walklm
