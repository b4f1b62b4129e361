// walklm: build graphs from event CSVs, pretrain/fine-tune the walk encoder,
// and score edges for anomalies. Every run writes a resolved-config snapshot
// next to its outputs; reruns with the same snapshot reproduce outputs
// byte-identically. Worker count comes from the WALKLM_WORKERS environment
// variable (default: all hardware threads).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "config.hpp"
#include "walklm/detector.hpp"
#include "walklm/ingest.hpp"
#include "walklm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace walklm;

namespace {

// Deletes everything this run created unless release() is called, so a failed
// run never leaves partial outputs behind.
class OutputGuard {
 public:
  void add(const fs::path& p) { paths_.push_back(p); }
  void release() { released_ = true; }
  ~OutputGuard() {
    if (released_) return;
    for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) {
      std::error_code ec;
      fs::remove_all(*it, ec);
    }
  }

 private:
  std::vector<fs::path> paths_;
  bool released_ = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw std::runtime_error("write failure on '" + path.string() + "'");
}

void write_snapshot(const fs::path& path, const std::string& command, const json& inputs,
                    const cli::RunConfig& cfg) {
  json j;
  j["command"] = command;
  j["inputs"] = inputs;
  j["config"] = json::parse(cfg.to_json());
  write_text(path, j.dump(2) + "\n");
}

// Loads the config document (if any) and applies flag overrides. Each entry
// in `overrides` runs only when its flag was actually passed.
struct FlagOverride {
  const char* flag;
  std::function<void(cli::RunConfig&)> apply;
};

cli::RunConfig resolve_config(const CLI::App* cmd, const std::string& config_path,
                              const std::vector<FlagOverride>& overrides) {
  cli::RunConfig cfg;
  if (!config_path.empty()) cfg = cli::RunConfig::load(config_path);
  for (const FlagOverride& o : overrides)
    if (cmd->count(o.flag) > 0) o.apply(cfg);
  return cfg;
}

EdgeRecord edge_record_at(const TemporalGraph& g, uint64_t e) {
  EdgeRecord r;
  r.src = g.edge_src(e);
  r.dst = g.col()[e];
  r.ts = g.ts()[e];
  r.feats.assign(g.edge_feats(e), g.edge_feats(e) + g.arity());
  return r;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const std::string& spec_path, const std::string& out_csv,
              std::optional<uint64_t> seed) {
  SyntheticSpec spec;
  if (!spec_path.empty()) spec = SyntheticSpec::load(spec_path);
  if (seed) spec.seed = *seed;

  OutputGuard guard;
  const fs::path csv(out_csv);
  const fs::path schema_path(out_csv + ".schema.json");
  const fs::path snap_path(out_csv + ".config.json");
  guard.add(csv);
  guard.add(schema_path);
  guard.add(snap_path);

  SyntheticData data = generate_synthetic(spec);
  write_edges_csv(out_csv, data);
  synthetic_schema(spec).save(schema_path.string());
  json snap;
  snap["command"] = "synth";
  snap["inputs"] = {{"spec", spec_path}};
  snap["synthetic_spec"] = json::parse(spec.to_json());
  write_text(snap_path, snap.dump(2) + "\n");

  uint64_t anomalies = 0;
  for (int l : data.labels) anomalies += static_cast<uint64_t>(l);
  std::printf("synth: %zu edges (%llu anomalous), %u nodes -> %s\n", data.edges.size(),
              static_cast<unsigned long long>(anomalies), data.num_nodes, out_csv.c_str());
  std::printf("synth: schema %s\n", schema_path.c_str());
  guard.release();
  return 0;
}

// ---------------------------------------------------------------------------
// build-graph

int cmd_build_graph(const std::string& data_csv, const std::string& schema_path,
                    const std::string& out_dir, const std::string& compromises_path,
                    const cli::RunConfig& cfg) {
  ColumnSchema schema = ColumnSchema::load(schema_path);
  IngestResult ingest = parse_edge_csv(data_csv, schema);
  if (ingest.rows_malformed > 0) {
    std::fprintf(stderr, "warning: skipped %llu malformed rows\n",
                 static_cast<unsigned long long>(ingest.rows_malformed));
    for (const std::string& s : ingest.malformed_samples)
      std::fprintf(stderr, "warning:   %s\n", s.c_str());
  }
  if (!compromises_path.empty())
    apply_compromise_labels(ingest, read_compromise_csv(compromises_path));

  const auto num_nodes = static_cast<uint32_t>(ingest.entities.size());
  const auto arity = static_cast<uint16_t>(schema.features.size());
  std::vector<uint64_t> csr_to_input;
  TemporalGraph full = TemporalGraph::build(num_nodes, arity, ingest.edges, &csr_to_input);
  std::vector<int> labels_csr(ingest.labels.size());
  for (size_t i = 0; i < csr_to_input.size(); ++i)
    labels_csr[i] = ingest.labels[csr_to_input[i]];

  SplitResult split = split_benign(labels_csr, cfg.split);

  // The vocabulary sees the full node set but only training-edge features, so
  // an unseen held-out feature value fails loudly instead of leaking.
  std::vector<EdgeRecord> train_records;
  train_records.reserve(split.train.size());
  for (uint64_t e : split.train) train_records.push_back(edge_record_at(full, e));
  Vocabulary vocab = Vocabulary::build(TemporalGraph::build(num_nodes, arity, train_records));

  OutputGuard guard;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  for (const char* name : {kGraphFileName, kSplitFileName, kVocabFileName, kEntitiesFileName,
                           "dataset_config.json"})
    guard.add(dir / name);

  full.save((dir / kGraphFileName).string());
  save_split_manifest((dir / kSplitFileName).string(), split);
  vocab.save((dir / kVocabFileName).string());
  save_entities((dir / kEntitiesFileName).string(), ingest.entities);

  json snap;
  snap["command"] = "build-graph";
  snap["inputs"] = {{"data", data_csv}, {"schema", schema_path}, {"compromises", compromises_path}};
  snap["schema"] = json::parse(schema.to_json());
  snap["split"] = {{"train_frac", cfg.split.train_frac},
                   {"val_frac", cfg.split.val_frac},
                   {"test_frac", cfg.split.test_frac},
                   {"seed", cfg.split.seed}};
  snap["counts"] = {{"nodes", num_nodes},
                    {"edges", full.num_edges()},
                    {"train", split.train.size()},
                    {"val", split.val.size()},
                    {"test_benign", split.test_benign.size()},
                    {"test_anomalous", split.test_anomalous.size()},
                    {"rows_filtered", ingest.rows_filtered},
                    {"rows_malformed", ingest.rows_malformed},
                    {"vocab", vocab.size()}};
  write_text(dir / "dataset_config.json", snap.dump(2) + "\n");

  std::printf("build-graph: %u nodes, %llu edges (train %zu, val %zu, test %zu+%zu), vocab %d -> %s\n",
              num_nodes, static_cast<unsigned long long>(full.num_edges()), split.train.size(),
              split.val.size(), split.test_benign.size(), split.test_anomalous.size(),
              vocab.size(), out_dir.c_str());
  guard.release();
  return 0;
}

// ---------------------------------------------------------------------------
// pretrain

int cmd_pretrain(const std::string& graph_dir, const std::string& out_dir,
                 const cli::RunConfig& cfg) {
  PretrainConfig pc = cfg.pretrain_config();  // validate before touching outputs
  TrainerData data = TrainerData::load(graph_dir);

  OutputGuard guard;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const fs::path ckpt_path = dir / "model.ckpt";
  const fs::path log_path = dir / "run_log.txt";
  const fs::path snap_path = dir / "config.json";
  for (const fs::path& p : {ckpt_path, log_path, snap_path}) {
    std::error_code ec;
    fs::remove(p, ec);  // reruns start clean so outputs stay byte-identical
    guard.add(p);
  }

  pc.run_log_path = log_path.string();
  PretrainResult res = pretrain(data, pc);
  res.best.save(ckpt_path.string());
  write_snapshot(snap_path, "pretrain", {{"graph", graph_dir}, {"out", out_dir}}, cfg);

  std::printf("pretrain: %llu batches, best val_auc=%.6f val_ap=%.6f at %llu tokens -> %s\n",
              static_cast<unsigned long long>(res.batches), res.best.prov.val_auc,
              res.best.prov.val_ap, static_cast<unsigned long long>(res.best.prov.tokens_seen),
              ckpt_path.c_str());
  if (res.diverged)
    std::fprintf(stderr, "warning: pretraining diverged; saved the best checkpoint so far\n");
  guard.release();
  return 0;
}

// ---------------------------------------------------------------------------
// finetune

int cmd_finetune(const std::string& graph_dir, const std::string& ckpt_in,
                 const std::string& out_dir, const cli::RunConfig& cfg) {
  FinetuneConfig fc = cfg.finetune_config();  // validate before touching outputs
  TrainerData data = TrainerData::load(graph_dir);
  Checkpoint start = Checkpoint::load(ckpt_in);

  OutputGuard guard;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const fs::path ckpt_path = dir / "model.ckpt";
  const fs::path log_path = dir / "run_log.txt";
  const fs::path snap_path = dir / "config.json";
  for (const fs::path& p : {ckpt_path, log_path, snap_path}) {
    std::error_code ec;
    fs::remove(p, ec);
    guard.add(p);
  }

  fc.run_log_path = log_path.string();
  FinetuneResult res = finetune(data, start, fc);
  res.best.save(ckpt_path.string());
  write_snapshot(snap_path, "finetune", {{"graph", graph_dir}, {"ckpt", ckpt_in}, {"out", out_dir}},
                 cfg);

  std::printf("finetune: %llu batches, best epoch %u val_auc=%.6f val_ap=%.6f -> %s\n",
              static_cast<unsigned long long>(res.batches), res.best.prov.epoch,
              res.best.prov.val_auc, res.best.prov.val_ap, ckpt_path.c_str());
  if (res.diverged)
    std::fprintf(stderr, "warning: fine-tuning diverged; saved the best checkpoint so far\n");
  guard.release();
  return 0;
}

// ---------------------------------------------------------------------------
// score

int cmd_score(const std::string& graph_dir, const std::string& ckpt_in, const std::string& out_csv,
              const std::string& split_name, const cli::RunConfig& cfg) {
  TrainerData data = TrainerData::load(graph_dir);
  Checkpoint ckpt = Checkpoint::load(ckpt_in);

  const std::vector<EdgeRecord>* edges = nullptr;
  std::vector<int> labels;
  if (split_name == "test") {
    edges = &data.test_edges;
    labels = data.test_labels;
  } else if (split_name == "val") {
    edges = &data.val_edges;
    labels.assign(data.val_edges.size(), 0);
  } else {
    throw std::runtime_error("split must be 'test' or 'val', got '" + split_name + "'");
  }

  OutputGuard guard;
  const fs::path csv(out_csv);
  const fs::path snap_path(out_csv + ".config.json");
  guard.add(csv);
  guard.add(snap_path);

  ScoreReport rep = score_report(data.walks, ckpt, cfg.score_mode_enum(), *edges, labels,
                                 cfg.score_walk_hops, cfg.seed);
  write_scores_csv(out_csv, rep.edges, data.entities);
  write_snapshot(snap_path, "score",
                 {{"graph", graph_dir}, {"ckpt", ckpt_in}, {"split", split_name}, {"out", out_csv}},
                 cfg);

  if (rep.metrics_defined) {
    std::printf("score: %s\n", format_metrics(rep.metrics).c_str());
  } else {
    std::fprintf(stderr,
                 "warning: metrics undefined (labels missing or single-class); scores written\n");
  }
  std::printf("score: %zu rows -> %s\n", rep.edges.size(), out_csv.c_str());
  guard.release();
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::string& scores_csv) {
  ScoresFile sf = read_scores_csv(scores_csv);
  if (sf.scores.empty()) throw std::runtime_error("scores file has no rows");
  for (int l : sf.labels)
    if (l < 0)
      throw std::runtime_error("scores file has unlabeled rows; metrics are undefined");
  MetricsReport m = compute_metrics(sf.scores, sf.labels);
  std::printf("eval: %s\n", format_metrics(m).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"walk-based lateral-movement detector"};
  app.require_subcommand(1);

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic block-structured event CSV");
  std::string synth_spec, synth_out;
  uint64_t synth_seed = 0;
  synth->add_option("--spec", synth_spec, "synthetic spec JSON (defaults when omitted)");
  synth->add_option("--out", synth_out, "output CSV path")->required();
  synth->add_option("--seed", synth_seed, "override the spec's seed");

  // build-graph ----------------------------------------------------------
  auto* build = app.add_subcommand("build-graph", "ingest an event CSV into a dataset directory");
  std::string bg_data, bg_schema, bg_out, bg_compromises, bg_config;
  double bg_train = 0, bg_val = 0, bg_test = 0;
  uint64_t bg_split_seed = 0;
  build->add_option("--data", bg_data, "event CSV")->required();
  build->add_option("--schema", bg_schema, "column schema JSON")->required();
  build->add_option("--out", bg_out, "dataset output directory")->required();
  build->add_option("--compromises", bg_compromises, "host,time compromise CSV for labeling");
  build->add_option("--config", bg_config, "run config JSON");
  build->add_option("--train-frac", bg_train, "benign train fraction");
  build->add_option("--val-frac", bg_val, "benign val fraction");
  build->add_option("--test-frac", bg_test, "benign test fraction");
  build->add_option("--split-seed", bg_split_seed, "split shuffle seed");

  // pretrain ---------------------------------------------------------------
  auto* pre = app.add_subcommand("pretrain", "pretrain the encoder on random walks");
  std::string pre_graph, pre_out, pre_config, pre_mode, pre_preset, pre_attention;
  uint64_t pre_tokens = 0, pre_seed = 0, pre_val_interval = 0;
  int pre_batch = 0;
  pre->add_option("--graph", pre_graph, "dataset directory from build-graph")->required();
  pre->add_option("--out", pre_out, "run output directory")->required();
  pre->add_option("--config", pre_config, "run config JSON");
  pre->add_option("--mode", pre_mode, "walk mode: temporal | static");
  pre->add_option("--preset", pre_preset, "model preset: tiny | mini | medium | baseline");
  pre->add_option("--attention", pre_attention, "bidirectional | causal");
  pre->add_option("--tokens", pre_tokens, "pretraining token budget");
  pre->add_option("--val-interval", pre_val_interval, "tokens between validations");
  pre->add_option("--batch", pre_batch, "batch size (sequences)");
  pre->add_option("--seed", pre_seed, "run seed");

  // finetune ---------------------------------------------------------------
  auto* fin = app.add_subcommand("finetune", "fine-tune a checkpoint for link prediction");
  std::string fin_graph, fin_ckpt, fin_out, fin_config, fin_mode;
  int fin_epochs = 0, fin_hops = 0, fin_batch = 0;
  uint64_t fin_seed = 0;
  fin->add_option("--graph", fin_graph, "dataset directory")->required();
  fin->add_option("--ckpt", fin_ckpt, "input checkpoint")->required();
  fin->add_option("--out", fin_out, "run output directory")->required();
  fin->add_option("--config", fin_config, "run config JSON");
  fin->add_option("--mode", fin_mode, "fine-tune head: lp | cls");
  fin->add_option("--epochs", fin_epochs, "fine-tuning epochs");
  fin->add_option("--walk-hops", fin_hops, "walk length for input construction");
  fin->add_option("--batch", fin_batch, "batch size");
  fin->add_option("--seed", fin_seed, "run seed");

  // score ---------------------------------------------------------------
  auto* sc = app.add_subcommand("score", "score held-out edges and write a CSV");
  std::string sc_graph, sc_ckpt, sc_out, sc_config, sc_mode, sc_split = "test";
  int sc_hops = 0;
  uint64_t sc_seed = 0;
  sc->add_option("--graph", sc_graph, "dataset directory")->required();
  sc->add_option("--ckpt", sc_ckpt, "checkpoint to score with")->required();
  sc->add_option("--out", sc_out, "output scores CSV")->required();
  sc->add_option("--split", sc_split, "edge split to score: test | val");
  sc->add_option("--config", sc_config, "run config JSON");
  sc->add_option("--mode", sc_mode, "scoring head: lp | cls");
  sc->add_option("--walk-hops", sc_hops, "walk length for input construction");
  sc->add_option("--seed", sc_seed, "scoring seed");

  // eval ---------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "recompute metrics from a scores CSV");
  std::string ev_scores;
  ev->add_option("--scores", ev_scores, "scores CSV from `score`")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(synth)) {
      std::optional<uint64_t> seed;
      if (synth->count("--seed")) seed = synth_seed;
      return cmd_synth(synth_spec, synth_out, seed);
    }
    if (app.got_subcommand(build)) {
      cli::RunConfig cfg = resolve_config(
          build, bg_config,
          {{"--train-frac", [&](cli::RunConfig& c) { c.split.train_frac = bg_train; }},
           {"--val-frac", [&](cli::RunConfig& c) { c.split.val_frac = bg_val; }},
           {"--test-frac", [&](cli::RunConfig& c) { c.split.test_frac = bg_test; }},
           {"--split-seed", [&](cli::RunConfig& c) { c.split.seed = bg_split_seed; }}});
      return cmd_build_graph(bg_data, bg_schema, bg_out, bg_compromises, cfg);
    }
    if (app.got_subcommand(pre)) {
      cli::RunConfig cfg = resolve_config(
          pre, pre_config,
          {{"--mode", [&](cli::RunConfig& c) { c.walk_mode = pre_mode; }},
           {"--preset", [&](cli::RunConfig& c) { c.preset = pre_preset; }},
           {"--attention", [&](cli::RunConfig& c) { c.attention = pre_attention; }},
           {"--tokens", [&](cli::RunConfig& c) { c.pretrain_tokens = pre_tokens; }},
           {"--val-interval", [&](cli::RunConfig& c) { c.validation_interval = pre_val_interval; }},
           {"--batch", [&](cli::RunConfig& c) { c.pre_hyper.batch_size = pre_batch; }},
           {"--seed", [&](cli::RunConfig& c) { c.seed = pre_seed; }}});
      return cmd_pretrain(pre_graph, pre_out, cfg);
    }
    if (app.got_subcommand(fin)) {
      cli::RunConfig cfg = resolve_config(
          fin, fin_config,
          {{"--mode", [&](cli::RunConfig& c) { c.finetune_mode = fin_mode; }},
           {"--epochs", [&](cli::RunConfig& c) { c.epochs = fin_epochs; }},
           {"--walk-hops", [&](cli::RunConfig& c) { c.walk_hops = fin_hops; }},
           {"--batch", [&](cli::RunConfig& c) { c.ft_hyper.batch_size = fin_batch; }},
           {"--seed", [&](cli::RunConfig& c) { c.seed = fin_seed; }}});
      return cmd_finetune(fin_graph, fin_ckpt, fin_out, cfg);
    }
    if (app.got_subcommand(sc)) {
      cli::RunConfig cfg = resolve_config(
          sc, sc_config,
          {{"--mode", [&](cli::RunConfig& c) { c.score_mode = sc_mode; }},
           {"--walk-hops", [&](cli::RunConfig& c) { c.score_walk_hops = sc_hops; }},
           {"--seed", [&](cli::RunConfig& c) { c.seed = sc_seed; }}});
      return cmd_score(sc_graph, sc_ckpt, sc_out, sc_split, cfg);
    }
    if (app.got_subcommand(ev)) return cmd_eval(ev_scores);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
