#include "walklm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "walklm/encoder.hpp"
#include "walklm/ingest.hpp"
#include "walklm/threading.hpp"

namespace walklm {

namespace {

// Rows per forward/backward chunk. Keeps activation memory bounded and makes
// training math independent of the batch size knob (chunks are processed
// serially so float accumulation order is deterministic).
constexpr int64_t kChunkRows = 64;

// Seed-domain tags: every independent RNG stream hashes in one of these so
// streams can never collide across purposes.
constexpr uint64_t kTagInit = 0x17;
constexpr uint64_t kTagQueue = 0x42;
constexpr uint64_t kTagCorrupt = 0xC0;
constexpr uint64_t kTagDropout = 0xD0;
constexpr uint64_t kTagValNeg = 0xA1;
constexpr uint64_t kTagFtShuffle = 0xE0;
constexpr uint64_t kTagFtWalk = 0xF7;
constexpr uint64_t kTagClsNegPairs = 0xCE;
constexpr uint64_t kTagClsNegWalk = 0xF8;
constexpr uint64_t kTagFtValScore = 0x5A;
constexpr uint64_t kTagScore = 0x5C;

EdgeRecord record_at(const TemporalGraph& g, uint64_t e) {
  EdgeRecord r;
  r.src = g.edge_src(e);
  r.dst = g.col()[e];
  r.ts = g.ts()[e];
  r.feats.assign(g.edge_feats(e), g.edge_feats(e) + g.arity());
  return r;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// dataset loading

TrainerData TrainerData::load(const std::string& dataset_dir) {
  namespace fs = std::filesystem;
  auto file = [&](const char* name) { return (fs::path(dataset_dir) / name).string(); };

  TemporalGraph full = TemporalGraph::load(file(kGraphFileName));
  SplitResult split = load_split_manifest(file(kSplitFileName));
  if (split.num_edges != full.num_edges())
    throw std::runtime_error("split manifest covers " + std::to_string(split.num_edges) +
                             " edges but the graph has " + std::to_string(full.num_edges()));
  Vocabulary vocab = Vocabulary::load(file(kVocabFileName));
  if (vocab.num_nodes() != full.num_nodes())
    throw std::runtime_error("vocabulary was built for " + std::to_string(vocab.num_nodes()) +
                             " nodes but the graph has " + std::to_string(full.num_nodes()));

  std::vector<EdgeRecord> train;
  train.reserve(split.train.size());
  for (uint64_t e : split.train) train.push_back(record_at(full, e));

  TrainerData data;
  data.entities = load_entities(file(kEntitiesFileName));
  if (data.entities.size() != full.num_nodes())
    throw std::runtime_error("entities file lists " + std::to_string(data.entities.size()) +
                             " names for " + std::to_string(full.num_nodes()) + " nodes");

  data.val_edges.reserve(split.val.size());
  for (uint64_t e : split.val) data.val_edges.push_back(record_at(full, e));
  data.test_edges.reserve(split.test_benign.size() + split.test_anomalous.size());
  for (uint64_t e : split.test_benign) {
    data.test_edges.push_back(record_at(full, e));
    data.test_labels.push_back(0);
  }
  for (uint64_t e : split.test_anomalous) {
    data.test_edges.push_back(record_at(full, e));
    data.test_labels.push_back(1);
  }

  for (const EdgeRecord& r : train) data.benign_pairs.insert(pair_key(r.src, r.dst));
  for (const EdgeRecord& r : data.val_edges) data.benign_pairs.insert(pair_key(r.src, r.dst));
  for (size_t i = 0; i < data.test_edges.size(); ++i)
    if (data.test_labels[i] == 0)
      data.benign_pairs.insert(pair_key(data.test_edges[i].src, data.test_edges[i].dst));

  data.walks = WalkData(TemporalGraph::build(full.num_nodes(), full.arity(), train),
                        std::move(vocab));
  return data;
}

std::vector<std::pair<NodeId, NodeId>> sample_negatives(
    uint32_t num_nodes, const std::unordered_set<uint64_t>& benign_pairs, size_t count,
    uint64_t seed) {
  if (count == 0) return {};
  if (num_nodes < 2) throw std::runtime_error("cannot sample non-edges with fewer than 2 nodes");
  Rng rng(hash_stream(seed, {0x9E6BULL}));
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(count);
  uint64_t attempts = 0;
  const uint64_t max_attempts = 1000ULL * count;
  while (out.size() < count) {
    if (++attempts > max_attempts)
      throw std::runtime_error("negative sampling exhausted after " +
                               std::to_string(max_attempts) +
                               " attempts; the graph is too dense");
    auto u = static_cast<NodeId>(rng.next_below(num_nodes));
    auto v = static_cast<NodeId>(rng.next_below(num_nodes - 1));
    if (v >= u) ++v;  // uniform over v != u
    if (benign_pairs.count(pair_key(u, v))) continue;
    out.emplace_back(u, v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// sequence construction

namespace {

// Worst-case token count of a walk: one start node plus (features + node) per
// hop. Stuck hops emit fewer; this bound never under-counts.
int64_t walk_token_bound(int hops, size_t arity) {
  return static_cast<int64_t>(hops) * static_cast<int64_t>(arity + 1) + 1;
}

Walk sample_construction_walk(const WalkData& wd, WalkMode mode, NodeId terminal, int hops,
                              Timestamp t_max, uint64_t seed) {
  Walk w;
  if (hops == 0) {
    w.nodes = {terminal};
    return w;
  }
  if (mode == WalkMode::static_uniform) {
    // Static construction: walk away from the terminal on the transpose and
    // reverse, so the sequence still ends at the terminal.
    w = static_walk(wd.g_rev, terminal, hops, seed);
    std::reverse(w.nodes.begin(), w.nodes.end());
    std::reverse(w.edge_indices.begin(), w.edge_indices.end());
    return w;
  }
  return reverse_temporal_walk(wd.g_rev, terminal, hops, t_max, seed);
}

}  // namespace

LpInput build_lp_input(const WalkData& wd, WalkMode mode, NodeId src, const FeatureValue* feats,
                       size_t arity, Timestamp t_max, int hops, uint64_t seed,
                       int32_t max_seq_len) {
  if (hops < 0) throw std::runtime_error("walk_hops must be non-negative");
  if (walk_token_bound(hops, arity) + static_cast<int64_t>(arity) + 1 > max_seq_len)
    throw std::runtime_error(
        "walk_hops " + std::to_string(hops) +
        " cannot fit the scoring construction inside max_seq_len " + std::to_string(max_seq_len));
  Walk w = sample_construction_walk(wd, mode, src, hops, t_max, seed);
  LpInput out;
  out.tokens = assemble_walk_tokens(w, wd.tok_rev, wd.vocab, max_seq_len);
  out.feat_start = static_cast<int32_t>(out.tokens.size());
  std::vector<TokenId> ft = tokenize_features(feats, arity, wd.vocab);
  out.tokens.insert(out.tokens.end(), ft.begin(), ft.end());
  out.tokens.push_back(Vocabulary::kMask);
  return out;
}

std::vector<TokenId> build_cls_input(const WalkData& wd, WalkMode mode, NodeId src, NodeId dst,
                                     Timestamp t_max, int hops, uint64_t seed,
                                     int32_t max_seq_len) {
  if (hops < 0) throw std::runtime_error("walk_hops must be non-negative");
  if (walk_token_bound(hops, wd.g.arity()) + 2 > max_seq_len)
    throw std::runtime_error(
        "walk_hops " + std::to_string(hops) +
        " cannot fit the classifier construction inside max_seq_len " +
        std::to_string(max_seq_len));
  Walk w = sample_construction_walk(wd, mode, src, hops, t_max, seed);
  std::vector<TokenId> tokens = assemble_walk_tokens(w, wd.tok_rev, wd.vocab, max_seq_len);
  tokens.push_back(wd.vocab.node_token(dst));
  tokens.push_back(Vocabulary::kCls);
  return tokens;
}

// ---------------------------------------------------------------------------
// chunked forward/backward

namespace {

struct MlmBatch {
  std::vector<std::vector<TokenId>> seqs;
  std::vector<std::vector<int32_t>> positions;  // sequence-local, read-adjusted
  std::vector<std::vector<TokenId>> targets;
};

std::pair<double, int64_t> mlm_forward_backward(const ModelParams<float>& m, const MlmBatch& b,
                                                uint64_t dropout_seed, float* grad) {
  double ce = 0.0;
  int64_t n = 0;
  const auto rows = static_cast<int64_t>(b.seqs.size());
  for (int64_t c0 = 0, chunk = 0; c0 < rows; c0 += kChunkRows, ++chunk) {
    const int64_t c1 = std::min(rows, c0 + kChunkRows);
    std::vector<std::vector<TokenId>> seqs(b.seqs.begin() + c0, b.seqs.begin() + c1);
    EncodeCache<float> cache =
        encode(m, TokenBatch::pack(seqs, m.cfg.max_seq_len), true,
               hash_stream(dropout_seed, {static_cast<uint64_t>(chunk)}));
    std::vector<int64_t> pos;
    std::vector<TokenId> tg;
    for (int64_t r = c0; r < c1; ++r) {
      const auto& ps = b.positions[static_cast<size_t>(r)];
      const auto& ts = b.targets[static_cast<size_t>(r)];
      for (size_t k = 0; k < ps.size(); ++k) {
        pos.push_back(cache.batch.flat(r - c0, ps[k]));
        tg.push_back(ts[k]);
      }
    }
    if (pos.empty()) continue;
    Mat<float> dh = Mat<float>::Zero(cache.h().rows(), cache.h().cols());
    auto [chunk_ce, chunk_n] = mlm_loss_backward(m, cache.h(), pos, tg, dh, grad);
    encoder_backward(m, cache, dh, grad);
    ce += chunk_ce;
    n += chunk_n;
  }
  return {ce, n};
}

struct ClsBatch {
  std::vector<std::vector<TokenId>> seqs;
  std::vector<int> labels;  // 1 = true edge
};

std::pair<double, int64_t> cls_forward_backward(const ModelParams<float>& m, const ClsBatch& b,
                                                uint64_t dropout_seed, float* grad) {
  double loss = 0.0;
  int64_t n = 0;
  const auto rows = static_cast<int64_t>(b.seqs.size());
  for (int64_t c0 = 0, chunk = 0; c0 < rows; c0 += kChunkRows, ++chunk) {
    const int64_t c1 = std::min(rows, c0 + kChunkRows);
    std::vector<std::vector<TokenId>> seqs(b.seqs.begin() + c0, b.seqs.begin() + c1);
    EncodeCache<float> cache =
        encode(m, TokenBatch::pack(seqs, m.cfg.max_seq_len), true,
               hash_stream(dropout_seed, {static_cast<uint64_t>(chunk)}));
    std::vector<int64_t> pos;
    std::vector<int> labels;
    for (int64_t r = c0; r < c1; ++r) {
      pos.push_back(cache.batch.flat(
          r - c0, static_cast<int64_t>(b.seqs[static_cast<size_t>(r)].size()) - 1));
      labels.push_back(b.labels[static_cast<size_t>(r)]);
    }
    Mat<float> dh = Mat<float>::Zero(cache.h().rows(), cache.h().cols());
    auto [chunk_loss, chunk_n] = cls_loss_backward(m, cache.h(), pos, labels, dh, grad);
    encoder_backward(m, cache, dh, grad);
    loss += chunk_loss;
    n += chunk_n;
  }
  return {loss, n};
}

}  // namespace

// ---------------------------------------------------------------------------
// validation and scoring

MetricsReport validate_lp(const WalkData& wd, const ModelParams<float>& model,
                          const std::vector<EdgeRecord>& val_edges,
                          const std::vector<std::pair<NodeId, NodeId>>& negatives, int workers) {
  if (val_edges.empty()) throw std::runtime_error("validation set is empty");
  if (negatives.size() != val_edges.size())
    throw std::runtime_error("validation negatives must be count-matched to the val edges");
  const size_t n = val_edges.size();
  const AttentionMode att = model.cfg.attention;

  std::vector<double> scores(2 * n);
  std::vector<int> labels(2 * n);
  const int64_t total = static_cast<int64_t>(2 * n);
  const int64_t chunks = (total + kChunkRows - 1) / kChunkRows;
  parallel_for(chunks, workers > 0 ? workers : default_worker_count(),
               [&](int64_t cb, int64_t ce, int) {
    for (int64_t c = cb; c < ce; ++c) {
      const int64_t i0 = c * kChunkRows, i1 = std::min(total, i0 + kChunkRows);
      std::vector<std::vector<TokenId>> seqs;
      std::vector<int64_t> mask_pos;  // sequence-local
      std::vector<TokenId> target;
      seqs.reserve(static_cast<size_t>(i1 - i0));
      for (int64_t i = i0; i < i1; ++i) {
        // First all positives, then their paired negatives (which borrow the
        // positive's features; no walk context, so the timestamp is unused).
        const bool neg = i >= static_cast<int64_t>(n);
        const EdgeRecord& e = val_edges[static_cast<size_t>(neg ? i - n : i)];
        const NodeId src = neg ? negatives[static_cast<size_t>(i - n)].first : e.src;
        const NodeId dst = neg ? negatives[static_cast<size_t>(i - n)].second : e.dst;
        std::vector<TokenId> s;
        s.push_back(wd.vocab.node_token(src));
        std::vector<TokenId> ft = tokenize_features(e.feats.data(), e.feats.size(), wd.vocab);
        s.insert(s.end(), ft.begin(), ft.end());
        s.push_back(Vocabulary::kMask);
        mask_pos.push_back(read_position(att, static_cast<int64_t>(s.size()) - 1));
        target.push_back(wd.vocab.node_token(dst));
        seqs.push_back(std::move(s));
        labels[static_cast<size_t>(i)] = neg ? 1 : 0;
      }
      EncodeCache<float> cache = encode(model, TokenBatch::pack(seqs, model.cfg.max_seq_len));
      std::vector<int64_t> pos;
      for (size_t r = 0; r < seqs.size(); ++r)
        pos.push_back(cache.batch.flat(static_cast<int64_t>(r), mask_pos[r]));
      Mat<double> probs = softmax_rows(logits_at(model, cache.h(), pos));
      for (int64_t i = i0; i < i1; ++i)
        scores[static_cast<size_t>(i)] = 1.0 - probs(i - i0, target[static_cast<size_t>(i - i0)]);
    }
  });
  return compute_metrics(scores, labels);
}

std::vector<double> score_edges(const WalkData& wd, const ModelParams<float>& model,
                                WalkMode walk_mode, FinetuneMode head,
                                const std::vector<EdgeRecord>& edges, int walk_hops,
                                uint64_t seed, int workers) {
  if (edges.empty()) return {};
  const AttentionMode att = model.cfg.attention;
  const auto total = static_cast<int64_t>(edges.size());
  std::vector<double> scores(edges.size());
  const int64_t chunks = (total + kChunkRows - 1) / kChunkRows;
  parallel_for(chunks, workers > 0 ? workers : default_worker_count(),
               [&](int64_t cb, int64_t ce, int) {
    for (int64_t c = cb; c < ce; ++c) {
      const int64_t i0 = c * kChunkRows, i1 = std::min(total, i0 + kChunkRows);
      std::vector<std::vector<TokenId>> seqs;
      seqs.reserve(static_cast<size_t>(i1 - i0));
      if (head == FinetuneMode::lp) {
        std::vector<int32_t> feat_start(static_cast<size_t>(i1 - i0));
        for (int64_t i = i0; i < i1; ++i) {
          const EdgeRecord& e = edges[static_cast<size_t>(i)];
          LpInput li = build_lp_input(wd, walk_mode, e.src, e.feats.data(), e.feats.size(), e.ts,
                                      walk_hops, hash_stream(seed, {kTagScore, static_cast<uint64_t>(i)}),
                                      model.cfg.max_seq_len);
          feat_start[static_cast<size_t>(i - i0)] = li.feat_start;
          seqs.push_back(std::move(li.tokens));
        }
        EncodeCache<float> cache = encode(model, TokenBatch::pack(seqs, model.cfg.max_seq_len));
        // One read per feature plus one for the destination.
        std::vector<int64_t> pos;
        for (int64_t r = 0; r < i1 - i0; ++r) {
          const auto arity = static_cast<int64_t>(edges[static_cast<size_t>(i0 + r)].feats.size());
          for (int64_t k = 0; k <= arity; ++k)
            pos.push_back(cache.batch.flat(r, read_position(att, feat_start[static_cast<size_t>(r)] + k)));
        }
        Mat<double> probs = softmax_rows(logits_at(model, cache.h(), pos));
        int64_t row = 0;
        for (int64_t r = 0; r < i1 - i0; ++r) {
          const EdgeRecord& e = edges[static_cast<size_t>(i0 + r)];
          const auto arity = static_cast<int64_t>(e.feats.size());
          double p = 1.0;
          for (int64_t k = 0; k < arity; ++k, ++row)
            p *= probs(row, seqs[static_cast<size_t>(r)][static_cast<size_t>(
                                feat_start[static_cast<size_t>(r)] + k)]);
          p *= probs(row, wd.vocab.node_token(e.dst));
          ++row;
          scores[static_cast<size_t>(i0 + r)] = 1.0 - p;
        }
      } else {
        for (int64_t i = i0; i < i1; ++i) {
          const EdgeRecord& e = edges[static_cast<size_t>(i)];
          seqs.push_back(build_cls_input(wd, walk_mode, e.src, e.dst, e.ts, walk_hops,
                                         hash_stream(seed, {kTagScore, static_cast<uint64_t>(i)}),
                                         model.cfg.max_seq_len));
        }
        EncodeCache<float> cache = encode(model, TokenBatch::pack(seqs, model.cfg.max_seq_len));
        std::vector<int64_t> pos;
        for (int64_t r = 0; r < i1 - i0; ++r)
          pos.push_back(cache.batch.flat(
              r, static_cast<int64_t>(seqs[static_cast<size_t>(r)].size()) - 1));
        Vec<float> z = cls_logits(model, cache.h(), pos);
        for (int64_t r = 0; r < i1 - i0; ++r)
          scores[static_cast<size_t>(i0 + r)] = 1.0 - stable_sigmoid(z(r));
      }
    }
  });
  return scores;
}

// ---------------------------------------------------------------------------
// run log

RunLog::RunLog(const std::string& path) {
  if (path.empty()) return;
  os_.open(path, std::ios::app);
  if (!os_) throw std::runtime_error("cannot open run log '" + path + "'");
}

void RunLog::write(const std::string& line) {
  if (!os_.is_open()) return;
  os_ << line << '\n';
  os_.flush();
  if (!os_) throw std::runtime_error("write failure on run log");
}

double RunLog::elapsed_s() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
}

// ---------------------------------------------------------------------------
// pretraining

PretrainResult pretrain(const TrainerData& data, const PretrainConfig& cfg) {
  const WalkData& wd = data.walks;
  if (wd.g.num_nodes() == 0) throw std::runtime_error("cannot pretrain on an empty graph");

  ModelConfig mc = cfg.model;
  mc.vocab_size = wd.vocab.size();
  mc.validate();
  if (cfg.walk_token_budget < 1 || cfg.walk_token_budget > mc.max_seq_len)
    throw std::runtime_error("walk token budget must be in [1, max_seq_len]");
  if (cfg.hyper.batch_size < 1) throw std::runtime_error("batch_size must be positive");
  if (cfg.validation_interval == 0) throw std::runtime_error("validation_interval must be positive");
  const bool causal = mc.attention == AttentionMode::causal;

  ModelParams<float> model(mc);
  model.init_weights(hash_stream(cfg.seed, {kTagInit}));
  AdamState state;
  state.m.assign(model.flat.size(), 0.0f);
  state.v.assign(model.flat.size(), 0.0f);
  std::vector<float> grad(model.flat.size(), 0.0f);

  MaskSchedule sched = cfg.schedule;
  sched.warmup_tokens =
      std::max<int64_t>(1, static_cast<int64_t>(cfg.token_budget / 10));  // always budget/10

  const bool reverse_mode = cfg.walk_mode == WalkMode::temporal_reverse;
  const TemporalGraph& gw = reverse_mode ? wd.g_rev : wd.g;
  const EdgeTokenTable& table = reverse_mode ? wd.tok_rev : wd.tok_g;

  const bool can_validate = !data.val_edges.empty();
  std::vector<std::pair<NodeId, NodeId>> negs;
  if (can_validate)
    negs = sample_negatives(wd.g.num_nodes(), data.benign_pairs, data.val_edges.size(),
                            hash_stream(cfg.seed, {kTagValNeg}));

  RunLog log(cfg.run_log_path);
  log.write(fmt("event=start token_budget=%llu batch_size=%d walk_mode=%d attention=%d "
                "val_edges=%zu wall_s=%.1f",
                static_cast<unsigned long long>(cfg.token_budget), cfg.hyper.batch_size,
                static_cast<int>(cfg.walk_mode), static_cast<int>(mc.attention),
                data.val_edges.size(), log.elapsed_s()));

  PretrainResult res;
  res.best = Checkpoint{model, cfg.walk_mode, wd.vocab.hash(), TrainProvenance{}, false, {}};
  double best_auc = -1.0;
  bool have_best_val = false;
  auto consider_best = [&](const MetricsReport& vm, uint64_t tokens) {
    if (!have_best_val || vm.auc > best_auc) {
      have_best_val = true;
      best_auc = vm.auc;
      res.best.model = model;
      res.best.prov = TrainProvenance{tokens, 0, vm.auc, vm.ap};
    }
  };

  std::vector<NodeId> queue(wd.g.num_nodes());
  std::iota(queue.begin(), queue.end(), NodeId{0});
  Rng qrng(hash_stream(cfg.seed, {kTagQueue}));
  size_t qpos = queue.size();  // first use reshuffles

  uint64_t tokens_seen = 0;
  uint64_t batch_counter = 0;
  uint64_t next_val = cfg.validation_interval;
  uint64_t consecutive_rejects = 0;
  double loss = 0.0;

  while (tokens_seen < cfg.token_budget) {
    std::vector<NodeId> starts(static_cast<size_t>(cfg.hyper.batch_size));
    for (NodeId& s : starts) {
      if (qpos == queue.size()) {
        qrng.shuffle(queue);
        qpos = 0;
      }
      s = queue[qpos++];
    }
    WalkConfig wc;
    wc.token_budget = cfg.walk_token_budget;
    wc.mode = cfg.walk_mode;
    wc.rng_seed = cfg.seed;
    wc.batch_counter = batch_counter;
    std::vector<Walk> walks = sample_walk_batch(gw, starts, wc);

    const double rate = causal ? 0.0 : mask_rate(static_cast<int64_t>(tokens_seen), sched);
    MlmBatch mb;
    mb.seqs.reserve(walks.size());
    mb.positions.reserve(walks.size());
    mb.targets.reserve(walks.size());
    uint64_t batch_tokens = 0;
    for (size_t i = 0; i < walks.size(); ++i) {
      std::vector<TokenId> toks =
          assemble_walk_tokens(walks[i], table, wd.vocab, cfg.walk_token_budget);
      batch_tokens += toks.size();
      std::vector<int32_t> pos;
      std::vector<TokenId> tg;
      if (causal) {
        // Next-token objective: position p is trained to predict token p+1.
        for (size_t p = 0; p + 1 < toks.size(); ++p) {
          pos.push_back(static_cast<int32_t>(p));
          tg.push_back(toks[p + 1]);
        }
        mb.seqs.push_back(std::move(toks));
      } else {
        Rng crng(hash_stream(cfg.seed, {kTagCorrupt, batch_counter, static_cast<uint64_t>(i)}));
        CorruptedSequence cs = corrupt_sequence(toks, rate, wd.vocab, crng);
        if (cs.positions.empty()) res.empty_mask_sequences++;
        pos = std::move(cs.positions);
        tg = std::move(cs.targets);
        mb.seqs.push_back(std::move(cs.input));
      }
      mb.positions.push_back(std::move(pos));
      mb.targets.push_back(std::move(tg));
    }

    std::fill(grad.begin(), grad.end(), 0.0f);
    auto [ce, n] =
        mlm_forward_backward(model, mb, hash_stream(cfg.seed, {kTagDropout, batch_counter}), grad.data());
    tokens_seen += batch_tokens;
    ++batch_counter;
    ++res.batches;

    if (n > 0) {
      loss = ce / static_cast<double>(n);
      if (!std::isfinite(loss)) {
        res.diverged = true;
        log.write(fmt("event=diverged tokens_seen=%llu wall_s=%.1f",
                      static_cast<unsigned long long>(tokens_seen), log.elapsed_s()));
        break;
      }
      const float inv_n = 1.0f / static_cast<float>(n);
      for (float& x : grad) x *= inv_n;
      const double lr = lr_at(static_cast<double>(std::min(tokens_seen, cfg.token_budget)),
                              static_cast<double>(cfg.token_budget), cfg.hyper);
      if (optimizer_step(model.flat, grad, state, cfg.hyper, lr)) {
        consecutive_rejects = 0;
      } else if (++consecutive_rejects >= 25) {
        res.diverged = true;
        log.write(fmt("event=diverged tokens_seen=%llu rejected_steps=%llu wall_s=%.1f",
                      static_cast<unsigned long long>(tokens_seen),
                      static_cast<unsigned long long>(state.rejected), log.elapsed_s()));
        break;
      }
    }

    if (can_validate && tokens_seen >= next_val && tokens_seen < cfg.token_budget) {
      MetricsReport vm = validate_lp(wd, model, data.val_edges, negs, cfg.workers);
      log.write(fmt("event=validate tokens_seen=%llu loss=%.6f val_auc=%.6f val_ap=%.6f "
                    "mask_rate=%.4f wall_s=%.1f",
                    static_cast<unsigned long long>(tokens_seen), loss, vm.auc, vm.ap, rate,
                    log.elapsed_s()));
      consider_best(vm, tokens_seen);
      next_val = (tokens_seen / cfg.validation_interval + 1) * cfg.validation_interval;
    }
  }

  res.final_loss = loss;
  if (can_validate && !res.diverged && tokens_seen > 0) {
    MetricsReport vm = validate_lp(wd, model, data.val_edges, negs, cfg.workers);
    log.write(fmt("event=validate tokens_seen=%llu loss=%.6f val_auc=%.6f val_ap=%.6f wall_s=%.1f",
                  static_cast<unsigned long long>(tokens_seen), loss, vm.auc, vm.ap,
                  log.elapsed_s()));
    consider_best(vm, tokens_seen);
  }
  if (!have_best_val && !res.diverged) {
    // Nothing was ever evaluated (no val set, or zero budget): keep the final
    // weights; the NaN provenance records that no validation ran.
    res.best.model = model;
    res.best.prov = TrainProvenance{tokens_seen, 0, std::numeric_limits<double>::quiet_NaN(),
                                    std::numeric_limits<double>::quiet_NaN()};
  }
  log.write(fmt("event=done tokens_seen=%llu batches=%llu best_val_auc=%.6f diverged=%d "
                "empty_mask_sequences=%llu wall_s=%.1f",
                static_cast<unsigned long long>(tokens_seen),
                static_cast<unsigned long long>(res.batches), res.best.prov.val_auc,
                res.diverged ? 1 : 0,
                static_cast<unsigned long long>(res.empty_mask_sequences), log.elapsed_s()));
  return res;
}

// ---------------------------------------------------------------------------
// fine-tuning

FinetuneResult finetune(const TrainerData& data, const Checkpoint& start,
                        const FinetuneConfig& cfg) {
  const WalkData& wd = data.walks;
  start.require_vocab_hash(wd.vocab.hash());
  if (cfg.epochs < 0) throw std::runtime_error("epochs must be non-negative");
  if (cfg.walk_hops < 1) throw std::runtime_error("walk_hops must be at least 1");
  if (cfg.hyper.batch_size < 1) throw std::runtime_error("batch_size must be positive");

  FinetuneResult res;
  res.best = start;
  if (cfg.epochs == 0) return res;

  const uint64_t num_edges = wd.g.num_edges();
  if (num_edges == 0) throw std::runtime_error("cannot fine-tune with no training edges");

  ModelParams<float> model = start.model;
  const ModelConfig& mc = model.cfg;
  const WalkMode wmode = start.walk_mode;
  const uint16_t arity = wd.g.arity();

  AdamState state;
  state.m.assign(model.flat.size(), 0.0f);
  state.v.assign(model.flat.size(), 0.0f);
  std::vector<float> grad(model.flat.size(), 0.0f);

  const bool can_validate = !data.val_edges.empty();
  std::vector<EdgeRecord> val_all;
  std::vector<int> val_labels;
  if (can_validate) {
    std::vector<std::pair<NodeId, NodeId>> negs =
        sample_negatives(wd.g.num_nodes(), data.benign_pairs, data.val_edges.size(),
                         hash_stream(cfg.seed, {kTagValNeg}));
    val_all = data.val_edges;
    val_labels.assign(data.val_edges.size(), 0);
    for (size_t i = 0; i < negs.size(); ++i) {
      EdgeRecord r = data.val_edges[i];  // borrow features and timestamp
      r.src = negs[i].first;
      r.dst = negs[i].second;
      val_all.push_back(std::move(r));
      val_labels.push_back(1);
    }
  }

  RunLog log(cfg.run_log_path);
  log.write(fmt("event=start mode=%s epochs=%d walk_hops=%d batch_size=%d train_edges=%llu "
                "val_edges=%zu wall_s=%.1f",
                cfg.mode == FinetuneMode::lp ? "lp" : "cls", cfg.epochs, cfg.walk_hops,
                cfg.hyper.batch_size, static_cast<unsigned long long>(num_edges),
                data.val_edges.size(), log.elapsed_s()));

  const auto batch_size = static_cast<uint64_t>(cfg.hyper.batch_size);
  const uint64_t steps_per_epoch = (num_edges + batch_size - 1) / batch_size;
  const uint64_t total_steps = static_cast<uint64_t>(cfg.epochs) * steps_per_epoch;
  uint64_t step = 0;
  double best_auc = -1.0;
  bool have_best = false;

  std::vector<uint64_t> order(num_edges);
  std::iota(order.begin(), order.end(), uint64_t{0});

  for (int epoch = 0; epoch < cfg.epochs && !res.diverged; ++epoch) {
    Rng erng(hash_stream(cfg.seed, {kTagFtShuffle, static_cast<uint64_t>(epoch)}));
    erng.shuffle(order);
    double epoch_loss = 0.0;
    uint64_t epoch_examples = 0;

    for (uint64_t b0 = 0; b0 < num_edges && !res.diverged; b0 += batch_size) {
      const uint64_t bn = std::min(batch_size, num_edges - b0);
      std::fill(grad.begin(), grad.end(), 0.0f);
      double batch_loss_sum;
      int64_t batch_n;

      if (cfg.mode == FinetuneMode::lp) {
        MlmBatch mb;
        mb.seqs.reserve(bn);
        for (uint64_t j = 0; j < bn; ++j) {
          const uint64_t e = order[b0 + j];
          const EdgeRecord r = record_at(wd.g, e);
          LpInput li = build_lp_input(
              wd, wmode, r.src, r.feats.data(), r.feats.size(), r.ts, cfg.walk_hops,
              hash_stream(cfg.seed, {kTagFtWalk, static_cast<uint64_t>(epoch), e}),
              mc.max_seq_len);
          const auto mask_pos = static_cast<int64_t>(li.feat_start) + arity;
          mb.seqs.push_back(std::move(li.tokens));
          mb.positions.push_back({static_cast<int32_t>(read_position(mc.attention, mask_pos))});
          mb.targets.push_back({wd.vocab.node_token(r.dst)});
        }
        std::tie(batch_loss_sum, batch_n) = mlm_forward_backward(
            model, mb, hash_stream(cfg.seed, {kTagDropout, step}), grad.data());
      } else {
        // Balanced batch: bn true edges plus bn fresh non-edges; negative j
        // reuses the timestamp of the positive in slot j so both walks see
        // the same amount of history.
        std::vector<std::pair<NodeId, NodeId>> negs = sample_negatives(
            wd.g.num_nodes(), data.benign_pairs, bn,
            hash_stream(cfg.seed, {kTagClsNegPairs, static_cast<uint64_t>(epoch), b0}));
        ClsBatch cb;
        cb.seqs.reserve(2 * bn);
        std::vector<Timestamp> pos_ts(bn);
        for (uint64_t j = 0; j < bn; ++j) {
          const uint64_t e = order[b0 + j];
          const EdgeRecord r = record_at(wd.g, e);
          pos_ts[j] = r.ts;
          cb.seqs.push_back(build_cls_input(
              wd, wmode, r.src, r.dst, r.ts, cfg.walk_hops,
              hash_stream(cfg.seed, {kTagFtWalk, static_cast<uint64_t>(epoch), e}),
              mc.max_seq_len));
          cb.labels.push_back(1);
        }
        for (uint64_t j = 0; j < bn; ++j) {
          cb.seqs.push_back(build_cls_input(
              wd, wmode, negs[j].first, negs[j].second, pos_ts[j], cfg.walk_hops,
              hash_stream(cfg.seed, {kTagClsNegWalk, static_cast<uint64_t>(epoch), b0 + j}),
              mc.max_seq_len));
          cb.labels.push_back(0);
        }
        std::tie(batch_loss_sum, batch_n) = cls_forward_backward(
            model, cb, hash_stream(cfg.seed, {kTagDropout, step}), grad.data());
      }

      ++step;
      ++res.batches;
      if (batch_n > 0) {
        const double loss = batch_loss_sum / static_cast<double>(batch_n);
        if (!std::isfinite(loss)) {
          res.diverged = true;
          log.write(fmt("event=diverged epoch=%d step=%llu wall_s=%.1f", epoch,
                        static_cast<unsigned long long>(step), log.elapsed_s()));
          break;
        }
        epoch_loss += batch_loss_sum;
        epoch_examples += static_cast<uint64_t>(batch_n);
        const float inv_n = 1.0f / static_cast<float>(batch_n);
        for (float& x : grad) x *= inv_n;
        const double lr =
            lr_at(static_cast<double>(step), static_cast<double>(total_steps), cfg.hyper);
        optimizer_step(model.flat, grad, state, cfg.hyper, lr);
      }
    }
    if (res.diverged) break;

    const double mean_loss =
        epoch_examples ? epoch_loss / static_cast<double>(epoch_examples) : 0.0;
    if (can_validate) {
      std::vector<double> scores =
          score_edges(wd, model, wmode, cfg.mode, val_all, cfg.walk_hops,
                      hash_stream(cfg.seed, {kTagFtValScore}), cfg.workers);
      MetricsReport vm = compute_metrics(scores, val_labels);
      log.write(fmt("event=epoch epoch=%d loss=%.6f val_auc=%.6f val_ap=%.6f wall_s=%.1f",
                    epoch + 1, mean_loss, vm.auc, vm.ap, log.elapsed_s()));
      if (!have_best || vm.auc > best_auc) {
        have_best = true;
        best_auc = vm.auc;
        res.best = Checkpoint{model, wmode, wd.vocab.hash(),
                              TrainProvenance{start.prov.tokens_seen,
                                              static_cast<uint32_t>(epoch + 1), vm.auc, vm.ap},
                              false,
                              {}};
      }
    } else {
      log.write(fmt("event=epoch epoch=%d loss=%.6f wall_s=%.1f", epoch + 1, mean_loss,
                    log.elapsed_s()));
    }
  }

  if (!have_best && !res.diverged) {
    res.best = Checkpoint{model, wmode, wd.vocab.hash(),
                          TrainProvenance{start.prov.tokens_seen,
                                          static_cast<uint32_t>(cfg.epochs),
                                          std::numeric_limits<double>::quiet_NaN(),
                                          std::numeric_limits<double>::quiet_NaN()},
                          false,
                          {}};
  }
  log.write(fmt("event=done epochs=%d batches=%llu best_val_auc=%.6f best_epoch=%u diverged=%d "
                "wall_s=%.1f",
                cfg.epochs, static_cast<unsigned long long>(res.batches), res.best.prov.val_auc,
                res.best.prov.epoch, res.diverged ? 1 : 0, log.elapsed_s()));
  return res;
}

}  // namespace walklm
