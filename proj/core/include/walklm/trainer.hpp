#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "walklm/graph.hpp"
#include "walklm/masking.hpp"
#include "walklm/metrics.hpp"
#include "walklm/model.hpp"
#include "walklm/optimizer.hpp"
#include "walklm/tokenizer.hpp"
#include "walklm/walk.hpp"

namespace walklm {

// ---------------------------------------------------------------------------
// shared training context

// Everything needed to turn nodes/edges into token sequences: the training
// graph, its transpose (reverse walks sample in-edges), the vocabulary, and
// per-edge feature-token tables for both orientations.
struct WalkData {
  TemporalGraph g;
  TemporalGraph g_rev;
  Vocabulary vocab;
  EdgeTokenTable tok_g;
  EdgeTokenTable tok_rev;

  WalkData() = default;
  WalkData(TemporalGraph g_train, Vocabulary v)
      : g(std::move(g_train)),
        g_rev(g.transpose()),
        vocab(std::move(v)),
        tok_g(g, vocab),
        tok_rev(g_rev, vocab) {}
};

inline uint64_t pair_key(NodeId u, NodeId v) {
  return (static_cast<uint64_t>(u) << 32) | static_cast<uint64_t>(v);
}

// Files a dataset directory is expected to contain (written by the graph
// build step, read by every training/scoring step).
inline constexpr const char* kGraphFileName = "graph.bin";
inline constexpr const char* kSplitFileName = "splits.txt";
inline constexpr const char* kVocabFileName = "vocab.txt";
inline constexpr const char* kEntitiesFileName = "entities.txt";

// A loaded dataset: the walk context is built from the training split only,
// so walks can never leak held-out edges, while val/test edges are kept as
// raw records for validation and scoring.
struct TrainerData {
  WalkData walks;
  std::vector<EdgeRecord> val_edges;             // benign, held out
  std::vector<EdgeRecord> test_edges;            // benign first, then anomalous
  std::vector<int> test_labels;                  // aligned with test_edges
  std::unordered_set<uint64_t> benign_pairs;     // train + val + benign-test (u,v) keys
  std::vector<std::string> entities;             // dense node id -> name

  static TrainerData load(const std::string& dataset_dir);
};

// Uniformly random (u, v) pairs with u != v whose key is absent from
// benign_pairs. Draws are independent (duplicates allowed); throws after
// 1000 * count failed attempts, which only a near-complete graph can hit.
std::vector<std::pair<NodeId, NodeId>> sample_negatives(
    uint32_t num_nodes, const std::unordered_set<uint64_t>& benign_pairs, size_t count,
    uint64_t seed);

// ---------------------------------------------------------------------------
// sequence construction

// The position whose logits are trained to predict the token at token_pos:
// the position itself under bidirectional attention, the preceding position
// under causal attention (a causal position can only predict its successor).
inline int64_t read_position(AttentionMode mode, int64_t token_pos) {
  return mode == AttentionMode::causal ? token_pos - 1 : token_pos;
}

// Link-prediction input: a walk that terminates at src (reverse-temporal
// bounded by t_max, or a static walk on the transpose, reversed), followed by
// the edge's feature tokens and [MASK]. feat_start marks where the feature
// block begins; the mask sits at feat_start + arity.
struct LpInput {
  std::vector<TokenId> tokens;
  int32_t feat_start = 0;
};

LpInput build_lp_input(const WalkData& wd, WalkMode mode, NodeId src, const FeatureValue* feats,
                       size_t arity, Timestamp t_max, int hops, uint64_t seed,
                       int32_t max_seq_len);

// Edge-classifier input: walk to src, then [nid:dst], then [CLS].
std::vector<TokenId> build_cls_input(const WalkData& wd, WalkMode mode, NodeId src, NodeId dst,
                                     Timestamp t_max, int hops, uint64_t seed,
                                     int32_t max_seq_len);

// ---------------------------------------------------------------------------
// validation and scoring

enum class FinetuneMode : uint8_t { lp = 0, cls = 1 };

// Cheap link-prediction validation used during pretraining: each edge becomes
// [nid:src] + feature tokens + [MASK] (no walk context) and is scored
// 1 - P(mask = dst). negatives must be count-matched to val_edges; negative i
// borrows the features and timestamp of val edge i. Sampled non-edges are the
// positive class of the returned metrics (higher score = more anomalous).
MetricsReport validate_lp(const WalkData& wd, const ModelParams<float>& model,
                          const std::vector<EdgeRecord>& val_edges,
                          const std::vector<std::pair<NodeId, NodeId>>& negatives,
                          int workers = 0);

// Full scoring construction shared by fine-tune epoch validation and the
// anomaly detector. lp: score = 1 - prod(P(feature_k at its read position)) *
// P(dst at the mask's read position). cls: score = 1 - sigmoid(cls logit).
// Edge i's walk uses the RNG stream hash(seed, 0x5C, i).
std::vector<double> score_edges(const WalkData& wd, const ModelParams<float>& model,
                                WalkMode walk_mode, FinetuneMode head,
                                const std::vector<EdgeRecord>& edges, int walk_hops,
                                uint64_t seed, int workers = 0);

// ---------------------------------------------------------------------------
// run logs

// Append-only key=value record lines, one event per line, flushed per line.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::string& path);  // empty path leaves the log disabled
  void write(const std::string& line);
  bool enabled() const { return os_.is_open(); }
  double elapsed_s() const;

 private:
  std::ofstream os_;
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// pretraining

struct PretrainConfig {
  uint64_t token_budget = 100'000'000;
  uint64_t validation_interval = 10'000'000;
  int walk_token_budget = 64;
  WalkMode walk_mode = WalkMode::temporal;
  // warmup_tokens is always derived as token_budget / 10; only the rates are
  // honored here.
  MaskSchedule schedule;
  TrainHyper hyper = TrainHyper::pretrain_defaults();  // batch size lives here
  ModelConfig model;  // vocab_size is overwritten from the vocabulary
  uint64_t seed = 0;
  int workers = 0;  // 0: WALKLM_WORKERS or hardware concurrency
  std::string run_log_path;
};

struct PretrainResult {
  Checkpoint best;          // highest validation AUC; initial weights if budget is 0
  bool diverged = false;    // non-finite loss or persistent rejected steps
  uint64_t batches = 0;
  uint64_t empty_mask_sequences = 0;  // corruption selected zero positions
  double final_loss = 0.0;
};

// Token-budget pretraining loop: one walk per node in shuffled passes, always
// full batches, corruption at mask_rate(tokens_seen) (bidirectional) or
// shifted next-token targets with no corruption (causal). Validates every
// validation_interval tokens and once at the end; returns the checkpoint with
// the highest validation AUC (the final model when no validation ran).
// Divergence aborts and returns the best checkpoint so far.
PretrainResult pretrain(const TrainerData& data, const PretrainConfig& cfg);

// ---------------------------------------------------------------------------
// fine-tuning

struct FinetuneConfig {
  FinetuneMode mode = FinetuneMode::lp;
  int epochs = 5;
  int walk_hops = 1;
  TrainHyper hyper = TrainHyper::finetune_defaults();
  uint64_t seed = 0;
  int workers = 0;
  std::string run_log_path;
};

struct FinetuneResult {
  Checkpoint best;     // epoch with the highest validation AUC
  uint64_t batches = 0;
  bool diverged = false;
};

// Fine-tunes a pretrained (or freshly initialized) checkpoint on the training
// edges. lp: cross-entropy on the destination at the mask's read position,
// one example per training edge per epoch, shuffled. cls: exactly balanced
// batches of training edges vs freshly sampled non-edges, binary
// cross-entropy on the [CLS] logit; negative j in a batch borrows the
// timestamp of the positive in slot j. Validates after every epoch with the
// scoring construction (lp) or the classifier head (cls) against non-edges
// fixed per run; epochs = 0 returns the input checkpoint unchanged.
FinetuneResult finetune(const TrainerData& data, const Checkpoint& start,
                        const FinetuneConfig& cfg);

}  // namespace walklm
