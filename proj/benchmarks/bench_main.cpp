// Microbenchmarks for the hot paths: walk sampling, token assembly, encoder
// forward/backward, and the optimizer step.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "walklm/encoder.hpp"
#include "walklm/graph.hpp"
#include "walklm/model.hpp"
#include "walklm/optimizer.hpp"
#include "walklm/rng.hpp"
#include "walklm/tokenizer.hpp"
#include "walklm/walk.hpp"

namespace {

using namespace walklm;

// Random sparse multigraph: n nodes, deg out-edges each, one categorical and
// one count feature per edge.
TemporalGraph make_graph(uint32_t n, uint32_t deg, uint64_t seed) {
  Rng rng(seed);
  std::vector<EdgeRecord> edges;
  edges.reserve(static_cast<size_t>(n) * deg);
  for (uint32_t u = 0; u < n; ++u) {
    for (uint32_t k = 0; k < deg; ++k) {
      EdgeRecord e;
      e.src = u;
      e.dst = rng.next_below(n);
      e.ts = rng.next_real() * 1e6;
      e.feats = {FeatureValue::from_categorical(rng.next_below(8) ? "tcp" : "udp"),
                 FeatureValue::from_count(rng.next_below(100000))};
      edges.push_back(std::move(e));
    }
  }
  return TemporalGraph::build(n, 2, edges);
}

std::vector<std::vector<TokenId>> random_batch(int rows, int len, int32_t vocab, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<TokenId>> seqs(static_cast<size_t>(rows),
                                         std::vector<TokenId>(static_cast<size_t>(len)));
  for (auto& s : seqs)
    for (auto& t : s) t = static_cast<TokenId>(rng.next_below(static_cast<uint64_t>(vocab)));
  return seqs;
}

void bm_temporal_walk(benchmark::State& state) {
  TemporalGraph g = make_graph(2000, 16, 7);
  uint64_t i = 0;
  for (auto _ : state) {
    Walk w = temporal_walk(g, static_cast<NodeId>(i % g.num_nodes()), 20, i);
    ++i;
    benchmark::DoNotOptimize(w.nodes.data());
  }
}
BENCHMARK(bm_temporal_walk);

void bm_walk_batch(benchmark::State& state) {
  TemporalGraph g = make_graph(2000, 16, 7);
  WalkConfig cfg;
  cfg.token_budget = 64;
  cfg.mode = WalkMode::temporal;
  cfg.rng_seed = 11;
  std::vector<NodeId> starts(256);
  for (size_t i = 0; i < starts.size(); ++i)
    starts[i] = static_cast<NodeId>(i % g.num_nodes());
  for (auto _ : state) {
    auto walks = sample_walk_batch(g, starts, cfg);
    ++cfg.batch_counter;
    benchmark::DoNotOptimize(walks.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 256);
}
BENCHMARK(bm_walk_batch);

void bm_assemble_tokens(benchmark::State& state) {
  TemporalGraph g = make_graph(2000, 16, 7);
  Vocabulary vocab = Vocabulary::build(g);
  EdgeTokenTable table(g, vocab);
  Walk w = temporal_walk(g, 3, 20, 5);
  for (auto _ : state) {
    auto toks = assemble_walk_tokens(w, table, vocab, 64);
    benchmark::DoNotOptimize(toks.data());
  }
}
BENCHMARK(bm_assemble_tokens);

template <bool kTrain>
void bm_encoder_forward(benchmark::State& state) {
  ModelConfig mc = ModelConfig::preset("tiny", 2100);
  ModelParams<float> m(mc);
  m.init_weights(5);
  TokenBatch batch = TokenBatch::pack(random_batch(32, 64, mc.vocab_size, 9), mc.max_seq_len);
  for (auto _ : state) {
    EncodeCache<float> cache = encode(m, batch, kTrain, 17);
    benchmark::DoNotOptimize(cache.h().data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 32 * 64);
}
BENCHMARK(bm_encoder_forward<false>)->Name("bm_encoder_forward_infer")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_encoder_forward<true>)->Name("bm_encoder_forward_train")->Unit(benchmark::kMillisecond);

void bm_encoder_backward(benchmark::State& state) {
  ModelConfig mc = ModelConfig::preset("tiny", 2100);
  ModelParams<float> m(mc);
  m.init_weights(5);
  ModelParams<float> grad(mc);
  TokenBatch batch = TokenBatch::pack(random_batch(32, 64, mc.vocab_size, 9), mc.max_seq_len);
  Rng rng(13);
  std::vector<int64_t> positions;
  std::vector<TokenId> targets;
  for (int64_t r = 0; r < batch.rows; ++r)
    for (int64_t p = 0; p < 8; ++p) {
      positions.push_back(batch.flat(r, p * 7));
      targets.push_back(static_cast<TokenId>(rng.next_below(static_cast<uint64_t>(mc.vocab_size))));
    }
  for (auto _ : state) {
    EncodeCache<float> cache = encode(m, batch, true, 17);
    Mat<float> dh = Mat<float>::Zero(cache.h().rows(), cache.h().cols());
    std::fill(grad.flat.begin(), grad.flat.end(), 0.0f);
    mlm_loss_backward(m, cache.h(), positions, targets, dh, grad.flat.data());
    encoder_backward(m, cache, dh, grad.flat.data());
    benchmark::DoNotOptimize(grad.flat.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 32 * 64);
}
BENCHMARK(bm_encoder_backward)->Unit(benchmark::kMillisecond);

void bm_optimizer_step(benchmark::State& state) {
  ModelConfig mc = ModelConfig::preset("tiny", 2100);
  ModelParams<float> m(mc);
  m.init_weights(5);
  ModelParams<float> grad(mc);
  grad.init_weights(6);
  AdamState st(m.flat.size());
  TrainHyper h = TrainHyper::pretrain_defaults();
  for (auto _ : state) {
    optimizer_step(m.flat, grad.flat, st, h, 1e-4);
    benchmark::DoNotOptimize(m.flat.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(m.flat.size()));
}
BENCHMARK(bm_optimizer_step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
