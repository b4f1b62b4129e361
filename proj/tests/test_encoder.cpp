#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "walklm/encoder.hpp"
#include "walklm/model.hpp"
#include "walklm/rng.hpp"

using namespace walklm;

namespace {

ModelConfig micro_config(AttentionMode mode, float dropout = 0.0f) {
  ModelConfig c;
  c.num_layers = 1;
  c.num_heads = 2;
  c.model_dim = 8;
  c.ff_dim = 16;
  c.max_seq_len = 8;
  c.vocab_size = 20;
  c.attention = mode;
  c.dropout = dropout;
  return c;
}

std::vector<std::vector<TokenId>> random_seqs(int rows, int len, int32_t vocab, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<TokenId>> seqs(static_cast<size_t>(rows));
  for (auto& s : seqs) {
    s.resize(static_cast<size_t>(len));
    for (auto& t : s) t = static_cast<TokenId>(rng.next_below(static_cast<uint64_t>(vocab)));
  }
  return seqs;
}

// Mean masked-token CE of a double-precision model on a fixed batch.
double mlm_loss(const ModelParams<double>& m, const TokenBatch& batch,
                const std::vector<int64_t>& pos, const std::vector<TokenId>& targets) {
  EncodeCache<double> c = encode(m, batch);
  return mlm_loss_value(m, c.h(), pos, targets);
}

double cls_loss(const ModelParams<double>& m, const TokenBatch& batch,
                const std::vector<int64_t>& pos, const std::vector<int>& labels) {
  EncodeCache<double> c = encode(m, batch);
  return cls_loss_value(m, c.h(), pos, labels);
}

bool bitwise_equal(const Mat<float>& a, const Mat<float>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

// Central-difference check of every parameter against the analytic gradient.
// Tolerance is relative: |a - n| / max(1, |a|, |n|).
void gradcheck(AttentionMode mode, bool cls_head) {
  ModelConfig cfg = micro_config(mode);
  ModelParams<double> m(cfg);
  m.init_weights(31);

  auto seqs = random_seqs(3, 6, cfg.vocab_size, 77);
  TokenBatch batch = TokenBatch::pack(seqs, cfg.max_seq_len);

  // A few supervised positions per row. Causal rows skip position 0 (no
  // preceding context trains it) by construction of the read positions.
  std::vector<int64_t> pos;
  std::vector<TokenId> targets;
  std::vector<int> labels;
  Rng rng(5);
  for (int64_t r = 0; r < batch.rows; ++r) {
    if (cls_head) {
      pos.push_back(batch.flat(r, 5));
      labels.push_back(static_cast<int>(r % 2));
    } else {
      for (int64_t p : {1, 3, 4}) {
        pos.push_back(batch.flat(r, p));
        targets.push_back(static_cast<TokenId>(rng.next_below(20)));
      }
    }
  }

  // Analytic gradient (mean reduction).
  ModelParams<double> grad(cfg);
  EncodeCache<double> cache = encode(m, batch, /*train=*/true, 0);
  Mat<double> dh = Mat<double>::Zero(cache.h().rows(), cache.h().cols());
  int64_t n = 0;
  if (cls_head) {
    auto [sum, cnt] = cls_loss_backward(m, cache.h(), pos, labels, dh, grad.flat.data());
    (void)sum;
    n = cnt;
  } else {
    auto [sum, cnt] = mlm_loss_backward(m, cache.h(), pos, targets, dh, grad.flat.data());
    (void)sum;
    n = cnt;
  }
  encoder_backward(m, cache, dh, grad.flat.data());
  for (double& g : grad.flat) g /= static_cast<double>(n);

  const double h = 1e-5;
  double worst = 0.0;
  for (size_t i = 0; i < m.flat.size(); ++i) {
    double keep = m.flat[i];
    m.flat[i] = keep + h;
    double fp = cls_head ? cls_loss(m, batch, pos, labels) : mlm_loss(m, batch, pos, targets);
    m.flat[i] = keep - h;
    double fm = cls_head ? cls_loss(m, batch, pos, labels) : mlm_loss(m, batch, pos, targets);
    m.flat[i] = keep;
    double num = (fp - fm) / (2.0 * h);
    double rel = std::abs(grad.flat[i] - num) /
                 std::max({1.0, std::abs(grad.flat[i]), std::abs(num)});
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-4);
}

}  // namespace

TEST_CASE("finite differences confirm the full backward pass (mlm, bidirectional)") {
  gradcheck(AttentionMode::bidirectional, false);
}

TEST_CASE("finite differences confirm the full backward pass (mlm, causal)") {
  gradcheck(AttentionMode::causal, false);
}

TEST_CASE("finite differences confirm the full backward pass (cls head)") {
  gradcheck(AttentionMode::bidirectional, true);
}

TEST_CASE("causal outputs are bitwise invariant to appended future tokens") {
  ModelConfig cfg = micro_config(AttentionMode::causal);
  ModelParams<float> m(cfg);
  m.init_weights(3);

  auto seqs = random_seqs(1, 8, cfg.vocab_size, 11);
  std::vector<TokenId> shorter(seqs[0].begin(), seqs[0].begin() + 5);

  // Same batch, two rows, shared column count: row 1 extends row 0.
  TokenBatch both = TokenBatch::pack({shorter, seqs[0]}, cfg.max_seq_len);
  EncodeCache<float> c = encode(m, both);
  for (int64_t p = 0; p < 5; ++p)
    for (int64_t j = 0; j < cfg.model_dim; ++j)
      CHECK(c.h()(both.flat(0, p), j) == c.h()(both.flat(1, p), j));

  // Separate batches with different padded widths agree too.
  EncodeCache<float> ca = encode(m, TokenBatch::pack({shorter}, cfg.max_seq_len));
  EncodeCache<float> cb = encode(m, TokenBatch::pack({seqs[0]}, cfg.max_seq_len));
  for (int64_t p = 0; p < 5; ++p)
    for (int64_t j = 0; j < cfg.model_dim; ++j) CHECK(ca.h()(p, j) == cb.h()(cb.batch.flat(0, p), j));
}

TEST_CASE("bidirectional outputs do react to appended tokens") {
  ModelConfig cfg = micro_config(AttentionMode::bidirectional);
  ModelParams<float> m(cfg);
  m.init_weights(3);
  auto seqs = random_seqs(1, 8, cfg.vocab_size, 11);
  std::vector<TokenId> shorter(seqs[0].begin(), seqs[0].begin() + 5);
  TokenBatch both = TokenBatch::pack({shorter, seqs[0]}, cfg.max_seq_len);
  EncodeCache<float> c = encode(m, both);
  bool any_diff = false;
  for (int64_t p = 0; p < 5 && !any_diff; ++p)
    for (int64_t j = 0; j < cfg.model_dim; ++j)
      if (c.h()(both.flat(0, p), j) != c.h()(both.flat(1, p), j)) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("suffix padding never changes a row's outputs") {
  ModelConfig cfg = micro_config(AttentionMode::bidirectional);
  ModelParams<float> m(cfg);
  m.init_weights(9);
  auto seqs = random_seqs(2, 4, cfg.vocab_size, 13);
  auto longer = random_seqs(1, 8, cfg.vocab_size, 14);

  // Alone (cols = 4) vs packed next to a longer row (cols = 8, 4 pad columns).
  EncodeCache<float> alone = encode(m, TokenBatch::pack({seqs[0]}, cfg.max_seq_len));
  EncodeCache<float> packed = encode(m, TokenBatch::pack({seqs[0], longer[0]}, cfg.max_seq_len));
  for (int64_t p = 0; p < 4; ++p)
    for (int64_t j = 0; j < cfg.model_dim; ++j)
      CHECK(alone.h()(p, j) == packed.h()(packed.batch.flat(0, p), j));
}

TEST_CASE("row dropout streams depend on the seed and row only") {
  ModelConfig cfg = micro_config(AttentionMode::bidirectional, 0.1f);
  auto seqs = random_seqs(3, 6, cfg.vocab_size, 21);
  TokenBatch b = TokenBatch::pack(seqs, cfg.max_seq_len);

  DropoutMasks<float> a = make_dropout_masks<float>(cfg, b, 42);
  DropoutMasks<float> c = make_dropout_masks<float>(cfg, b, 42);
  REQUIRE(a.active);
  REQUIRE(a.site.size() == 1 + 2 * static_cast<size_t>(cfg.num_layers));
  for (size_t s = 0; s < a.site.size(); ++s) CHECK(bitwise_equal(a.site[s], c.site[s]));

  DropoutMasks<float> d = make_dropout_masks<float>(cfg, b, 43);
  CHECK(!bitwise_equal(a.site[0], d.site[0]));

  // Inverted dropout: entries are 0 or 1/(1-p), zeros near rate p.
  const float scale = 1.0f / 0.9f;
  int64_t zeros = 0, total = 0;
  for (const auto& site : a.site)
    for (int64_t i = 0; i < site.rows(); ++i)
      for (int64_t j = 0; j < site.cols(); ++j) {
        REQUIRE((site(i, j) == 0.0f || site(i, j) == scale));
        zeros += site(i, j) == 0.0f;
        ++total;
      }
  CHECK(static_cast<double>(zeros) / static_cast<double>(total) ==
        doctest::Approx(0.1).epsilon(0.35));

  // Training forward replays bitwise from the dropout seed.
  ModelParams<float> m(cfg);
  m.init_weights(2);
  EncodeCache<float> e1 = encode(m, b, true, 7);
  EncodeCache<float> e2 = encode(m, b, true, 7);
  CHECK(bitwise_equal(e1.h(), e2.h()));
}

TEST_CASE("loss helpers agree with their backward counterparts") {
  ModelConfig cfg = micro_config(AttentionMode::bidirectional);
  ModelParams<float> m(cfg);
  m.init_weights(17);
  auto seqs = random_seqs(4, 6, cfg.vocab_size, 23);
  TokenBatch b = TokenBatch::pack(seqs, cfg.max_seq_len);
  EncodeCache<float> c = encode(m, b, true, 0);

  std::vector<int64_t> pos = {b.flat(0, 1), b.flat(1, 2), b.flat(2, 0), b.flat(3, 5)};
  std::vector<TokenId> targets = {4, 9, 13, 2};
  ModelParams<float> grad(cfg);
  Mat<float> dh = Mat<float>::Zero(c.h().rows(), c.h().cols());
  auto [ce_sum, n] = mlm_loss_backward(m, c.h(), pos, targets, dh, grad.flat.data());
  CHECK(n == 4);
  CHECK(ce_sum / 4.0 == doctest::Approx(mlm_loss_value(m, c.h(), pos, targets)).epsilon(1e-6));

  std::vector<int> labels = {1, 0, 1, 0};
  ModelParams<float> grad2(cfg);
  Mat<float> dh2 = Mat<float>::Zero(c.h().rows(), c.h().cols());
  auto [bce_sum, n2] = cls_loss_backward(m, c.h(), pos, labels, dh2, grad2.flat.data());
  CHECK(n2 == 4);
  CHECK(bce_sum / 4.0 == doctest::Approx(cls_loss_value(m, c.h(), pos, labels)).epsilon(1e-6));

  // Tied head: the lm gradient lands in the token embedding tensor.
  auto dtok = grad.t(ModelParams<float>::kTokEmb);
  CHECK(dtok.cwiseAbs().sum() > 0.0f);
}

TEST_CASE("softmax rows are proper distributions") {
  Mat<float> logits(3, 5);
  Rng rng(9);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 5; ++j)
      logits(i, j) = static_cast<float>(rng.next_real() * 10.0 - 5.0);
  logits(2, 0) = 1e4f;  // extreme value must not overflow
  Mat<double> p = softmax_rows(logits);
  for (int64_t i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < 5; ++j) {
      CHECK(p(i, j) >= 0.0);
      sum += p(i, j);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(p(2, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("encode rejects malformed batches and backward needs a train cache") {
  ModelConfig cfg = micro_config(AttentionMode::bidirectional);
  ModelParams<float> m(cfg);
  m.init_weights(1);

  CHECK_THROWS(TokenBatch::pack({}, cfg.max_seq_len));
  CHECK_THROWS(TokenBatch::pack({std::vector<TokenId>{}}, cfg.max_seq_len));
  CHECK_THROWS(TokenBatch::pack(random_seqs(1, 9, cfg.vocab_size, 1), cfg.max_seq_len));

  auto bad = random_seqs(1, 4, cfg.vocab_size, 2);
  bad[0][2] = cfg.vocab_size;  // out of the model's vocabulary
  CHECK_THROWS(encode(m, TokenBatch::pack(bad, cfg.max_seq_len)));

  TokenBatch b = TokenBatch::pack(random_seqs(1, 4, cfg.vocab_size, 3), cfg.max_seq_len);
  EncodeCache<float> eval_cache = encode(m, b, /*train=*/false);
  Mat<float> dh = Mat<float>::Zero(eval_cache.h().rows(), eval_cache.h().cols());
  ModelParams<float> grad(cfg);
  CHECK_THROWS(encoder_backward(m, eval_cache, dh, grad.flat.data()));

  EncodeCache<float> c = encode(m, b, true, 0);
  CHECK_THROWS(logits_at(m, c.h(), std::vector<int64_t>{c.h().rows()}));  // out of range
}
