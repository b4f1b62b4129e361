#pragma once

// Post-norm BERT-style encoder over token-id batches: learned absolute
// positions, LayerNorm'd embeddings, per-head scaled dot-product attention,
// GELU feed-forward, tied LM head. Forward and backward are written by hand
// on Eigen primitives; the backward pass mirrors the stored activations in
// EncodeCache. Templated on the scalar so the finite-difference gradient
// check can run the identical code in double precision.
//
// Attention never uses additive -inf masks: every query row attends to an
// explicit contiguous key range [0, k_i) with k_i = i+1 in causal mode and
// k_i = valid_len in bidirectional mode. Padding is suffix-only, so position
// i's output depends exclusively on tokens [0, max(k_i, i+1)) and appending
// tokens to a sequence cannot perturb earlier causal logits even at the
// bit level.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "walklm/model.hpp"
#include "walklm/rng.hpp"
#include "walklm/tokenizer.hpp"

namespace walklm {

struct TokenBatch {
  int64_t rows = 0, cols = 0;
  std::vector<TokenId> ids;        // rows*cols, [PAD]-padded on the right
  std::vector<int32_t> valid_len;  // per row, >= 1

  int64_t flat(int64_t r, int64_t p) const { return r * cols + p; }
  TokenId id(int64_t r, int64_t p) const { return ids[static_cast<size_t>(flat(r, p))]; }

  static TokenBatch pack(const std::vector<std::vector<TokenId>>& seqs, int32_t max_len_cap) {
    if (seqs.empty()) throw std::runtime_error("cannot pack an empty batch");
    TokenBatch b;
    b.rows = static_cast<int64_t>(seqs.size());
    for (const auto& s : seqs) {
      if (s.empty()) throw std::runtime_error("cannot pack an empty sequence");
      b.cols = std::max<int64_t>(b.cols, static_cast<int64_t>(s.size()));
    }
    if (b.cols > max_len_cap)
      throw std::runtime_error("sequence length " + std::to_string(b.cols) +
                               " exceeds the model's max_seq_len " + std::to_string(max_len_cap));
    b.ids.assign(static_cast<size_t>(b.rows * b.cols), Vocabulary::kPad);
    b.valid_len.resize(static_cast<size_t>(b.rows));
    for (int64_t r = 0; r < b.rows; ++r) {
      const auto& s = seqs[static_cast<size_t>(r)];
      b.valid_len[static_cast<size_t>(r)] = static_cast<int32_t>(s.size());
      std::copy(s.begin(), s.end(), b.ids.begin() + static_cast<size_t>(r * b.cols));
    }
    return b;
  }
};

// ---------------------------------------------------------------------------
// dropout

// Inverted dropout masks, one (rows*cols) x d matrix per site: embeddings,
// then attention-output and ff-output per layer. Each sequence row draws its
// own substream hash(seed, row) consumed in fixed site order, so masks do
// not depend on how a batch was chunked across workers.
template <typename S>
struct DropoutMasks {
  std::vector<Mat<S>> site;
  bool active = false;
};

template <typename S>
DropoutMasks<S> make_dropout_masks(const ModelConfig& cfg, const TokenBatch& b, uint64_t seed) {
  DropoutMasks<S> m;
  if (cfg.dropout <= 0.0f) return m;
  m.active = true;
  const int sites = 1 + 2 * cfg.num_layers;
  const int64_t d = cfg.model_dim;
  m.site.assign(static_cast<size_t>(sites), Mat<S>(b.rows * b.cols, d));
  const auto threshold = static_cast<uint64_t>(static_cast<double>(cfg.dropout) * 0x1p64);
  const S scale = S(1) / (S(1) - static_cast<S>(cfg.dropout));
  for (int64_t r = 0; r < b.rows; ++r) {
    Rng rng(hash_stream(seed, {static_cast<uint64_t>(r)}));
    for (int s = 0; s < sites; ++s) {
      auto block = m.site[static_cast<size_t>(s)].middleRows(r * b.cols, b.cols);
      for (int64_t i = 0; i < b.cols; ++i)
        for (int64_t j = 0; j < d; ++j) block(i, j) = rng.next_u64() < threshold ? S(0) : scale;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// layer norm

template <typename S>
void ln_forward(const Mat<S>& x, Eigen::Map<const Mat<S>> g, Eigen::Map<const Mat<S>> b,
                Mat<S>& n, Vec<S>& inv, Mat<S>& y) {
  const S eps = S(1e-12);
  const int64_t rows = x.rows();
  n.resize(rows, x.cols());
  inv.resize(rows);
  y.resize(rows, x.cols());
  for (int64_t i = 0; i < rows; ++i) {
    S mu = x.row(i).mean();
    S var = (x.row(i).array() - mu).square().mean();
    S is = S(1) / std::sqrt(var + eps);
    inv(i) = is;
    n.row(i) = (x.row(i).array() - mu) * is;
    y.row(i) = n.row(i).cwiseProduct(g.row(0)) + b.row(0);
  }
}

template <typename S>
void ln_backward(const Mat<S>& dy, const Mat<S>& n, const Vec<S>& inv,
                 Eigen::Map<const Mat<S>> g, Mat<S>& dx, Eigen::Map<Mat<S>> dg,
                 Eigen::Map<Mat<S>> db) {
  const int64_t rows = dy.rows();
  dx.resize(rows, dy.cols());
  for (int64_t i = 0; i < rows; ++i) {
    auto dn = dy.row(i).cwiseProduct(g.row(0));
    S m1 = dn.mean();
    S m2 = dn.cwiseProduct(n.row(i)).mean();
    dx.row(i) = (dn.array() - m1 - n.row(i).array() * m2) * inv(i);
    dg.row(0) += dy.row(i).cwiseProduct(n.row(i));
    db.row(0) += dy.row(i);
  }
}

// ---------------------------------------------------------------------------
// activations

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(M_SQRT1_2)));
}

template <typename S>
S gelu_grad(S x) {
  S cdf = S(0.5) * (S(1) + std::erf(x * S(M_SQRT1_2)));
  S pdf = S(0.39894228040143268) * std::exp(S(-0.5) * x * x);
  return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// forward

template <typename S>
struct LayerCache {
  Mat<S> q, k, v, ctx;
  std::vector<Mat<S>> probs;  // rows*heads entries, len x len each
  Mat<S> n1, x1, u, g_act, n2;
  Vec<S> inv1, inv2;
};

template <typename S>
struct EncodeCache {
  TokenBatch batch;
  bool train = false;
  DropoutMasks<S> drop;
  Mat<S> n0;
  Vec<S> inv0;
  std::vector<Mat<S>> z;  // layer inputs; z[num_layers] is the final hidden state
  std::vector<LayerCache<S>> layers;

  const Mat<S>& h() const { return z.back(); }
};

template <typename S>
EncodeCache<S> encode(const ModelParams<S>& m, TokenBatch batch, bool train = false,
                      uint64_t dropout_seed = 0) {
  const ModelConfig& cfg = m.cfg;
  const int64_t R = batch.rows, L = batch.cols, d = cfg.model_dim;
  const int64_t H = cfg.num_heads, dh = cfg.head_dim();
  if (L > cfg.max_seq_len) throw std::runtime_error("batch exceeds max_seq_len");
  for (TokenId id : batch.ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw std::runtime_error("token id " + std::to_string(id) + " outside model vocabulary");
  for (int64_t r = 0; r < R; ++r) {
    int32_t len = batch.valid_len[static_cast<size_t>(r)];
    if (len < 1 || len > L) throw std::runtime_error("batch valid_len out of range");
  }

  EncodeCache<S> c;
  c.batch = std::move(batch);
  c.train = train;
  if (train) c.drop = make_dropout_masks<S>(cfg, c.batch, dropout_seed);
  const bool causal = cfg.attention == AttentionMode::causal;

  // Embeddings. Pad rows stay exactly zero; nothing downstream reads them.
  Mat<S> x0 = Mat<S>::Zero(R * L, d);
  auto tok = m.tok_emb();
  auto pos = m.pos_emb();
  for (int64_t r = 0; r < R; ++r)
    for (int64_t i = 0; i < c.batch.valid_len[static_cast<size_t>(r)]; ++i)
      x0.row(r * L + i) = tok.row(c.batch.id(r, i)) + pos.row(i);

  Mat<S> y0;
  ln_forward<S>(x0, m.emb_ln_g(), m.emb_ln_b(), c.n0, c.inv0, y0);
  if (c.drop.active) y0 = y0.cwiseProduct(c.drop.site[0]);
  c.z.reserve(static_cast<size_t>(cfg.num_layers) + 1);
  c.z.push_back(std::move(y0));

  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  for (int l = 0; l < cfg.num_layers; ++l) {
    LayerCache<S> lc;
    const Mat<S>& zin = c.z.back();
    lc.q = zin * m.wq(l);
    lc.q.rowwise() += m.bq(l).row(0);
    lc.k = zin * m.wk(l);
    lc.k.rowwise() += m.bk(l).row(0);
    lc.v = zin * m.wv(l);
    lc.v.rowwise() += m.bv(l).row(0);

    lc.ctx = Mat<S>::Zero(R * L, d);
    lc.probs.assign(static_cast<size_t>(R * H), Mat<S>());
    for (int64_t r = 0; r < R; ++r) {
      const int64_t len = c.batch.valid_len[static_cast<size_t>(r)];
      const int64_t base = r * L;
      for (int64_t hh = 0; hh < H; ++hh) {
        auto Q = lc.q.block(base, hh * dh, len, dh);
        auto K = lc.k.block(base, hh * dh, len, dh);
        auto V = lc.v.block(base, hh * dh, len, dh);
        Mat<S>& P = lc.probs[static_cast<size_t>(r * H + hh)];
        P = Mat<S>::Zero(len, len);
        for (int64_t i = 0; i < len; ++i) {
          const int64_t kr = causal ? i + 1 : len;
          S mx = std::numeric_limits<S>::lowest();
          for (int64_t j = 0; j < kr; ++j) {
            S s = Q.row(i).dot(K.row(j)) * scale;
            P(i, j) = s;
            mx = std::max(mx, s);
          }
          S sum = S(0);
          for (int64_t j = 0; j < kr; ++j) {
            P(i, j) = std::exp(P(i, j) - mx);
            sum += P(i, j);
          }
          const S inv_sum = S(1) / sum;
          auto cvec = lc.ctx.block(base + i, hh * dh, 1, dh);
          for (int64_t j = 0; j < kr; ++j) {
            P(i, j) *= inv_sum;
            cvec += P(i, j) * V.row(j);
          }
        }
      }
    }

    Mat<S> attn = lc.ctx * m.wo(l);
    attn.rowwise() += m.bo(l).row(0);
    if (c.drop.active) attn = attn.cwiseProduct(c.drop.site[static_cast<size_t>(1 + 2 * l)]);
    Mat<S> r1 = zin + attn;
    ln_forward<S>(r1, m.ln1_g(l), m.ln1_b(l), lc.n1, lc.inv1, lc.x1);

    lc.u = lc.x1 * m.w1(l);
    lc.u.rowwise() += m.b1(l).row(0);
    lc.g_act = lc.u.unaryExpr([](S x) { return gelu(x); });
    Mat<S> f = lc.g_act * m.w2(l);
    f.rowwise() += m.b2(l).row(0);
    if (c.drop.active) f = f.cwiseProduct(c.drop.site[static_cast<size_t>(2 + 2 * l)]);
    Mat<S> r2 = lc.x1 + f;
    Mat<S> z_next;
    ln_forward<S>(r2, m.ln2_g(l), m.ln2_b(l), lc.n2, lc.inv2, z_next);
    c.z.push_back(std::move(z_next));
    c.layers.push_back(std::move(lc));
  }
  return c;
}

// ---------------------------------------------------------------------------
// backward

template <typename S>
Eigen::Map<Mat<S>> grad_view(S* grad, const std::vector<TensorSpec>& specs, size_t i) {
  return {grad + specs[i].offset, specs[i].rows, specs[i].cols};
}

// Backpropagates dH (gradient w.r.t. the final hidden states, zero at pad
// positions) through the encoder and embeddings, accumulating into the flat
// gradient buffer. Sum reduction: the caller applies any 1/N scaling.
template <typename S>
void encoder_backward(const ModelParams<S>& m, const EncodeCache<S>& c, const Mat<S>& dh_final,
                      S* grad) {
  if (!c.train) throw std::runtime_error("backward requires a cache built with train=true");
  const ModelConfig& cfg = m.cfg;
  const int64_t R = c.batch.rows, L = c.batch.cols, d = cfg.model_dim;
  const int64_t H = cfg.num_heads, dh = cfg.head_dim();
  const bool causal = cfg.attention == AttentionMode::causal;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  const auto& specs = m.specs;

  Mat<S> dz = dh_final;
  Mat<S> dr2, dr1, dx_tmp;
  for (int l = cfg.num_layers - 1; l >= 0; --l) {
    const LayerCache<S>& lc = c.layers[static_cast<size_t>(l)];
    const Mat<S>& zin = c.z[static_cast<size_t>(l)];
    const size_t lb = m.layer_base(l);

    ln_backward<S>(dz, lc.n2, lc.inv2, m.ln2_g(l), dr2, grad_view(grad, specs, lb + 14),
                   grad_view(grad, specs, lb + 15));

    Mat<S> df = c.drop.active ? dr2.cwiseProduct(c.drop.site[static_cast<size_t>(2 + 2 * l)]).eval()
                              : dr2;
    grad_view(grad, specs, lb + 12) += lc.g_act.transpose() * df;          // w2
    grad_view(grad, specs, lb + 13).row(0) += df.colwise().sum();          // b2
    Mat<S> dg = df * m.w2(l).transpose();
    Mat<S> du = dg.cwiseProduct(lc.u.unaryExpr([](S x) { return gelu_grad(x); }));
    grad_view(grad, specs, lb + 10) += lc.x1.transpose() * du;             // w1
    grad_view(grad, specs, lb + 11).row(0) += du.colwise().sum();          // b1
    Mat<S> dx1 = dr2 + du * m.w1(l).transpose();

    ln_backward<S>(dx1, lc.n1, lc.inv1, m.ln1_g(l), dr1, grad_view(grad, specs, lb + 8),
                   grad_view(grad, specs, lb + 9));

    Mat<S> da = c.drop.active ? dr1.cwiseProduct(c.drop.site[static_cast<size_t>(1 + 2 * l)]).eval()
                              : dr1;
    grad_view(grad, specs, lb + 6) += lc.ctx.transpose() * da;             // wo
    grad_view(grad, specs, lb + 7).row(0) += da.colwise().sum();           // bo
    Mat<S> dctx = da * m.wo(l).transpose();

    Mat<S> dq = Mat<S>::Zero(R * L, d), dk = Mat<S>::Zero(R * L, d), dv = Mat<S>::Zero(R * L, d);
    std::vector<S> dp;
    for (int64_t r = 0; r < R; ++r) {
      const int64_t len = c.batch.valid_len[static_cast<size_t>(r)];
      const int64_t base = r * L;
      for (int64_t hh = 0; hh < H; ++hh) {
        auto Q = lc.q.block(base, hh * dh, len, dh);
        auto K = lc.k.block(base, hh * dh, len, dh);
        auto V = lc.v.block(base, hh * dh, len, dh);
        auto dQ = dq.block(base, hh * dh, len, dh);
        auto dK = dk.block(base, hh * dh, len, dh);
        auto dV = dv.block(base, hh * dh, len, dh);
        auto dC = dctx.block(base, hh * dh, len, dh);
        const Mat<S>& P = lc.probs[static_cast<size_t>(r * H + hh)];
        for (int64_t i = 0; i < len; ++i) {
          const int64_t kr = causal ? i + 1 : len;
          dp.assign(static_cast<size_t>(kr), S(0));
          S pik_dot = S(0);
          for (int64_t j = 0; j < kr; ++j) {
            dp[static_cast<size_t>(j)] = dC.row(i).dot(V.row(j));
            dV.row(j) += P(i, j) * dC.row(i);
            pik_dot += P(i, j) * dp[static_cast<size_t>(j)];
          }
          for (int64_t j = 0; j < kr; ++j) {
            S ds = P(i, j) * (dp[static_cast<size_t>(j)] - pik_dot) * scale;
            dQ.row(i) += ds * K.row(j);
            dK.row(j) += ds * Q.row(i);
          }
        }
      }
    }
    grad_view(grad, specs, lb + 0) += zin.transpose() * dq;  // wq
    grad_view(grad, specs, lb + 1).row(0) += dq.colwise().sum();
    grad_view(grad, specs, lb + 2) += zin.transpose() * dk;  // wk
    grad_view(grad, specs, lb + 3).row(0) += dk.colwise().sum();
    grad_view(grad, specs, lb + 4) += zin.transpose() * dv;  // wv
    grad_view(grad, specs, lb + 5).row(0) += dv.colwise().sum();

    dz = dr1 + dq * m.wq(l).transpose() + dk * m.wk(l).transpose() + dv * m.wv(l).transpose();
  }

  Mat<S> dy0 = c.drop.active ? dz.cwiseProduct(c.drop.site[0]).eval() : dz;
  ln_backward<S>(dy0, c.n0, c.inv0, m.emb_ln_g(), dx_tmp,
                 grad_view(grad, specs, ModelParams<S>::kEmbLnG),
                 grad_view(grad, specs, ModelParams<S>::kEmbLnB));
  auto dtok = grad_view(grad, specs, ModelParams<S>::kTokEmb);
  auto dpos = grad_view(grad, specs, ModelParams<S>::kPosEmb);
  for (int64_t r = 0; r < R; ++r)
    for (int64_t i = 0; i < c.batch.valid_len[static_cast<size_t>(r)]; ++i) {
      dtok.row(c.batch.id(r, i)) += dx_tmp.row(r * L + i);
      dpos.row(i) += dx_tmp.row(r * L + i);
    }
}

// ---------------------------------------------------------------------------
// heads and losses

template <typename S>
Mat<S> gather_rows(const Mat<S>& h, const std::vector<int64_t>& pos) {
  Mat<S> out(static_cast<int64_t>(pos.size()), h.cols());
  for (size_t i = 0; i < pos.size(); ++i) {
    if (pos[i] < 0 || pos[i] >= h.rows()) throw std::runtime_error("gather position out of range");
    out.row(static_cast<int64_t>(i)) = h.row(pos[i]);
  }
  return out;
}

// LM logits at selected flat positions (row*cols + pos): H_sel * tok_emb^T
// + lm_bias. Computing only selected rows keeps the vocab-sized GEMM small.
template <typename S>
Mat<S> logits_at(const ModelParams<S>& m, const Mat<S>& h, const std::vector<int64_t>& pos) {
  Mat<S> hs = gather_rows(h, pos);
  Mat<S> lg = hs * m.tok_emb().transpose();
  lg.rowwise() += m.lm_bias().row(0);
  return lg;
}

// Mean cross-entropy building block. Returns the CE *sum* over rows; if
// dlogits is non-null it receives softmax(logits) - onehot(target), i.e. the
// sum-reduction gradient.
template <typename S>
double ce_from_logits(const Mat<S>& logits, const std::vector<TokenId>& targets, Mat<S>* dlogits) {
  if (static_cast<size_t>(logits.rows()) != targets.size())
    throw std::runtime_error("logit rows and target count differ");
  if (dlogits) dlogits->resize(logits.rows(), logits.cols());
  double ce_sum = 0.0;
  for (int64_t i = 0; i < logits.rows(); ++i) {
    TokenId t = targets[static_cast<size_t>(i)];
    if (t < 0 || t >= logits.cols()) throw std::runtime_error("target token id out of range");
    S mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (int64_t j = 0; j < logits.cols(); ++j) sum += std::exp(static_cast<double>(logits(i, j) - mx));
    double lse = static_cast<double>(mx) + std::log(sum);
    ce_sum += lse - static_cast<double>(logits(i, t));
    if (dlogits) {
      for (int64_t j = 0; j < logits.cols(); ++j)
        (*dlogits)(i, j) = static_cast<S>(std::exp(static_cast<double>(logits(i, j)) - lse));
      (*dlogits)(i, t) -= S(1);
    }
  }
  return ce_sum;
}

// Masked-token CE at the given positions. Accumulates the tied-embedding and
// lm_bias gradients into `grad`, adds dH rows in place, and returns
// (ce_sum, row count) so the caller can form the batch mean.
template <typename S>
std::pair<double, int64_t> mlm_loss_backward(const ModelParams<S>& m, const Mat<S>& h,
                                             const std::vector<int64_t>& pos,
                                             const std::vector<TokenId>& targets, Mat<S>& dh,
                                             S* grad) {
  if (pos.empty()) return {0.0, 0};
  Mat<S> logits = logits_at(m, h, pos);
  Mat<S> dlogits;
  double ce = ce_from_logits(logits, targets, &dlogits);
  Mat<S> hs = gather_rows(h, pos);
  Mat<S> dhs = dlogits * m.tok_emb();
  for (size_t i = 0; i < pos.size(); ++i) dh.row(pos[i]) += dhs.row(static_cast<int64_t>(i));
  grad_view(grad, m.specs, ModelParams<S>::kTokEmb) += dlogits.transpose() * hs;
  grad_view(grad, m.specs, m.head_base() + 0).row(0) += dlogits.colwise().sum();
  return {ce, static_cast<int64_t>(pos.size())};
}

template <typename S>
double mlm_loss_value(const ModelParams<S>& m, const Mat<S>& h, const std::vector<int64_t>& pos,
                      const std::vector<TokenId>& targets) {
  if (pos.empty()) return 0.0;
  return ce_from_logits(logits_at(m, h, pos), targets, static_cast<Mat<S>*>(nullptr)) /
         static_cast<double>(pos.size());
}

// Binary head: logit = w2 . tanh(W1 h + b1) + b2, read at one position per
// sequence (the [CLS] slot).
template <typename S>
Vec<S> cls_logits(const ModelParams<S>& m, const Mat<S>& h, const std::vector<int64_t>& pos) {
  Mat<S> hs = gather_rows(h, pos);
  Mat<S> a = hs * m.cls_w1();
  a.rowwise() += m.cls_b1().row(0);
  Mat<S> t = a.array().tanh().matrix();
  Vec<S> z = (t * m.cls_w2()).col(0);
  z.array() += m.cls_b2()(0, 0);
  return z;
}

template <typename S>
double stable_sigmoid(S z) {
  double zd = static_cast<double>(z);
  if (zd >= 0.0) return 1.0 / (1.0 + std::exp(-zd));
  double e = std::exp(zd);
  return e / (1.0 + e);
}

// BCE-with-logits (sum reduction) plus full backward through the CLS head;
// dH rows are added in place. Returns (loss_sum, row count).
template <typename S>
std::pair<double, int64_t> cls_loss_backward(const ModelParams<S>& m, const Mat<S>& h,
                                             const std::vector<int64_t>& pos,
                                             const std::vector<int>& labels, Mat<S>& dh, S* grad) {
  if (pos.size() != labels.size()) throw std::runtime_error("cls positions and labels differ");
  if (pos.empty()) return {0.0, 0};
  Mat<S> hs = gather_rows(h, pos);
  Mat<S> a = hs * m.cls_w1();
  a.rowwise() += m.cls_b1().row(0);
  Mat<S> t = a.array().tanh().matrix();
  Vec<S> z = (t * m.cls_w2()).col(0);
  z.array() += m.cls_b2()(0, 0);

  double loss = 0.0;
  Vec<S> dz(z.size());
  for (int64_t i = 0; i < z.size(); ++i) {
    double y = labels[static_cast<size_t>(i)] ? 1.0 : 0.0;
    double zd = static_cast<double>(z(i));
    loss += std::max(zd, 0.0) - zd * y + std::log1p(std::exp(-std::abs(zd)));
    dz(i) = static_cast<S>(stable_sigmoid(z(i)) - y);
  }

  grad_view(grad, m.specs, m.head_base() + 3) += t.transpose() * dz;  // cls_w2
  grad_view(grad, m.specs, m.head_base() + 4)(0, 0) += dz.sum();      // cls_b2
  Mat<S> dt = dz * m.cls_w2().transpose();                            // n x d outer product
  Mat<S> da = dt.cwiseProduct((Mat<S>::Ones(t.rows(), t.cols()) - t.cwiseProduct(t)));
  grad_view(grad, m.specs, m.head_base() + 1) += hs.transpose() * da;  // cls_w1
  grad_view(grad, m.specs, m.head_base() + 2).row(0) += da.colwise().sum();
  Mat<S> dhs = da * m.cls_w1().transpose();
  for (size_t i = 0; i < pos.size(); ++i) dh.row(pos[i]) += dhs.row(static_cast<int64_t>(i));
  return {loss, static_cast<int64_t>(pos.size())};
}

template <typename S>
double cls_loss_value(const ModelParams<S>& m, const Mat<S>& h, const std::vector<int64_t>& pos,
                      const std::vector<int>& labels) {
  Vec<S> z = cls_logits(m, h, pos);
  double loss = 0.0;
  for (int64_t i = 0; i < z.size(); ++i) {
    double y = labels[static_cast<size_t>(i)] ? 1.0 : 0.0;
    double zd = static_cast<double>(z(i));
    loss += std::max(zd, 0.0) - zd * y + std::log1p(std::exp(-std::abs(zd)));
  }
  return loss / static_cast<double>(pos.size());
}

// Row-wise softmax in double precision; used at scoring time where products
// of several probabilities are formed.
template <typename S>
Mat<double> softmax_rows(const Mat<S>& logits) {
  Mat<double> p(logits.rows(), logits.cols());
  for (int64_t i = 0; i < logits.rows(); ++i) {
    double mx = static_cast<double>(logits.row(i).maxCoeff());
    double sum = 0.0;
    for (int64_t j = 0; j < logits.cols(); ++j) {
      p(i, j) = std::exp(static_cast<double>(logits(i, j)) - mx);
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return p;
}

}  // namespace walklm
