#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "walklm/optimizer.hpp"
#include "walklm/walk.hpp"

namespace walklm {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class AttentionMode : uint8_t { bidirectional = 0, causal = 1 };

// BERT-style post-norm encoder shape. ff_dim is 4x model_dim in every preset.
struct ModelConfig {
  int32_t num_layers = 2;
  int32_t num_heads = 2;
  int32_t model_dim = 128;
  int32_t ff_dim = 512;
  int32_t max_seq_len = 128;
  int32_t vocab_size = 0;
  AttentionMode attention = AttentionMode::bidirectional;
  float dropout = 0.1f;

  int32_t head_dim() const { return model_dim / num_heads; }
  void validate() const;

  // "tiny" 128d/2L/2H, "mini" 256/4/4, "medium" 512/8/8, "baseline" 768/12/12.
  static ModelConfig preset(const std::string& name, int32_t vocab_size,
                            AttentionMode mode = AttentionMode::bidirectional);

  bool operator==(const ModelConfig&) const = default;
};

struct TensorSpec {
  std::string name;
  int64_t rows = 0, cols = 0;
  int64_t offset = 0;
  int64_t count() const { return rows * cols; }
};

// Canonical parameter layout for a config; checkpoint files follow this
// order, so any mismatch is caught by name/shape during load.
std::vector<TensorSpec> tensor_specs(const ModelConfig& cfg);
int64_t param_count(const ModelConfig& cfg);

// Flat parameter store plus named Eigen views. The LM head is tied to the
// token embedding (logits = H * tok_emb^T + lm_bias); only the bias is a
// separate tensor.
template <typename S>
struct ModelParams {
  ModelConfig cfg;
  std::vector<TensorSpec> specs;
  std::vector<S> flat;

  ModelParams() = default;
  explicit ModelParams(const ModelConfig& c)
      : cfg(c), specs(tensor_specs(c)), flat(static_cast<size_t>(param_count(c)), S(0)) {
    c.validate();
  }

  // Weight matrices and embeddings ~ N(0, 0.02); biases 0; LayerNorm scales 1.
  void init_weights(uint64_t seed);

  Eigen::Map<Mat<S>> t(size_t i) {
    return {flat.data() + specs[i].offset, specs[i].rows, specs[i].cols};
  }
  Eigen::Map<const Mat<S>> t(size_t i) const {
    return {flat.data() + specs[i].offset, specs[i].rows, specs[i].cols};
  }

  // Layout: 4 global tensors, 16 per layer, 5 head tensors at the end.
  enum : size_t { kTokEmb = 0, kPosEmb = 1, kEmbLnG = 2, kEmbLnB = 3 };
  size_t layer_base(int l) const { return 4 + static_cast<size_t>(l) * 16; }
  Eigen::Map<const Mat<S>> wq(int l) const { return t(layer_base(l) + 0); }
  Eigen::Map<const Mat<S>> bq(int l) const { return t(layer_base(l) + 1); }
  Eigen::Map<const Mat<S>> wk(int l) const { return t(layer_base(l) + 2); }
  Eigen::Map<const Mat<S>> bk(int l) const { return t(layer_base(l) + 3); }
  Eigen::Map<const Mat<S>> wv(int l) const { return t(layer_base(l) + 4); }
  Eigen::Map<const Mat<S>> bv(int l) const { return t(layer_base(l) + 5); }
  Eigen::Map<const Mat<S>> wo(int l) const { return t(layer_base(l) + 6); }
  Eigen::Map<const Mat<S>> bo(int l) const { return t(layer_base(l) + 7); }
  Eigen::Map<const Mat<S>> ln1_g(int l) const { return t(layer_base(l) + 8); }
  Eigen::Map<const Mat<S>> ln1_b(int l) const { return t(layer_base(l) + 9); }
  Eigen::Map<const Mat<S>> w1(int l) const { return t(layer_base(l) + 10); }
  Eigen::Map<const Mat<S>> b1(int l) const { return t(layer_base(l) + 11); }
  Eigen::Map<const Mat<S>> w2(int l) const { return t(layer_base(l) + 12); }
  Eigen::Map<const Mat<S>> b2(int l) const { return t(layer_base(l) + 13); }
  Eigen::Map<const Mat<S>> ln2_g(int l) const { return t(layer_base(l) + 14); }
  Eigen::Map<const Mat<S>> ln2_b(int l) const { return t(layer_base(l) + 15); }
  size_t head_base() const { return 4 + static_cast<size_t>(cfg.num_layers) * 16; }
  Eigen::Map<const Mat<S>> tok_emb() const { return t(kTokEmb); }
  Eigen::Map<const Mat<S>> pos_emb() const { return t(kPosEmb); }
  Eigen::Map<const Mat<S>> emb_ln_g() const { return t(kEmbLnG); }
  Eigen::Map<const Mat<S>> emb_ln_b() const { return t(kEmbLnB); }
  Eigen::Map<const Mat<S>> lm_bias() const { return t(head_base() + 0); }
  Eigen::Map<const Mat<S>> cls_w1() const { return t(head_base() + 1); }
  Eigen::Map<const Mat<S>> cls_b1() const { return t(head_base() + 2); }
  Eigen::Map<const Mat<S>> cls_w2() const { return t(head_base() + 3); }
  Eigen::Map<const Mat<S>> cls_b2() const { return t(head_base() + 4); }

  template <typename T>
  ModelParams<T> cast() const {
    ModelParams<T> out(cfg);
    for (size_t i = 0; i < flat.size(); ++i) out.flat[i] = static_cast<T>(flat[i]);
    return out;
  }
};

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

struct TrainProvenance {
  uint64_t tokens_seen = 0;
  uint32_t epoch = 0;
  double val_auc = std::numeric_limits<double>::quiet_NaN();
  double val_ap = std::numeric_limits<double>::quiet_NaN();
};

// Self-describing model snapshot. Loading verifies magic, version, tensor
// names/shapes against the stored config, and the caller is expected to
// compare vocab_hash before using the model with a vocabulary.
struct Checkpoint {
  ModelParams<float> model;
  WalkMode walk_mode = WalkMode::temporal;
  uint64_t vocab_hash = 0;
  TrainProvenance prov;
  bool has_opt_state = false;
  AdamState opt;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Throws when the checkpoint was trained against a different vocabulary.
  void require_vocab_hash(uint64_t expected) const;
};

}  // namespace walklm
