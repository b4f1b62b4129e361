#include "walklm/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "walklm/binio.hpp"
#include "walklm/rng.hpp"

namespace walklm {

void ModelConfig::validate() const {
  if (num_layers < 1 || num_heads < 1 || model_dim < 1 || ff_dim < 1 || max_seq_len < 1)
    throw std::runtime_error("model config dimensions must be positive");
  if (model_dim % num_heads != 0)
    throw std::runtime_error("model_dim must be divisible by num_heads");
  if (vocab_size < 3) throw std::runtime_error("vocab_size must cover the special tokens");
  if (dropout < 0.0f || dropout >= 1.0f) throw std::runtime_error("dropout must be in [0, 1)");
}

ModelConfig ModelConfig::preset(const std::string& name, int32_t vocab_size, AttentionMode mode) {
  ModelConfig c;
  if (name == "tiny") {
    c.model_dim = 128, c.num_layers = 2, c.num_heads = 2;
  } else if (name == "mini") {
    c.model_dim = 256, c.num_layers = 4, c.num_heads = 4;
  } else if (name == "medium") {
    c.model_dim = 512, c.num_layers = 8, c.num_heads = 8;
  } else if (name == "baseline") {
    c.model_dim = 768, c.num_layers = 12, c.num_heads = 12;
  } else {
    throw std::runtime_error("unknown model preset '" + name +
                             "' (expected tiny, mini, medium or baseline)");
  }
  c.ff_dim = 4 * c.model_dim;
  c.max_seq_len = 128;
  c.vocab_size = vocab_size;
  c.attention = mode;
  // vocab_size 0 is a placeholder filled in from the dataset's vocabulary;
  // ModelParams construction still validates the final config.
  if (vocab_size != 0) c.validate();
  return c;
}

std::vector<TensorSpec> tensor_specs(const ModelConfig& cfg) {
  std::vector<TensorSpec> specs;
  int64_t d = cfg.model_dim, ff = cfg.ff_dim, v = cfg.vocab_size, s = cfg.max_seq_len;
  auto add = [&specs](std::string name, int64_t r, int64_t c) {
    int64_t off = specs.empty() ? 0 : specs.back().offset + specs.back().count();
    specs.push_back({std::move(name), r, c, off});
  };
  add("tok_emb", v, d);
  add("pos_emb", s, d);
  add("emb_ln_g", 1, d);
  add("emb_ln_b", 1, d);
  for (int l = 0; l < cfg.num_layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    add(p + "wq", d, d);
    add(p + "bq", 1, d);
    add(p + "wk", d, d);
    add(p + "bk", 1, d);
    add(p + "wv", d, d);
    add(p + "bv", 1, d);
    add(p + "wo", d, d);
    add(p + "bo", 1, d);
    add(p + "ln1_g", 1, d);
    add(p + "ln1_b", 1, d);
    add(p + "w1", d, ff);
    add(p + "b1", 1, ff);
    add(p + "w2", ff, d);
    add(p + "b2", 1, d);
    add(p + "ln2_g", 1, d);
    add(p + "ln2_b", 1, d);
  }
  add("lm_bias", 1, v);
  add("cls_w1", d, d);
  add("cls_b1", 1, d);
  add("cls_w2", d, 1);
  add("cls_b2", 1, 1);
  return specs;
}

int64_t param_count(const ModelConfig& cfg) {
  auto specs = tensor_specs(cfg);
  return specs.back().offset + specs.back().count();
}

namespace {
bool is_ln_gain(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, "_g") == 0;
}
bool is_bias(const std::string& name) {
  return name.find("bias") != std::string::npos ||
         (name.size() >= 2 && name.compare(name.size() - 2, 2, "_b") == 0) ||
         name.find(".b") != std::string::npos;
}
}  // namespace

template <typename S>
void ModelParams<S>::init_weights(uint64_t seed) {
  Rng rng(hash_stream(seed, {0x1217ULL}));
  for (const TensorSpec& spec : specs) {
    S* p = flat.data() + spec.offset;
    if (is_ln_gain(spec.name)) {
      for (int64_t i = 0; i < spec.count(); ++i) p[i] = S(1);
    } else if (is_bias(spec.name)) {
      for (int64_t i = 0; i < spec.count(); ++i) p[i] = S(0);
    } else {
      // Box-Muller; 0.02 std as in the original BERT initialization.
      for (int64_t i = 0; i < spec.count(); ++i) {
        double u1 = 1.0 - rng.next_real();
        double u2 = rng.next_real();
        p[i] = static_cast<S>(0.02 * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
      }
    }
  }
}

template struct ModelParams<float>;
template struct ModelParams<double>;

// ---------------------------------------------------------------------------
// checkpoint serialization

static constexpr char kCkptMagic[4] = {'W', 'L', 'C', 'K'};
static constexpr uint32_t kCkptVersion = 1;

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kCkptMagic, 4);
  write_u32(os, kCkptVersion);
  const ModelConfig& c = model.cfg;
  write_u32(os, static_cast<uint32_t>(c.num_layers));
  write_u32(os, static_cast<uint32_t>(c.num_heads));
  write_u32(os, static_cast<uint32_t>(c.model_dim));
  write_u32(os, static_cast<uint32_t>(c.ff_dim));
  write_u32(os, static_cast<uint32_t>(c.max_seq_len));
  write_u32(os, static_cast<uint32_t>(c.vocab_size));
  write_u8(os, static_cast<uint8_t>(c.attention));
  write_f32(os, c.dropout);
  write_u8(os, static_cast<uint8_t>(walk_mode));
  write_u64(os, vocab_hash);
  write_u64(os, prov.tokens_seen);
  write_u32(os, prov.epoch);
  write_f64(os, prov.val_auc);
  write_f64(os, prov.val_ap);

  write_u64(os, model.specs.size());
  for (const TensorSpec& spec : model.specs) {
    write_string(os, spec.name);
    write_u64(os, static_cast<uint64_t>(spec.rows));
    write_u64(os, static_cast<uint64_t>(spec.cols));
    os.write(reinterpret_cast<const char*>(model.flat.data() + spec.offset),
             static_cast<std::streamsize>(spec.count() * sizeof(float)));
  }
  write_u8(os, has_opt_state ? 1 : 0);
  if (has_opt_state) {
    write_u64(os, opt.step);
    write_array(os, opt.m);
    write_array(os, opt.v);
  }
  if (!os) throw std::runtime_error("write failure on '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw std::runtime_error("'" + path + "' is not a checkpoint file (bad magic)");
  uint32_t version = read_u32(is, "checkpoint version");
  if (version != kCkptVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  ModelConfig c;
  c.num_layers = static_cast<int32_t>(read_u32(is, "num_layers"));
  c.num_heads = static_cast<int32_t>(read_u32(is, "num_heads"));
  c.model_dim = static_cast<int32_t>(read_u32(is, "model_dim"));
  c.ff_dim = static_cast<int32_t>(read_u32(is, "ff_dim"));
  c.max_seq_len = static_cast<int32_t>(read_u32(is, "max_seq_len"));
  c.vocab_size = static_cast<int32_t>(read_u32(is, "vocab_size"));
  c.attention = static_cast<AttentionMode>(read_u8(is, "attention mode"));
  c.dropout = read_f32(is, "dropout");

  Checkpoint ck;
  ck.model = ModelParams<float>(c);
  ck.walk_mode = static_cast<WalkMode>(read_u8(is, "walk mode"));
  ck.vocab_hash = read_u64(is, "vocab hash");
  ck.prov.tokens_seen = read_u64(is, "tokens_seen");
  ck.prov.epoch = read_u32(is, "epoch");
  ck.prov.val_auc = read_f64(is, "val_auc");
  ck.prov.val_ap = read_f64(is, "val_ap");

  uint64_t n_tensors = read_u64(is, "tensor count");
  if (n_tensors != ck.model.specs.size())
    throw std::runtime_error("checkpoint tensor count does not match its config");
  for (const TensorSpec& spec : ck.model.specs) {
    std::string name = read_string(is, "tensor name");
    uint64_t rows = read_u64(is, "tensor rows");
    uint64_t cols = read_u64(is, "tensor cols");
    if (name != spec.name || rows != static_cast<uint64_t>(spec.rows) ||
        cols != static_cast<uint64_t>(spec.cols))
      throw std::runtime_error("checkpoint tensor '" + name + "' does not match expected '" +
                               spec.name + "' [" + std::to_string(spec.rows) + "x" +
                               std::to_string(spec.cols) + "]");
    is.read(reinterpret_cast<char*>(ck.model.flat.data() + spec.offset),
            static_cast<std::streamsize>(spec.count() * sizeof(float)));
    if (!is) throw std::runtime_error("truncated checkpoint while reading tensor '" + name + "'");
  }
  ck.has_opt_state = read_u8(is, "optimizer flag") != 0;
  if (ck.has_opt_state) {
    ck.opt.step = read_u64(is, "optimizer step");
    ck.opt.m = read_array<float>(is, "adam m");
    ck.opt.v = read_array<float>(is, "adam v");
    if (ck.opt.m.size() != ck.model.flat.size() || ck.opt.v.size() != ck.model.flat.size())
      throw std::runtime_error("checkpoint optimizer state does not match parameter count");
  }
  return ck;
}

void Checkpoint::require_vocab_hash(uint64_t expected) const {
  if (vocab_hash != expected)
    throw std::runtime_error(
        "checkpoint was trained against a different vocabulary (hash mismatch); "
        "refusing to run with mismatched token ids");
}

}  // namespace walklm
