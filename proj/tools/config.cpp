#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace walklm::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::vector<std::string>& known,
                    const std::string& where) {
  if (!obj.is_object()) throw std::runtime_error("config section '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw std::runtime_error("unknown config key '" + where + "." + it.key() + "'");
}

LrDecay decay_from_string(const std::string& s) {
  if (s == "linear") return LrDecay::linear;
  if (s == "cosine") return LrDecay::cosine;
  throw std::runtime_error("decay must be 'linear' or 'cosine', got '" + s + "'");
}

std::string decay_to_string(LrDecay d) { return d == LrDecay::linear ? "linear" : "cosine"; }

void read_hyper(const json& j, const std::string& where, TrainHyper& h) {
  h.batch_size = j.value("batch_size", h.batch_size);
  h.max_lr = j.value("max_lr", h.max_lr);
  h.beta1 = j.value("beta1", h.beta1);
  h.beta2 = j.value("beta2", h.beta2);
  h.eps = j.value("eps", h.eps);
  h.max_grad_norm = j.value("max_grad_norm", h.max_grad_norm);
  h.weight_decay = j.value("weight_decay", h.weight_decay);
  h.warmup_divisor = j.value("warmup_divisor", h.warmup_divisor);
  if (j.contains("decay")) h.decay = decay_from_string(j.at("decay").get<std::string>());
  if (h.batch_size < 1) throw std::runtime_error(where + ".batch_size must be positive");
}

json hyper_json(const TrainHyper& h) {
  return json{{"batch_size", h.batch_size},       {"max_lr", h.max_lr},
              {"beta1", h.beta1},                 {"beta2", h.beta2},
              {"eps", h.eps},                     {"max_grad_norm", h.max_grad_norm},
              {"weight_decay", h.weight_decay},   {"warmup_divisor", h.warmup_divisor},
              {"decay", decay_to_string(h.decay)}};
}

const std::vector<std::string> kHyperKeys = {"batch_size",    "max_lr",         "beta1",
                                             "beta2",         "eps",            "max_grad_norm",
                                             "weight_decay",  "warmup_divisor", "decay"};

std::vector<std::string> with(std::vector<std::string> base,
                              const std::vector<std::string>& extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  return base;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"seed", "model", "walk", "split", "pretrain", "finetune", "score"}, "config");

  RunConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"preset", "attention", "max_seq_len", "dropout"}, "model");
    c.preset = m.value("preset", c.preset);
    c.attention = m.value("attention", c.attention);
    c.max_seq_len = m.value("max_seq_len", c.max_seq_len);
    c.dropout = m.value("dropout", c.dropout);
  }
  if (j.contains("walk")) {
    const json& w = j.at("walk");
    reject_unknown(w, {"mode", "token_budget"}, "walk");
    c.walk_mode = w.value("mode", c.walk_mode);
    c.walk_token_budget = w.value("token_budget", c.walk_token_budget);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    reject_unknown(s, {"train_frac", "val_frac", "test_frac", "seed"}, "split");
    c.split.train_frac = s.value("train_frac", c.split.train_frac);
    c.split.val_frac = s.value("val_frac", c.split.val_frac);
    c.split.test_frac = s.value("test_frac", c.split.test_frac);
    c.split.seed = s.value("seed", c.split.seed);
  }
  if (j.contains("pretrain")) {
    const json& p = j.at("pretrain");
    reject_unknown(p, with(kHyperKeys, {"tokens", "validation_interval", "mask_fixed_rate",
                                        "mask_min_rate"}),
                   "pretrain");
    c.pretrain_tokens = p.value("tokens", c.pretrain_tokens);
    c.validation_interval = p.value("validation_interval", c.validation_interval);
    c.mask_fixed_rate = p.value("mask_fixed_rate", c.mask_fixed_rate);
    c.mask_min_rate = p.value("mask_min_rate", c.mask_min_rate);
    read_hyper(p, "pretrain", c.pre_hyper);
  }
  if (j.contains("finetune")) {
    const json& f = j.at("finetune");
    reject_unknown(f, with(kHyperKeys, {"mode", "epochs", "walk_hops"}), "finetune");
    c.finetune_mode = f.value("mode", c.finetune_mode);
    c.epochs = f.value("epochs", c.epochs);
    c.walk_hops = f.value("walk_hops", c.walk_hops);
    read_hyper(f, "finetune", c.ft_hyper);
  }
  if (j.contains("score")) {
    const json& s = j.at("score");
    reject_unknown(s, {"mode", "walk_hops"}, "score");
    c.score_mode = s.value("mode", c.score_mode);
    c.score_walk_hops = s.value("walk_hops", c.score_walk_hops);
  }
  // Fail fast on bad enum strings.
  c.walk_mode_enum();
  c.attention_enum();
  c.finetune_mode_enum();
  c.score_mode_enum();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["model"] = {{"preset", preset},
                {"attention", attention},
                {"max_seq_len", max_seq_len},
                {"dropout", dropout}};
  j["walk"] = {{"mode", walk_mode}, {"token_budget", walk_token_budget}};
  j["split"] = {{"train_frac", split.train_frac},
                {"val_frac", split.val_frac},
                {"test_frac", split.test_frac},
                {"seed", split.seed}};
  j["pretrain"] = hyper_json(pre_hyper);
  j["pretrain"]["tokens"] = pretrain_tokens;
  j["pretrain"]["validation_interval"] = validation_interval;
  j["pretrain"]["mask_fixed_rate"] = mask_fixed_rate;
  j["pretrain"]["mask_min_rate"] = mask_min_rate;
  j["finetune"] = hyper_json(ft_hyper);
  j["finetune"]["mode"] = finetune_mode;
  j["finetune"]["epochs"] = epochs;
  j["finetune"]["walk_hops"] = walk_hops;
  j["score"] = {{"mode", score_mode}, {"walk_hops", score_walk_hops}};
  return j.dump(2) + "\n";
}

void RunConfig::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << to_json();
  if (!os) throw std::runtime_error("write failure on '" + path + "'");
}

WalkMode RunConfig::walk_mode_enum() const {
  if (walk_mode == "temporal") return WalkMode::temporal;
  if (walk_mode == "static") return WalkMode::static_uniform;
  throw std::runtime_error("walk mode must be 'temporal' or 'static', got '" + walk_mode + "'");
}

AttentionMode RunConfig::attention_enum() const {
  if (attention == "bidirectional") return AttentionMode::bidirectional;
  if (attention == "causal") return AttentionMode::causal;
  throw std::runtime_error("attention must be 'bidirectional' or 'causal', got '" + attention +
                           "'");
}

namespace {
FinetuneMode head_from_string(const std::string& s, const char* what) {
  if (s == "lp") return FinetuneMode::lp;
  if (s == "cls") return FinetuneMode::cls;
  throw std::runtime_error(std::string(what) + " must be 'lp' or 'cls', got '" + s + "'");
}
}  // namespace

FinetuneMode RunConfig::finetune_mode_enum() const {
  return head_from_string(finetune_mode, "finetune.mode");
}

FinetuneMode RunConfig::score_mode_enum() const {
  return head_from_string(score_mode, "score.mode");
}

ModelConfig RunConfig::model_config() const {
  ModelConfig mc = ModelConfig::preset(preset, /*vocab_size=*/0, attention_enum());
  mc.max_seq_len = max_seq_len;
  mc.dropout = static_cast<float>(dropout);
  return mc;
}

PretrainConfig RunConfig::pretrain_config() const {
  PretrainConfig pc;
  pc.token_budget = pretrain_tokens;
  pc.validation_interval = validation_interval;
  pc.walk_token_budget = walk_token_budget;
  pc.walk_mode = walk_mode_enum();
  pc.schedule.fixed_rate = mask_fixed_rate;
  pc.schedule.min_rate = mask_min_rate;
  pc.hyper = pre_hyper;
  pc.model = model_config();
  pc.seed = seed;
  return pc;
}

FinetuneConfig RunConfig::finetune_config() const {
  FinetuneConfig fc;
  fc.mode = finetune_mode_enum();
  fc.epochs = epochs;
  fc.walk_hops = walk_hops;
  fc.hyper = ft_hyper;
  fc.seed = seed;
  return fc;
}

}  // namespace walklm::cli
