#pragma once

#include <cstdint>
#include <string>

#include "walklm/ingest.hpp"
#include "walklm/model.hpp"
#include "walklm/trainer.hpp"

namespace walklm::cli {

// The declarative run configuration: one JSON document covers the model,
// walks, split fractions, and both training phases. Defaults reproduce the
// reference hyperparameters; unknown keys are rejected so typos cannot
// silently fall back to defaults. CLI flags override individual keys.
struct RunConfig {
  uint64_t seed = 0;

  std::string preset = "tiny";  // tiny | mini | medium | baseline
  std::string attention = "bidirectional";
  int32_t max_seq_len = 128;
  double dropout = 0.1;

  std::string walk_mode = "temporal";  // temporal | static
  int walk_token_budget = 64;

  SplitSpec split;

  uint64_t pretrain_tokens = 100'000'000;
  uint64_t validation_interval = 10'000'000;
  TrainHyper pre_hyper = TrainHyper::pretrain_defaults();
  double mask_fixed_rate = 0.70;
  double mask_min_rate = 0.15;

  std::string finetune_mode = "lp";  // lp | cls
  int epochs = 5;
  int walk_hops = 1;
  TrainHyper ft_hyper = TrainHyper::finetune_defaults();

  std::string score_mode = "lp";
  int score_walk_hops = 1;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_json() const;
  void save(const std::string& path) const;

  WalkMode walk_mode_enum() const;
  AttentionMode attention_enum() const;
  FinetuneMode finetune_mode_enum() const;
  FinetuneMode score_mode_enum() const;

  ModelConfig model_config() const;  // vocab_size left 0; filled from the dataset
  PretrainConfig pretrain_config() const;
  FinetuneConfig finetune_config() const;
};

}  // namespace walklm::cli
