#pragma once

#include <cstdint>
#include <vector>

#include "walklm/rng.hpp"
#include "walklm/tokenizer.hpp"

namespace walklm {

// Quadratic mask-rate decay over the first tenth of the token budget, then a
// floor: rate(t) = max(fixed * (1 - (t / warmup_tokens)^2), min_rate).
struct MaskSchedule {
  double fixed_rate = 0.70;
  double min_rate = 0.15;
  int64_t warmup_tokens = 1;  // callers set token_budget / 10
};

double mask_rate(int64_t tokens_seen, const MaskSchedule& s);

// One corrupted training sequence. positions/targets are aligned and sorted
// by position; input is the full sequence with corruptions applied.
struct CorruptedSequence {
  std::vector<TokenId> input;
  std::vector<int32_t> positions;
  std::vector<TokenId> targets;  // original token at each position
};

// BERT-style corruption of an unpadded sequence: round(rate * len) positions
// chosen uniformly without replacement; each selected position is replaced by
// [MASK] with p=0.8, by a uniformly random *node* token with p=0.1, and left
// unchanged with p=0.1. The prediction target is always the original token.
CorruptedSequence corrupt_sequence(const std::vector<TokenId>& seq, double rate,
                                   const Vocabulary& v, Rng& rng);

}  // namespace walklm
