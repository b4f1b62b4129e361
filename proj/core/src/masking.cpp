#include "walklm/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace walklm {

double mask_rate(int64_t tokens_seen, const MaskSchedule& s) {
  if (tokens_seen < 0) throw std::runtime_error("tokens_seen must be non-negative");
  if (s.warmup_tokens <= 0) throw std::runtime_error("mask schedule warmup must be positive");
  double x = static_cast<double>(tokens_seen) / static_cast<double>(s.warmup_tokens);
  double r = s.fixed_rate * (1.0 - x * x);
  return std::max(r, s.min_rate);
}

CorruptedSequence corrupt_sequence(const std::vector<TokenId>& seq, double rate,
                                   const Vocabulary& v, Rng& rng) {
  if (rate < 0.0 || rate > 1.0) throw std::runtime_error("corruption rate outside [0, 1]");
  size_t len = seq.size();
  size_t k = static_cast<size_t>(std::llround(rate * static_cast<double>(len)));

  CorruptedSequence out;
  out.input = seq;
  if (k == 0) return out;  // caller decides whether an empty selection is worth a warning

  // Partial Fisher-Yates picks k distinct positions without replacement.
  std::vector<int32_t> idx(len);
  std::iota(idx.begin(), idx.end(), 0);
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(rng.next_below(len - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());  // fixed position order; rolls consumed in this order

  out.positions = idx;
  out.targets.reserve(k);
  for (int32_t p : idx) {
    out.targets.push_back(seq[static_cast<size_t>(p)]);
    double roll = rng.next_real();
    if (roll < 0.8) {
      out.input[static_cast<size_t>(p)] = Vocabulary::kMask;
    } else if (roll < 0.9) {
      // Replacement draws come from node tokens only, never [PAD]/[CLS].
      out.input[static_cast<size_t>(p)] =
          Vocabulary::kFirstNode + static_cast<TokenId>(rng.next_below(v.num_nodes()));
    }  // else: keep the original token, target unchanged
  }
  return out;
}

}  // namespace walklm
