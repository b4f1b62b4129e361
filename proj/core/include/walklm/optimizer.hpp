#pragma once

#include <cstdint>
#include <vector>

namespace walklm {

enum class LrDecay : uint8_t { linear = 0, cosine = 1 };

// One optimization recipe: AdamW moments, decoupled weight decay on every
// parameter, global-norm clipping, warmup + decay schedule.
struct TrainHyper {
  int batch_size = 1024;
  double max_lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double max_grad_norm = 5.0;
  double weight_decay = 0.1;
  double warmup_divisor = 10.0;  // warmup span = total / divisor
  LrDecay decay = LrDecay::linear;

  static TrainHyper pretrain_defaults();
  static TrainHyper finetune_defaults();
};

// Piecewise schedule over progress in [0, total]: linear ramp from 0 to
// max_lr across the warmup span, then linear or cosine decay to 0 at total.
// Progress units are the caller's (tokens for pretraining, optimizer steps
// for fine-tuning).
double lr_at(double progress, double total, const TrainHyper& h);

struct AdamState {
  std::vector<float> m, v;
  uint64_t step = 0;
  uint64_t rejected = 0;  // steps skipped because of non-finite gradients

  explicit AdamState(size_t n = 0) : m(n, 0.0f), v(n, 0.0f) {}
};

// In-place AdamW update with bias correction. Gradients are globally
// norm-clipped first (grads is scaled in place). A non-finite gradient norm
// rejects the whole step, leaving params and moments untouched; returns
// whether the step was applied.
bool optimizer_step(std::vector<float>& params, std::vector<float>& grads, AdamState& state,
                    const TrainHyper& h, double lr);

}  // namespace walklm
