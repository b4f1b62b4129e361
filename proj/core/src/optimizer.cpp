#include "walklm/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace walklm {

TrainHyper TrainHyper::pretrain_defaults() {
  TrainHyper h;
  h.batch_size = 1024;
  h.max_lr = 3e-4;
  h.beta1 = 0.9;
  h.beta2 = 0.95;
  h.eps = 1e-8;
  h.max_grad_norm = 5.0;
  h.weight_decay = 0.1;
  h.warmup_divisor = 10.0;
  h.decay = LrDecay::linear;
  return h;
}

TrainHyper TrainHyper::finetune_defaults() {
  TrainHyper h;
  h.batch_size = 1024;
  h.max_lr = 3e-5;
  h.beta1 = 0.9;
  h.beta2 = 0.99;
  h.eps = 1e-10;
  h.max_grad_norm = 1.0;
  h.weight_decay = 0.0;
  h.warmup_divisor = 3.33;
  h.decay = LrDecay::cosine;
  return h;
}

double lr_at(double progress, double total, const TrainHyper& h) {
  if (total <= 0.0) throw std::runtime_error("schedule total must be positive");
  if (progress < 0.0) progress = 0.0;
  if (progress > total) progress = total;
  double warmup = total / h.warmup_divisor;
  if (progress < warmup) return h.max_lr * progress / warmup;
  double frac = (progress - warmup) / (total - warmup);
  if (h.decay == LrDecay::linear) return h.max_lr * (1.0 - frac);
  return h.max_lr * 0.5 * (1.0 + std::cos(frac * M_PI));
}

bool optimizer_step(std::vector<float>& params, std::vector<float>& grads, AdamState& state,
                    const TrainHyper& h, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::runtime_error("optimizer buffers disagree on parameter count");

  double sq = 0.0;
  for (float g : grads) sq += static_cast<double>(g) * static_cast<double>(g);
  double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    state.rejected++;
    return false;  // divergence guard: skip the step entirely
  }
  if (norm > h.max_grad_norm) {
    float scale = static_cast<float>(h.max_grad_norm / norm);
    for (float& g : grads) g *= scale;
  }

  state.step++;
  double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const float b1 = static_cast<float>(h.beta1), b2 = static_cast<float>(h.beta2);
  const float inv_bc1 = static_cast<float>(1.0 / bc1), inv_bc2 = static_cast<float>(1.0 / bc2);
  const float eps = static_cast<float>(h.eps), flr = static_cast<float>(lr);
  const float wd = static_cast<float>(h.weight_decay);

  for (size_t i = 0; i < params.size(); ++i) {
    float g = grads[i];
    float m = state.m[i] = b1 * state.m[i] + (1.0f - b1) * g;
    float v = state.v[i] = b2 * state.v[i] + (1.0f - b2) * g * g;
    float update = (m * inv_bc1) / (std::sqrt(v * inv_bc2) + eps);
    // Decoupled decay: applied to the raw parameter, on every parameter
    // group (embeddings, LayerNorm and biases included, by design).
    params[i] -= flr * (update + wd * params[i]);
  }
  return true;
}

}  // namespace walklm
