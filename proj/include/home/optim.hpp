#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "home/error.hpp"
#include "home/model.hpp"

namespace home {

// Linear warmup from 0 to base_lr over warmup_steps, then cosine decay that
// reaches final_lr at step total_steps - 1. final_lr is capped at base_lr,
// so a zero base rate keeps every step at zero.
struct Schedule {
  double base_lr = 0.5;
  double final_lr = 0.002;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 1;
};

inline double lr_at(std::uint64_t step, const Schedule& s) {
  if (step < s.warmup_steps) {
    return s.base_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  const double final_lr = std::min(s.final_lr, s.base_lr);
  const std::uint64_t last = s.total_steps > 0 ? s.total_steps - 1 : 0;
  // No room for decay after warmup.
  if (last <= s.warmup_steps) return s.base_lr;
  const double progress = std::min(
      1.0, static_cast<double>(step - s.warmup_steps) /
               static_cast<double>(last - s.warmup_steps));
  return final_lr +
         (s.base_lr - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

struct OptimState {
  double momentum = 0.9;
  double weight_decay = 5e-4;
  ModelGradients velocity;
  std::uint64_t step = 0;

  static OptimState for_model(const MlpModel& model, double momentum = 0.9,
                              double weight_decay = 5e-4) {
    return {momentum, weight_decay, ModelGradients::zeros_like(model), 0};
  }
};

// SGD with momentum. Weight decay enters as an additive term on each
// weight's gradient; biases are not decayed:
//   v = mu * v + g + wd * w;  w -= lr * v
inline void sgd_step(MlpModel& model, const ModelGradients& grads, OptimState& state,
                     double lr) {
  auto& layers = model.mutable_layers();
  if (grads.weight.size() != layers.size() || state.velocity.weight.size() != layers.size()) {
    throw ShapeError("sgd_step: gradient layout does not match model");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto w = layers[i].weight.flat();
    const auto gw = grads.weight[i].flat();
    auto vw = state.velocity.weight[i].flat();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = gw[k] + state.weight_decay * w[k];
      vw[k] = state.momentum * vw[k] + g;
      w[k] -= lr * vw[k];
    }
    auto& b = layers[i].bias;
    const auto& gb = grads.bias[i];
    auto& vb = state.velocity.bias[i];
    for (std::size_t k = 0; k < b.size(); ++k) {
      vb[k] = state.momentum * vb[k] + gb[k];
      b[k] -= lr * vb[k];
    }
  }
  ++state.step;
}

}  // namespace home
