#pragma once

#include <cstdint>
#include <vector>

#include "gapcoref/nn.hpp"

namespace gapcoref {

// Linear ramp 0 -> base_lr over the first warmup_fraction * total_steps,
// then linear decay to 0 at total_steps.
double warmup_linear_lr(std::int64_t step, std::int64_t total_steps, double base_lr, double warmup_fraction);

// Triangle wave rising from 0 to base_lr at half a cycle and back to 0 at a
// full cycle, repeating. steps_per_cycle must be even and positive.
double triangular_lr(std::int64_t step, double base_lr, std::int64_t steps_per_cycle);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-6;
  double weight_decay = 0.01;
};

// Adam with bias correction and decoupled weight decay. Parameters whose
// `trainable` flag is cleared are skipped entirely (moments included);
// parameters with `decay` cleared take no decay term.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Throws ShapeMismatch if the parameter list changes shape between calls or
  // a gradient does not match its value.
  void step(const ParameterList& params, double lr);

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// Rescales trainable gradients so their global L2 norm is at most max_norm;
// returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(const ParameterList& params, double max_norm);

}  // namespace gapcoref
