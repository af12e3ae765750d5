#include "gapcoref/optim.hpp"

#include <algorithm>
#include <cmath>

#include "gapcoref/error.hpp"

namespace gapcoref {

double warmup_linear_lr(std::int64_t step, std::int64_t total_steps, double base_lr, double warmup_fraction) {
  if (total_steps <= 0) return 0.0;
  step = std::clamp<std::int64_t>(step, 0, total_steps);
  const double s = static_cast<double>(step);
  const double total = static_cast<double>(total_steps);
  const double warmup = warmup_fraction * total;
  if (s < warmup) return base_lr * s / warmup;
  if (total <= warmup) return base_lr;
  return base_lr * (total - s) / (total - warmup);
}

double triangular_lr(std::int64_t step, double base_lr, std::int64_t steps_per_cycle) {
  if (steps_per_cycle <= 0 || steps_per_cycle % 2 != 0) {
    throw Error(ErrorCode::BadConfig, "steps_per_cycle must be even and positive");
  }
  if (step < 0) step = 0;
  const std::int64_t half = steps_per_cycle / 2;
  const std::int64_t pos = step % steps_per_cycle;
  const std::int64_t rise = pos <= half ? pos : steps_per_cycle - pos;
  return base_lr * static_cast<double>(rise) / static_cast<double>(half);
}

void Adam::step(const ParameterList& params, double lr) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Parameter* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "parameter list changed size");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() || m_[i].rows() != p.value.rows() ||
        m_[i].cols() != p.value.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter " + p.name);
    }
  }

  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
    const auto m_hat = m_[i].array() / correction1;
    const auto v_hat = v_[i].array() / correction2;
    Matrix update = (m_hat / (v_hat.sqrt() + config_.epsilon)).matrix();
    if (p.decay && config_.weight_decay != 0.0) update += config_.weight_decay * p.value;
    p.value -= lr * update;
  }
}

double clip_grad_norm(const ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    if (p->trainable) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Parameter* p : params) {
      if (p->trainable) p->grad *= scale;
    }
  }
  return norm;
}

}  // namespace gapcoref
