#include "gapcoref/nn.hpp"

#include <cmath>
#include <numbers>

namespace gapcoref {

void zero_grads(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

Matrix layer_norm_forward(const Matrix& x, const Parameter& gain, const Parameter& bias, NormCache* cache) {
  const Eigen::Index n = x.rows();
  const double width = static_cast<double>(x.cols());
  Matrix normalized(n, x.cols());
  Vector inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / width;
    const RowVector centered = x.row(i).array() - mean;
    const double var = centered.squaredNorm() / width;
    inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    normalized.row(i) = centered * inv_std(i);
  }
  Matrix out = normalized.array().rowwise() * gain.value.row(0).array();
  out.rowwise() += bias.value.row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Matrix layer_norm_backward(const Matrix& d_out, const NormCache& cache, Parameter& gain, Parameter& bias) {
  if (gain.trainable) gain.grad.row(0) += (d_out.array() * cache.normalized.array()).colwise().sum().matrix();
  if (bias.trainable) bias.grad.row(0) += d_out.colwise().sum();

  const double width = static_cast<double>(d_out.cols());
  Matrix d_norm = d_out.array().rowwise() * gain.value.row(0).array();
  Matrix d_in(d_out.rows(), d_out.cols());
  for (Eigen::Index i = 0; i < d_out.rows(); ++i) {
    const double mean_d = d_norm.row(i).sum() / width;
    const double mean_dx = d_norm.row(i).dot(cache.normalized.row(i)) / width;
    d_in.row(i) = cache.inv_std(i) *
                  (d_norm.row(i).array() - mean_d - cache.normalized.row(i).array() * mean_dx).matrix();
  }
  return d_in;
}

Matrix affine(const Matrix& x, const Parameter& weight, const Parameter& bias) {
  Matrix out = x * weight.value;
  out.rowwise() += bias.value.row(0);
  return out;
}

Matrix affine_backward(const Matrix& x, const Matrix& d_out, Parameter& weight, Parameter& bias) {
  if (weight.trainable) weight.grad.noalias() += x.transpose() * d_out;
  if (bias.trainable) bias.grad.row(0) += d_out.colwise().sum();
  return d_out * weight.value.transpose();
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double log_sum_exp(const Vector& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

}  // namespace gapcoref
