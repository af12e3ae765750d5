#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace gapcoref {

// Row-major so that each token state is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// A trainable tensor with its accumulated gradient. `trainable` is cleared by
// layer freezing; `decay` is cleared for biases and normalization gains.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
  bool decay = true;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols, bool decays)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)), decay(decays) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

using ParameterList = std::vector<Parameter*>;

void zero_grads(const ParameterList& params);

// Row-wise layer normalization state kept for the backward pass.
struct NormCache {
  Matrix normalized;
  Vector inv_std;
};

inline constexpr double kLayerNormEps = 1e-12;

Matrix layer_norm_forward(const Matrix& x, const Parameter& gain, const Parameter& bias, NormCache* cache);
// Accumulates into gain/bias gradients (when trainable) and returns d input.
Matrix layer_norm_backward(const Matrix& d_out, const NormCache& cache, Parameter& gain, Parameter& bias);

// x W + b with b broadcast over rows.
Matrix affine(const Matrix& x, const Parameter& weight, const Parameter& bias);
// Accumulates weight/bias gradients (when trainable) and returns d x.
Matrix affine_backward(const Matrix& x, const Matrix& d_out, Parameter& weight, Parameter& bias);

double gelu(double x);
double gelu_derivative(double x);

// Numerically stable softmax of a vector.
Vector softmax(const Vector& logits);
double log_sum_exp(const Vector& logits);

}  // namespace gapcoref
