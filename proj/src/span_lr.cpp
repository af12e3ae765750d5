#include <cmath>
#include <set>

#include "gapcoref/error.hpp"
#include "gapcoref/qa.hpp"

namespace gapcoref {
namespace {

using Theta = Eigen::Matrix<double, 3, 7>;
using Flat = Eigen::Matrix<double, 21, 1>;
using Hessian = Eigen::Matrix<double, 21, 21>;

constexpr double kTolerance = 1e-6;
constexpr int kMaxIterations = 1000;

Eigen::Matrix<double, 7, 1> augmented(const PooledFeatures& f) {
  Eigen::Matrix<double, 7, 1> x;
  for (int i = 0; i < 6; ++i) x(i) = f[static_cast<std::size_t>(i)];
  x(6) = 1.0;
  return x;
}

Theta pack(const LrModel& m) {
  Theta t;
  t.leftCols<6>() = m.weights;
  t.col(6) = m.bias;
  return t;
}

void unpack(const Theta& t, LrModel& m) {
  m.weights = t.leftCols<6>();
  m.bias = t.col(6);
}

// Row-major flattening: index = class * 7 + feature.
Flat flatten(const Theta& t) {
  Flat f;
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < 7; ++j) f(c * 7 + j) = t(c, j);
  }
  return f;
}

Theta unflatten(const Flat& f) {
  Theta t;
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < 7; ++j) t(c, j) = f(c * 7 + j);
  }
  return t;
}

Eigen::Vector3d class_probs(const Theta& t, const Eigen::Matrix<double, 7, 1>& x) {
  const Eigen::Vector3d z = t * x;
  const double m = z.maxCoeff();
  const Eigen::Vector3d e = (z.array() - m).exp();
  return e / e.sum();
}

double objective(const Theta& t, double C, std::span<const PooledFeatures> features, std::span<const Label> labels,
                 Theta* grad, Hessian* hess) {
  double value = 0.0;
  if (grad) grad->setZero();
  if (hess) hess->setZero();
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto x = augmented(features[i]);
    const Eigen::Vector3d z = t * x;
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    const int y = static_cast<int>(labels[i]);
    value += lse - z(y);
    if (grad || hess) {
      const Eigen::Vector3d p = (z.array() - lse).exp();
      if (grad) {
        Eigen::Vector3d r = p;
        r(y) -= 1.0;
        grad->noalias() += r * x.transpose();
      }
      if (hess) {
        const Eigen::Matrix3d curvature = Eigen::Matrix3d(p.asDiagonal()) - p * p.transpose();
        const Eigen::Matrix<double, 7, 7> outer = x * x.transpose();
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) hess->block<7, 7>(a * 7, b * 7) += curvature(a, b) * outer;
        }
      }
    }
  }
  const auto w = t.leftCols<6>();
  value += w.squaredNorm() / (2.0 * C);
  if (grad) grad->leftCols<6>() += w / C;
  if (hess) {
    for (int c = 0; c < 3; ++c) {
      for (int j = 0; j < 6; ++j) (*hess)(c * 7 + j, c * 7 + j) += 1.0 / C;
    }
  }
  return value;
}

void check_inputs(std::span<const PooledFeatures> features, std::span<const Label> labels, double C) {
  if (features.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "features and labels differ in count");
  if (!(C > 0.0) || !std::isfinite(C)) throw Error(ErrorCode::BadConfig, "C must be positive and finite");
  for (const auto& f : features) {
    for (double v : f) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NumericFailure, "non-finite pooled feature");
    }
  }
}

}  // namespace

double span_lr_objective(const LrModel& model, std::span<const PooledFeatures> features,
                         std::span<const Label> labels, Eigen::Matrix<double, 3, 7>* gradient) {
  check_inputs(features, labels, model.C);
  return objective(pack(model), model.C, features, labels, gradient, nullptr);
}

LrModel fit_span_lr(std::span<const PooledFeatures> features, std::span<const Label> labels, double C,
                    LrFitReport* report) {
  check_inputs(features, labels, C);
  std::set<Label> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw Error(ErrorCode::DegenerateLabels, "need at least two distinct labels");

  Theta theta = Theta::Zero();
  Theta grad;
  Hessian hess;
  double value = objective(theta, C, features, labels, &grad, &hess);
  LrFitReport r;
  for (r.iterations = 0; r.iterations < kMaxIterations; ++r.iterations) {
    r.gradient_inf_norm = grad.cwiseAbs().maxCoeff();
    if (r.gradient_inf_norm < kTolerance) {
      r.converged = true;
      break;
    }
    // The bias-shift direction has zero curvature; a tiny ridge keeps the
    // system solvable without moving the minimizer.
    const double damping = 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
    const Flat g = flatten(grad);
    const Flat step = -(hess + damping * Hessian::Identity()).ldlt().solve(g);
    const double slope = g.dot(step);
    double t = 1.0;
    Theta candidate;
    double candidate_value = value;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
      candidate = theta + t * unflatten(step);
      candidate_value = objective(candidate, C, features, labels, nullptr, nullptr);
      if (std::isfinite(candidate_value) && candidate_value <= value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Newton direction exhausted; fall back to a damped gradient step.
      candidate = theta - grad / (1.0 + hess.diagonal().maxCoeff());
      candidate_value = objective(candidate, C, features, labels, nullptr, nullptr);
      if (!(candidate_value < value)) break;
    }
    theta = candidate;
    value = objective(theta, C, features, labels, &grad, &hess);
  }
  r.gradient_inf_norm = grad.cwiseAbs().maxCoeff();
  if (!theta.allFinite()) throw Error(ErrorCode::NumericFailure, "logistic regression diverged");

  LrModel model;
  model.C = C;
  unpack(theta, model);
  if (report) *report = r;
  return model;
}

ProbTriple qa_probabilities(const LrModel& model, const PooledFeatures& features) {
  const Eigen::Vector3d p = class_probs(pack(model), augmented(features));
  return {p(0), p(1), p(2)};
}

}  // namespace gapcoref
