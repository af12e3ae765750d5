#include <doctest.h>

#include <cmath>

#include "gapcoref/error.hpp"
#include "gapcoref/optim.hpp"
#include "gapcoref/rng.hpp"

using namespace gapcoref;

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12; }

Parameter scalar(double value, double grad, bool decays = true) {
  Parameter p("p", 1, 1, decays);
  p.value(0, 0) = value;
  p.grad(0, 0) = grad;
  return p;
}

}  // namespace

TEST_CASE("warmup-linear closed-form points") {
  const double base = 3e-5;
  CHECK(close(warmup_linear_lr(0, 1000, base, 0.1), 0.0));
  CHECK(close(warmup_linear_lr(50, 1000, base, 0.1), 0.5 * base));
  CHECK(close(warmup_linear_lr(25, 1000, base, 0.1), 0.25 * base));
  CHECK(close(warmup_linear_lr(100, 1000, base, 0.1), base));
  CHECK(close(warmup_linear_lr(550, 1000, base, 0.1), 0.5 * base));
  CHECK(close(warmup_linear_lr(775, 1000, base, 0.1), 0.25 * base));
  CHECK(close(warmup_linear_lr(1000, 1000, base, 0.1), 0.0));
  CHECK(close(warmup_linear_lr(5, 0, base, 0.1), 0.0));
}

TEST_CASE("triangular closed-form points") {
  const double base = 2e-3;
  CHECK(close(triangular_lr(0, base, 400), 0.0));
  CHECK(close(triangular_lr(100, base, 400), 0.5 * base));
  CHECK(close(triangular_lr(200, base, 400), base));
  CHECK(close(triangular_lr(300, base, 400), 0.5 * base));
  CHECK(close(triangular_lr(400, base, 400), 0.0));
  CHECK(close(triangular_lr(600, base, 400), base));
  CHECK(close(triangular_lr(1, base, 2), base));
  CHECK_THROWS_AS(triangular_lr(1, base, 3), Error);
  CHECK_THROWS_AS(triangular_lr(1, base, 0), Error);
}

TEST_CASE("property: schedules are bounded, continuous and piecewise linear") {
  Rng rng(71);
  for (int trial = 0; trial < 500; ++trial) {
    const double base = rng.uniform(1e-6, 1.0);
    const std::int64_t total = 10 + static_cast<std::int64_t>(rng.below(5000));
    const double warm = rng.uniform(0.01, 0.99);
    const std::int64_t s = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(total)));
    const double a = warmup_linear_lr(s, total, base, warm), b = warmup_linear_lr(s + 1, total, base, warm);
    CHECK(a >= 0.0);
    CHECK(a <= base * (1 + 1e-12));
    // Neighbouring steps differ by at most one step's slope.
    const double slope = base / std::min(warm * total, (1 - warm) * total);
    CHECK(std::abs(a - b) <= slope * (1 + 1e-9) + 1e-15);

    const std::int64_t cycle = 2 * (1 + static_cast<std::int64_t>(rng.below(500)));
    const std::int64_t t = static_cast<std::int64_t>(rng.below(100000));
    const double c = triangular_lr(t, base, cycle), d = triangular_lr(t + 1, base, cycle);
    CHECK(c >= 0.0);
    CHECK(c <= base * (1 + 1e-12));
    CHECK(std::abs(std::abs(c - d) - base / static_cast<double>(cycle / 2)) <= 1e-12);
    CHECK(close(triangular_lr(t + cycle, base, cycle), c));
  }
}

TEST_CASE("one Adam step by hand") {
  Parameter p = scalar(1.0, 1.0);
  Adam adam;
  adam.step({&p}, 0.1);
  const double m_hat = (0.1 * 1.0) / (1 - 0.9), v_hat = (0.001 * 1.0) / (1 - 0.999);
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.1 * (m_hat / (std::sqrt(v_hat) + 1e-6) + 0.01 * 1.0)).epsilon(1e-14));
  CHECK(adam.steps_taken() == 1);

  // Second step with g = -0.5.
  p.grad(0, 0) = -0.5;
  const double before = p.value(0, 0);
  adam.step({&p}, 0.1);
  const double m = 0.9 * 0.1 + 0.1 * -0.5, v = 0.999 * 0.001 + 0.001 * 0.25;
  const double update = (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-6) + 0.01 * before;
  CHECK(p.value(0, 0) == doctest::Approx(before - 0.1 * update).epsilon(1e-14));
}

TEST_CASE("no decay on biases and gains") {
  Parameter p = scalar(2.0, 0.0, false);
  Adam adam;
  adam.step({&p}, 0.5);
  CHECK(p.value(0, 0) == 2.0);
  Parameter q = scalar(2.0, 0.0, true);
  Adam other;
  other.step({&q}, 0.5);
  CHECK(q.value(0, 0) == doctest::Approx(2.0 - 0.5 * 0.01 * 2.0).epsilon(1e-15));
}

TEST_CASE("zero gradients with zero decay leave parameters bitwise unchanged") {
  Rng rng(72);
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  Adam adam(cfg);
  Parameter p("w", 4, 3, true);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.value.data()[i] = rng.uniform(-1, 1);
  const Matrix before = p.value;
  for (int s = 0; s < 20; ++s) adam.step({&p}, 1e-2);
  CHECK(p.value == before);
}

TEST_CASE("frozen parameters stay untouched") {
  Parameter p = scalar(1.0, 5.0);
  p.trainable = false;
  Parameter q = scalar(1.0, 5.0);
  Adam adam;
  for (int s = 0; s < 10; ++s) adam.step({&p, &q}, 0.1);
  CHECK(p.value(0, 0) == 1.0);
  CHECK(q.value(0, 0) != 1.0);
}

TEST_CASE("shape errors") {
  Parameter p = scalar(1.0, 1.0), q = scalar(1.0, 1.0);
  Adam adam;
  adam.step({&p}, 0.1);
  try {
    adam.step({&p, &q}, 0.1);
    FAIL("changed list accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  Parameter bad("b", 2, 2, true);
  bad.grad = Matrix::Zero(1, 2);
  Adam fresh;
  CHECK_THROWS_AS(fresh.step({&bad}, 0.1), Error);
}

TEST_CASE("global norm clipping") {
  Parameter a = scalar(0, 3.0), b = scalar(0, 4.0), frozen = scalar(0, 100.0);
  frozen.trainable = false;
  CHECK(clip_grad_norm({&a, &b, &frozen}, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad(0, 0) == doctest::Approx(0.6));
  CHECK(b.grad(0, 0) == doctest::Approx(0.8));
  CHECK(frozen.grad(0, 0) == 100.0);
  CHECK(clip_grad_norm({&a, &b}, 0.0) == doctest::Approx(1.0));
  CHECK(a.grad(0, 0) == doctest::Approx(0.6));
}
