#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>

#include "gapcoref/gap_data.hpp"

namespace gapcoref {

// Probabilities over (A, B, Neither).
struct ProbTriple {
  double p_a = 1.0 / 3.0;
  double p_b = 1.0 / 3.0;
  double p_n = 1.0 / 3.0;

  double operator[](Label l) const { return l == Label::A ? p_a : (l == Label::B ? p_b : p_n); }
  double at(int i) const { return i == 0 ? p_a : (i == 1 ? p_b : p_n); }
  double sum() const { return p_a + p_b + p_n; }

  bool on_simplex(double tol = 1e-9) const {
    return p_a >= 0 && p_b >= 0 && p_n >= 0 && p_a <= 1 && p_b <= 1 && p_n <= 1 && std::abs(sum() - 1.0) <= tol;
  }

  friend bool operator==(const ProbTriple&, const ProbTriple&) = default;
};

// Per-record predictions keyed by record id.
using Predictions = std::map<std::string, ProbTriple>;

}  // namespace gapcoref
