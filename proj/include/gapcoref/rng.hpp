#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace gapcoref {

// Derives an independent child seed from a root seed and a label such as
// "init/fold2". Every random stream in the toolkit is fanned out this way.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

// Thin wrapper over mt19937_64 with distribution code written out by hand so
// that streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gapcoref
