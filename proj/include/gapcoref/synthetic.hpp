#pragma once

#include <cstdint>
#include <vector>

#include "gapcoref/gap_data.hpp"

namespace gapcoref {

struct SyntheticOptions {
  std::size_t count = 500;
  std::uint64_t seed = 7;
  double neither_fraction = 0.1;
};

// GAP-format records built from templates: two named candidates of which the
// pronoun's gender matches exactly one (labels A, B), or a third same-gender
// name that is the true referent (label N). Genders alternate, so male and
// female pronouns are equally represented.
std::vector<GapRecord> synthetic_gap(const SyntheticOptions& options);

}  // namespace gapcoref
