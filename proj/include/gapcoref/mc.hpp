#pragma once

#include <array>
#include <string>

#include "gapcoref/encoder.hpp"
#include "gapcoref/gap_data.hpp"
#include "gapcoref/prob.hpp"
#include "gapcoref/tokenizer.hpp"

namespace gapcoref {

// Multiple-choice formulation: the passage followed by "<pronoun> is " is
// paired with each of A's name, B's name and "neither"; a linear head scores
// each pairing's [CLS] state and a softmax over the three scores yields
// (P_A, P_B, P_N).

inline constexpr int kNumChoices = 3;
inline constexpr std::string_view kNeitherChoice = "neither";

// passage + " " + pronoun + " is "
std::string build_mc_first_segment(const GapRecord& record);

struct McExample {
  std::string record_id;
  std::array<EncodedInput, kNumChoices> choice_inputs;  // A, B, neither
  int gold_choice = 0;
};

// When the passage does not fit next to a choice, passage pieces are dropped
// from the front so that the appended "<pronoun> is" stays in view.
McExample build_mc_example(const GapRecord& record, const Vocab& vocab, int max_seq_len);

// Key under which externally computed states for one choice are stored.
std::string mc_choice_key(const std::string& record_id, int choice);

struct McHead {
  Parameter weight;  // H x 1
  Parameter bias;    // 1 x 1

  static McHead init(int hidden_dim, std::uint64_t seed);
  ParameterList parameters() { return {&weight, &bias}; }
};

using ChoiceStates = std::array<const TokenStates*, kNumChoices>;

std::array<double, kNumChoices> mc_scores(const ChoiceStates& states, const McHead& head);
ProbTriple mc_forward(const ChoiceStates& states, const McHead& head);

double mc_loss(const ProbTriple& probs, int gold_choice);

// Accumulates head gradients; returns d loss / d states for each choice
// (non-zero only in the [CLS] row).
std::array<Matrix, kNumChoices> mc_backward(const ChoiceStates& states, const ProbTriple& probs, int gold_choice,
                                            McHead& head);

}  // namespace gapcoref
