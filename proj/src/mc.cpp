#include "gapcoref/mc.hpp"

#include <cmath>

#include "gapcoref/error.hpp"
#include "gapcoref/rng.hpp"

namespace gapcoref {

std::string build_mc_first_segment(const GapRecord& record) {
  return record.text + " " + record.pronoun + " is ";
}

McExample build_mc_example(const GapRecord& record, const Vocab& vocab, int max_seq_len) {
  McExample ex;
  ex.record_id = record.id;
  ex.gold_choice = static_cast<int>(gold_label(record));

  TokenizedText first = wordpiece_tokenize(build_mc_first_segment(record), vocab);
  const std::array<std::string, kNumChoices> choices = {record.a_name, record.b_name, std::string(kNeitherChoice)};
  std::array<TokenizedText, kNumChoices> seconds;
  std::size_t longest = 0;
  for (int c = 0; c < kNumChoices; ++c) {
    seconds[static_cast<std::size_t>(c)] = wordpiece_tokenize(choices[static_cast<std::size_t>(c)], vocab);
    longest = std::max(longest, seconds[static_cast<std::size_t>(c)].size());
  }
  // All three inputs share one first segment, sized so the longest choice fits.
  const auto budget = static_cast<std::ptrdiff_t>(max_seq_len) - 3 - static_cast<std::ptrdiff_t>(longest);
  if (budget < 1) {
    throw Error(ErrorCode::FirstSegmentTooLong, "record " + record.id + ": no room for the passage");
  }
  if (static_cast<std::ptrdiff_t>(first.size()) > budget) {
    first.pieces.erase(first.pieces.begin(), first.pieces.end() - budget);
  }
  for (int c = 0; c < kNumChoices; ++c) {
    ex.choice_inputs[static_cast<std::size_t>(c)] =
        encode_pair(first, seconds[static_cast<std::size_t>(c)], vocab, max_seq_len);
    auto& e = ex.choice_inputs[static_cast<std::size_t>(c)];
    e.passage_range = e.first_range;
  }
  return ex;
}

std::string mc_choice_key(const std::string& record_id, int choice) {
  return record_id + "#" + std::to_string(choice);
}

McHead McHead::init(int hidden_dim, std::uint64_t seed) {
  McHead head{Parameter("mc.w", hidden_dim, 1, true), Parameter("mc.b", 1, 1, false)};
  Rng rng(derive_seed(seed, "mc_head/init"));
  const double limit = std::sqrt(6.0 / (hidden_dim + 1));
  for (Eigen::Index i = 0; i < head.weight.value.size(); ++i) head.weight.value.data()[i] = rng.uniform(-limit, limit);
  return head;
}

std::array<double, kNumChoices> mc_scores(const ChoiceStates& states, const McHead& head) {
  std::array<double, kNumChoices> scores{};
  for (int c = 0; c < kNumChoices; ++c) {
    const TokenStates& s = *states[static_cast<std::size_t>(c)];
    scores[static_cast<std::size_t>(c)] = s.row(0).dot(head.weight.value.col(0)) + head.bias.value(0, 0);
  }
  return scores;
}

ProbTriple mc_forward(const ChoiceStates& states, const McHead& head) {
  const auto scores = mc_scores(states, head);
  const Vector p = softmax(Eigen::Map<const Vector>(scores.data(), kNumChoices));
  return {p(0), p(1), p(2)};
}

double mc_loss(const ProbTriple& probs, int gold_choice) { return -std::log(probs.at(gold_choice)); }

std::array<Matrix, kNumChoices> mc_backward(const ChoiceStates& states, const ProbTriple& probs, int gold_choice,
                                            McHead& head) {
  std::array<Matrix, kNumChoices> d_states;
  for (int c = 0; c < kNumChoices; ++c) {
    const TokenStates& s = *states[static_cast<std::size_t>(c)];
    const double d_score = probs.at(c) - (c == gold_choice ? 1.0 : 0.0);
    if (head.weight.trainable) head.weight.grad.col(0) += d_score * s.row(0).transpose();
    if (head.bias.trainable) head.bias.grad(0, 0) += d_score;
    Matrix d = Matrix::Zero(s.rows(), s.cols());
    d.row(0) = d_score * head.weight.value.col(0).transpose();
    d_states[static_cast<std::size_t>(c)] = std::move(d);
  }
  return d_states;
}

}  // namespace gapcoref
