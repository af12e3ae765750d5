#pragma once

#include <cstdint>
#include <string>

#include "gapcoref/encoder.hpp"
#include "gapcoref/gap_data.hpp"
#include "gapcoref/prob.hpp"
#include "gapcoref/rng.hpp"
#include "gapcoref/tokenizer.hpp"

namespace gapcoref {

// Sequence-classification formulation: span embeddings of A, B and the
// pronoun feed a one-hidden-layer ReLU network with a 3-way softmax.

struct SeqExample {
  std::string record_id;
  EncodedInput encoded;  // [CLS] passage [SEP], single segment
  TokenSpan a_span;
  TokenSpan b_span;
  TokenSpan p_span;
  Label gold = Label::N;
};

// Long passages are windowed so that all three mentions stay inside the
// length budget. Throws AnswerTruncated when they cannot all fit.
SeqExample build_seq_example(const GapRecord& record, const Vocab& vocab, int max_seq_len);

inline constexpr int kDefaultSeqHidden = 512;
inline constexpr double kDefaultSeqDropout = 0.1;

struct SeqHead {
  Parameter hidden_w;  // 9H x hidden
  Parameter hidden_b;  // 1 x hidden
  Parameter out_w;     // hidden x 3
  Parameter out_b;     // 1 x 3
  double dropout = kDefaultSeqDropout;

  static SeqHead init(int hidden_dim, int hidden_units, double dropout, std::uint64_t seed);
  ParameterList parameters() { return {&hidden_w, &hidden_b, &out_w, &out_b}; }
};

// concat(states[start], states[end], states[start] * states[end]).
// Throws EmptySpan.
RowVector span_embedding(const TokenStates& states, TokenSpan span);

struct SeqTape {
  Matrix features;      // 1 x 9H, before dropout
  Matrix dropout_scale; // 1 x 9H, 0 or 1/(1-p); ones at inference
  Matrix hidden_pre;    // 1 x hidden
  Matrix hidden;        // 1 x hidden
  TokenSpan a_span, b_span, p_span;
  ProbTriple probs;
};

// Inverted dropout on the concatenated features when `training`; then the
// ReLU layer and softmax. `dropout_rng` is required only when training.
ProbTriple seq_forward(const TokenStates& states, TokenSpan a_span, TokenSpan b_span, TokenSpan p_span,
                       const SeqHead& head, bool training, Rng* dropout_rng = nullptr, SeqTape* tape = nullptr);

double seq_loss(const ProbTriple& probs, Label gold);

// Accumulates head gradients; returns d loss / d states.
Matrix seq_backward(const TokenStates& states, const SeqTape& tape, Label gold, SeqHead& head);

}  // namespace gapcoref
