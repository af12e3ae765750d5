#include "gapcoref/seq.hpp"

#include <algorithm>
#include <cmath>

#include "gapcoref/error.hpp"
#include "gapcoref/unicode.hpp"

namespace gapcoref {

SeqExample build_seq_example(const GapRecord& record, const Vocab& vocab, int max_seq_len) {
  const TokenizedText passage = wordpiece_tokenize(record.text, vocab);
  const TokenSpan a = align_char_span(passage, record.a_offset, utf8_length(record.a_name));
  const TokenSpan b = align_char_span(passage, record.b_offset, utf8_length(record.b_name));
  const TokenSpan p = align_char_span(passage, record.pronoun_offset, utf8_length(record.pronoun));

  const int budget = max_seq_len - 2;
  const int lo = std::min({a.first, b.first, p.first});
  const int hi = std::max({a.last, b.last, p.last});
  if (hi - lo + 1 > budget) {
    throw Error(ErrorCode::AnswerTruncated, "record " + record.id + ": mentions do not fit in one window");
  }
  const int offset = static_cast<int>(passage.size()) <= budget ? 0 : std::max(0, hi - budget + 1);

  SeqExample ex;
  ex.record_id = record.id;
  ex.encoded = encode_single(passage, vocab, max_seq_len, offset);
  ex.a_span = *passage_to_encoded(ex.encoded, a);
  ex.b_span = *passage_to_encoded(ex.encoded, b);
  ex.p_span = *passage_to_encoded(ex.encoded, p);
  ex.gold = gold_label(record);
  return ex;
}

SeqHead SeqHead::init(int hidden_dim, int hidden_units, double dropout, std::uint64_t seed) {
  if (hidden_units < 1) throw Error(ErrorCode::BadConfig, "seq hidden units must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::BadConfig, "dropout must lie in [0, 1)");
  SeqHead head{Parameter("seq.hidden.w", 9 * hidden_dim, hidden_units, true),
               Parameter("seq.hidden.b", 1, hidden_units, false), Parameter("seq.out.w", hidden_units, 3, true),
               Parameter("seq.out.b", 1, 3, false), dropout};
  Rng rng(derive_seed(seed, "seq_head/init"));
  for (Parameter* p : {&head.hidden_w, &head.out_w}) {
    const double limit = std::sqrt(6.0 / static_cast<double>(p->value.rows() + p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = rng.uniform(-limit, limit);
  }
  return head;
}

RowVector span_embedding(const TokenStates& states, TokenSpan span) {
  if (span.first > span.last || span.first < 0 || span.last >= states.rows()) {
    throw Error(ErrorCode::EmptySpan, "span is empty or outside the sequence");
  }
  const Eigen::Index h = states.cols();
  RowVector out(3 * h);
  out.segment(0, h) = states.row(span.first);
  out.segment(h, h) = states.row(span.last);
  out.segment(2 * h, h) = states.row(span.first).cwiseProduct(states.row(span.last));
  return out;
}

ProbTriple seq_forward(const TokenStates& states, TokenSpan a_span, TokenSpan b_span, TokenSpan p_span,
                       const SeqHead& head, bool training, Rng* dropout_rng, SeqTape* tape) {
  const Eigen::Index h = states.cols();
  if (head.hidden_w.value.rows() != 9 * h) {
    throw Error(ErrorCode::ShapeMismatch, "seq head expects width " + std::to_string(head.hidden_w.value.rows() / 9));
  }
  Matrix features(1, 9 * h);
  features.block(0, 0, 1, 3 * h) = span_embedding(states, a_span);
  features.block(0, 3 * h, 1, 3 * h) = span_embedding(states, b_span);
  features.block(0, 6 * h, 1, 3 * h) = span_embedding(states, p_span);

  Matrix scale = Matrix::Ones(1, 9 * h);
  if (training && head.dropout > 0.0) {
    if (!dropout_rng) throw Error(ErrorCode::BadConfig, "training-mode forward needs a dropout generator");
    const double keep = 1.0 / (1.0 - head.dropout);
    for (Eigen::Index i = 0; i < scale.cols(); ++i) scale(0, i) = dropout_rng->uniform() < head.dropout ? 0.0 : keep;
  }
  const Matrix dropped = features.cwiseProduct(scale);
  Matrix hidden_pre = affine(dropped, head.hidden_w, head.hidden_b);
  Matrix hidden = hidden_pre.cwiseMax(0.0);
  const Matrix logits = affine(hidden, head.out_w, head.out_b);
  const Vector p = softmax(logits.row(0).transpose());
  const ProbTriple probs{p(0), p(1), p(2)};

  if (tape) {
    tape->features = std::move(features);
    tape->dropout_scale = std::move(scale);
    tape->hidden_pre = std::move(hidden_pre);
    tape->hidden = std::move(hidden);
    tape->a_span = a_span;
    tape->b_span = b_span;
    tape->p_span = p_span;
    tape->probs = probs;
  }
  return probs;
}

double seq_loss(const ProbTriple& probs, Label gold) { return -std::log(probs[gold]); }

Matrix seq_backward(const TokenStates& states, const SeqTape& tape, Label gold, SeqHead& head) {
  Matrix d_logits(1, 3);
  for (int c = 0; c < 3; ++c) d_logits(0, c) = tape.probs.at(c) - (c == static_cast<int>(gold) ? 1.0 : 0.0);
  const Matrix d_hidden = affine_backward(tape.hidden, d_logits, head.out_w, head.out_b);
  const Matrix d_pre = d_hidden.cwiseProduct((tape.hidden_pre.array() > 0.0).cast<double>().matrix());
  const Matrix dropped = tape.features.cwiseProduct(tape.dropout_scale);
  const Matrix d_features = affine_backward(dropped, d_pre, head.hidden_w, head.hidden_b).cwiseProduct(tape.dropout_scale);

  const Eigen::Index h = states.cols();
  Matrix d_states = Matrix::Zero(states.rows(), h);
  const TokenSpan spans[3] = {tape.a_span, tape.b_span, tape.p_span};
  for (int s = 0; s < 3; ++s) {
    const auto block = d_features.block(0, 3 * h * s, 1, 3 * h);
    const TokenSpan span = spans[s];
    d_states.row(span.first) += block.middleCols(0, h) + block.middleCols(2 * h, h).cwiseProduct(states.row(span.last));
    d_states.row(span.last) += block.middleCols(h, h) + block.middleCols(2 * h, h).cwiseProduct(states.row(span.first));
  }
  return d_states;
}

}  // namespace gapcoref
