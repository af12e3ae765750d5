#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "gapcoref/encoder.hpp"
#include "gapcoref/gap_data.hpp"
#include "gapcoref/prob.hpp"
#include "gapcoref/tokenizer.hpp"

namespace gapcoref {

// Extractive question answering over the passage: the question is the
// pronoun's context window, the answer is a passage span.
//
// Answer extraction only ever sees a QaQuery, which carries the passage and
// the pronoun but no candidate names or offsets. The candidate-aware parts
// (training targets, span pooling for calibration) take a GapRecord.

struct QaQuery {
  std::string id;
  std::string text;
  std::string pronoun;
  std::int64_t pronoun_offset = 0;
};

QaQuery to_query(const GapRecord& record);

inline constexpr int kDefaultWindow = 5;
inline constexpr int kDefaultMaxSeqLen = 300;
inline constexpr int kDefaultMaxAnswerLen = 30;

// The whitespace-separated word containing the pronoun offset plus up to
// (window - 1) / 2 words on each side, joined by single spaces.
// Throws PronounNotFound.
std::string build_question(const QaQuery& query, int window = kDefaultWindow);

// Encoded "[CLS] question [SEP] passage [SEP]" plus the passage tokenization.
struct QaInput {
  std::string record_id;
  EncodedInput encoded;
  TokenizedText passage;
};

QaInput build_qa_input(const QaQuery& query, const Vocab& vocab, int window = kDefaultWindow,
                       int max_seq_len = kDefaultMaxSeqLen);

struct QaExample {
  std::string record_id;
  EncodedInput encoded;
  std::optional<TokenSpan> answer_span;  // absent at inference
};

// Training example with the gold candidate's span as the answer. Returns
// nullopt for gold label N, which has no answer span. Throws AnswerTruncated
// when the gold span was cut from the passage.
std::optional<QaExample> build_qa_example(const GapRecord& record, const Vocab& vocab, int window = kDefaultWindow,
                                          int max_seq_len = kDefaultMaxSeqLen);

// Encoded positions of the A and B mentions; empty when truncated away.
struct CandidateSpans {
  std::optional<TokenSpan> a;
  std::optional<TokenSpan> b;
};

CandidateSpans candidate_spans(const GapRecord& record, const QaInput& input);

// Dense layer mapping each token state to (start, end) logits.
struct QaHead {
  Parameter weight;  // H x 2
  Parameter bias;    // 1 x 2

  static QaHead init(int hidden_dim, std::uint64_t seed);
  ParameterList parameters() { return {&weight, &bias}; }
};

struct SpanLogits {
  Vector start;
  Vector end;

  Eigen::Index size() const { return start.size(); }
};

SpanLogits qa_forward(const TokenStates& states, const QaHead& head);

// Mean of the start and end cross-entropies over all sequence positions.
double qa_loss(const SpanLogits& logits, TokenSpan answer);

// d qa_loss / d logits as an n x 2 matrix (start column, end column).
Matrix qa_loss_gradient(const SpanLogits& logits, TokenSpan answer);

// Accumulates head gradients and returns d loss / d states.
Matrix qa_head_backward(const TokenStates& states, const Matrix& d_logits, QaHead& head);

// Highest start[i] + end[j] with i <= j, j - i < max_answer_len, both inside
// the passage. Ties go to the smaller i, then the smaller j.
TokenSpan extract_best_span(const SpanLogits& logits, TokenRange passage, int max_answer_len = kDefaultMaxAnswerLen);

struct ExtractedAnswer {
  std::string record_id;
  CharSpan chars;
  std::string text;
};

ExtractedAnswer answer_from_span(const QaQuery& query, const QaInput& input, TokenSpan span);

// (maxStart_A, maxEnd_A, maxStart_B, maxEnd_B, maxStart_all, maxEnd_all)
using PooledFeatures = std::array<double, 6>;

// Throws EmptySpan for an empty or out-of-range span.
PooledFeatures span_pool_features(const SpanLogits& logits, TokenSpan a_span, TokenSpan b_span);

// As above, but a truncated candidate contributes the sequence minimum for
// its start and end features.
PooledFeatures span_pool_features(const SpanLogits& logits, const CandidateSpans& spans);

// Multinomial logistic regression from pooled features to (A, B, N).
struct LrModel {
  Eigen::Matrix<double, 3, 6> weights = Eigen::Matrix<double, 3, 6>::Zero();
  Eigen::Vector3d bias = Eigen::Vector3d::Zero();
  double C = 0.1;
};

struct LrFitReport {
  int iterations = 0;
  double gradient_inf_norm = 0.0;
  bool converged = false;
};

inline constexpr double kDefaultLrC = 0.1;

// Summed cross-entropy + ||W||^2 / (2C), bias unpenalized. When `gradient`
// is non-null it receives d objective / d [W | b] as a 3 x 7 matrix.
double span_lr_objective(const LrModel& model, std::span<const PooledFeatures> features,
                         std::span<const Label> labels, Eigen::Matrix<double, 3, 7>* gradient = nullptr);

// Damped Newton iterations with backtracking from a zero start, until the
// gradient's infinity norm drops below 1e-6 or 1000 iterations pass.
// Throws DegenerateLabels when fewer than two distinct labels are present.
LrModel fit_span_lr(std::span<const PooledFeatures> features, std::span<const Label> labels, double C = kDefaultLrC,
                    LrFitReport* report = nullptr);

ProbTriple qa_probabilities(const LrModel& model, const PooledFeatures& features);

}  // namespace gapcoref
