#include "gapcoref/qa.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "gapcoref/error.hpp"
#include "gapcoref/rng.hpp"
#include "gapcoref/unicode.hpp"

namespace gapcoref {
namespace {

bool is_space(char32_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

struct WordPos {
  std::size_t start;
  std::size_t end;
};

std::vector<WordPos> split_words(const std::u32string& text) {
  std::vector<WordPos> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    words.push_back({start, i});
  }
  return words;
}

}  // namespace

QaQuery to_query(const GapRecord& record) {
  return {record.id, record.text, record.pronoun, record.pronoun_offset};
}

std::string build_question(const QaQuery& query, int window) {
  if (window < 1) throw Error(ErrorCode::BadConfig, "window must be positive");
  const std::u32string text = decode_utf8(query.text);
  const std::u32string pronoun = decode_utf8(query.pronoun);
  const auto offset = query.pronoun_offset;
  if (offset < 0 || static_cast<std::size_t>(offset) >= text.size() ||
      text.compare(static_cast<std::size_t>(offset), pronoun.size(), pronoun) != 0) {
    throw Error(ErrorCode::PronounNotFound, "record " + query.id + ": '" + query.pronoun + "' not at offset " +
                                                std::to_string(offset));
  }
  const auto words = split_words(text);
  std::size_t center = words.size();
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (words[w].start <= static_cast<std::size_t>(offset) && static_cast<std::size_t>(offset) < words[w].end) {
      center = w;
      break;
    }
  }
  if (center == words.size()) throw Error(ErrorCode::PronounNotFound, "record " + query.id);

  const std::size_t left = static_cast<std::size_t>((window - 1) / 2);
  const std::size_t right = static_cast<std::size_t>(window - 1) - left;
  const std::size_t first = center >= left ? center - left : 0;
  const std::size_t last = std::min(words.size() - 1, center + right);
  std::u32string question;
  for (std::size_t w = first; w <= last; ++w) {
    if (w > first) question.push_back(U' ');
    question.append(text, words[w].start, words[w].end - words[w].start);
  }
  return encode_utf8(question);
}

QaInput build_qa_input(const QaQuery& query, const Vocab& vocab, int window, int max_seq_len) {
  QaInput input;
  input.record_id = query.id;
  input.passage = wordpiece_tokenize(query.text, vocab);
  const TokenizedText question = wordpiece_tokenize(build_question(query, window), vocab);
  input.encoded = encode_pair(question, input.passage, vocab, max_seq_len);
  return input;
}

namespace {

std::optional<TokenSpan> encoded_mention(const QaInput& input, std::int64_t offset, const std::string& name) {
  const TokenSpan pieces = align_char_span(input.passage, offset, utf8_length(name));
  return passage_to_encoded(input.encoded, pieces);
}

}  // namespace

std::optional<QaExample> build_qa_example(const GapRecord& record, const Vocab& vocab, int window, int max_seq_len) {
  const Label label = gold_label(record);
  if (label == Label::N) return std::nullopt;

  QaInput input = build_qa_input(to_query(record), vocab, window, max_seq_len);
  const bool is_a = label == Label::A;
  const auto span = encoded_mention(input, is_a ? record.a_offset : record.b_offset, is_a ? record.a_name : record.b_name);
  if (!span) {
    throw Error(ErrorCode::AnswerTruncated, "record " + record.id + ": gold mention lies past the length budget");
  }
  return QaExample{record.id, std::move(input.encoded), span};
}

CandidateSpans candidate_spans(const GapRecord& record, const QaInput& input) {
  return {encoded_mention(input, record.a_offset, record.a_name),
          encoded_mention(input, record.b_offset, record.b_name)};
}

QaHead QaHead::init(int hidden_dim, std::uint64_t seed) {
  QaHead head{Parameter("qa.w", hidden_dim, 2, true), Parameter("qa.b", 1, 2, false)};
  Rng rng(derive_seed(seed, "qa_head/init"));
  const double limit = std::sqrt(6.0 / (hidden_dim + 2));
  for (Eigen::Index i = 0; i < head.weight.value.size(); ++i) head.weight.value.data()[i] = rng.uniform(-limit, limit);
  return head;
}

SpanLogits qa_forward(const TokenStates& states, const QaHead& head) {
  const Matrix logits = affine(states, head.weight, head.bias);
  return {logits.col(0), logits.col(1)};
}

double qa_loss(const SpanLogits& logits, TokenSpan answer) {
  const double start_ce = log_sum_exp(logits.start) - logits.start(answer.first);
  const double end_ce = log_sum_exp(logits.end) - logits.end(answer.last);
  return 0.5 * (start_ce + end_ce);
}

Matrix qa_loss_gradient(const SpanLogits& logits, TokenSpan answer) {
  Matrix d(logits.size(), 2);
  d.col(0) = softmax(logits.start) * 0.5;
  d.col(1) = softmax(logits.end) * 0.5;
  d(answer.first, 0) -= 0.5;
  d(answer.last, 1) -= 0.5;
  return d;
}

Matrix qa_head_backward(const TokenStates& states, const Matrix& d_logits, QaHead& head) {
  return affine_backward(states, d_logits, head.weight, head.bias);
}

TokenSpan extract_best_span(const SpanLogits& logits, TokenRange passage, int max_answer_len) {
  if (passage.empty() || passage.begin < 0 || passage.end > logits.size()) {
    throw Error(ErrorCode::EmptySpan, "passage range is empty or outside the sequence");
  }
  if (max_answer_len < 1) throw Error(ErrorCode::BadConfig, "max_answer_len must be positive");
  TokenSpan best{passage.begin, passage.begin};
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = passage.begin; i < passage.end; ++i) {
    const int j_end = std::min(passage.end, i + max_answer_len);
    for (int j = i; j < j_end; ++j) {
      const double score = logits.start(i) + logits.end(j);
      if (score > best_score) {
        best_score = score;
        best = {i, j};
      }
    }
  }
  return best;
}

ExtractedAnswer answer_from_span(const QaQuery& query, const QaInput& input, TokenSpan span) {
  const auto& first = input.encoded.alignment.at(static_cast<std::size_t>(span.first));
  const auto& last = input.encoded.alignment.at(static_cast<std::size_t>(span.last));
  if (!first || !last || !input.encoded.passage_range.contains(span)) {
    throw Error(ErrorCode::EmptySpan, "answer span is not inside the passage");
  }
  const CharSpan chars{first->start, last->end};
  return {query.id, chars, utf8_substr(query.text, chars.start, chars.end - chars.start)};
}

namespace {

void check_span(const SpanLogits& logits, TokenSpan s, const char* which) {
  if (s.first > s.last || s.first < 0 || s.last >= logits.size()) {
    throw Error(ErrorCode::EmptySpan, std::string(which) + " span is empty or outside the sequence");
  }
}

}  // namespace

PooledFeatures span_pool_features(const SpanLogits& logits, TokenSpan a_span, TokenSpan b_span) {
  check_span(logits, a_span, "A");
  check_span(logits, b_span, "B");
  return {logits.start.segment(a_span.first, a_span.length()).maxCoeff(),
          logits.end.segment(a_span.first, a_span.length()).maxCoeff(),
          logits.start.segment(b_span.first, b_span.length()).maxCoeff(),
          logits.end.segment(b_span.first, b_span.length()).maxCoeff(),
          logits.start.maxCoeff(),
          logits.end.maxCoeff()};
}

PooledFeatures span_pool_features(const SpanLogits& logits, const CandidateSpans& spans) {
  const double min_start = logits.start.minCoeff();
  const double min_end = logits.end.minCoeff();
  const TokenSpan placeholder{0, 0};
  PooledFeatures f = span_pool_features(logits, spans.a.value_or(placeholder), spans.b.value_or(placeholder));
  if (!spans.a) {
    f[0] = min_start;
    f[1] = min_end;
  }
  if (!spans.b) {
    f[2] = min_start;
    f[3] = min_end;
  }
  return f;
}

}  // namespace gapcoref
