#include <doctest.h>

#include <cmath>
#include <limits>
#include <type_traits>

#include "gapcoref/error.hpp"
#include "gapcoref/qa.hpp"
#include "gapcoref/trainer.hpp"
#include "gapcoref/unicode.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace gapcoref;
using testing::brute_force_span;
using testing::question_oracle;
using testing::random_logits;

// Answer extraction must be unable to see the candidates.
template <typename T>
concept SeesCandidates = requires(T t) { t.a_name; } || requires(T t) { t.b_offset; } || requires(T t) { t.a_coref; };
static_assert(SeesCandidates<GapRecord>);
static_assert(!SeesCandidates<QaQuery>);
static_assert(!SeesCandidates<QaInput>);
static_assert(!std::is_convertible_v<GapRecord, QaQuery>);
static_assert(!std::is_invocable_v<decltype(&extract_answer), const FoldModel&, const GapRecord&, const Vocab&>);
static_assert(std::is_invocable_v<decltype(&extract_answer), const FoldModel&, const QaQuery&, const Vocab&>);
static_assert(!std::is_invocable_v<decltype(&build_qa_input), const GapRecord&, const Vocab&, int, int>);
static_assert(!std::is_invocable_v<decltype(&answer_from_span), const GapRecord&, const QaInput&, TokenSpan>);

namespace {

QaQuery query(std::string text, std::string pronoun, std::int64_t offset) {
  return QaQuery{"q", std::move(text), std::move(pronoun), offset};
}

GapRecord record(std::string text, std::string pronoun, std::int64_t p_off, std::string a, std::int64_t a_off,
                 std::string b, std::int64_t b_off, Label gold) {
  GapRecord r;
  r.id = "r";
  r.text = std::move(text);
  r.pronoun = std::move(pronoun);
  r.pronoun_offset = p_off;
  r.a_name = std::move(a);
  r.a_offset = a_off;
  r.b_name = std::move(b);
  r.b_offset = b_off;
  r.a_coref = gold == Label::A;
  r.b_coref = gold == Label::B;
  return r;
}

}  // namespace

TEST_CASE("question window: worked example") {
  CHECK(build_question(query("They say John and his wife Carol had a son.", "his", 18)) == "John and his wife Carol");
  CHECK(build_question(query("They say John and his wife Carol had a son.", "his", 18), 3) == "and his wife");
  CHECK(build_question(query("They say John and his wife Carol had a son.", "his", 18), 1) == "his");
}

TEST_CASE("question window at the text boundaries") {
  CHECK(build_question(query("He said so.", "He", 0)) == "He said so.");
  CHECK(build_question(query("Then we met her", "her", 12)) == "we met her");
  CHECK(build_question(query("A  b\tc his, d e f", "his", 7)) == "b c his, d e");
}

TEST_CASE("question window uses the offset, not the first occurrence") {
  const std::string text = "his dog and his cat ran off today";
  CHECK(build_question(query(text, "his", 12)) == "dog and his cat ran");
  CHECK(build_question(query(text, "his", 0)) == "his dog and");
}

TEST_CASE("question window errors") {
  try {
    build_question(query("He said so.", "She", 0));
    FAIL("wrong pronoun accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PronounNotFound);
  }
  CHECK_THROWS_AS(build_question(query("He said so.", "He", 40)), Error);
  CHECK_THROWS_AS(build_question(query("He said so.", "He", 0), 0), Error);
}

TEST_CASE("property: question window matches the oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto [q, offset] = testing::random_question_case(rng);
    const int window = 1 + 2 * static_cast<int>(rng.below(4));
    CHECK(build_question(q, window) == question_oracle(q.text, offset, window));
  }
}

TEST_CASE("QA examples: gold span, N records skipped") {
  const std::string text = "Kathleen met Mary-Ann O'Neil in Leeds. Later she moved away.";
  const Vocab v = testing::vocab_for({text});
  const GapRecord a = record(text, "she", 45, "Kathleen", 0, "Mary-Ann O'Neil", 13, Label::B);
  const auto ex = build_qa_example(a, v);
  REQUIRE(ex.has_value());
  REQUIRE(ex->answer_span.has_value());
  const TokenSpan s = *ex->answer_span;
  CHECK(s.length() == 6);  // mary - ann o ' neil
  CHECK(ex->encoded.passage_range.contains(s));
  CHECK(ex->encoded.alignment[static_cast<std::size_t>(s.first)]->start == 13);
  CHECK(ex->encoded.alignment[static_cast<std::size_t>(s.last)]->end == 28);

  const QaInput input = build_qa_input(to_query(a), v);
  CHECK(answer_from_span(to_query(a), input, s).text == "Mary-Ann O'Neil");

  GapRecord n = a;
  n.b_coref = false;
  CHECK_FALSE(build_qa_example(n, v).has_value());

  try {
    build_qa_example(a, v, 5, 14);
    FAIL("truncated answer accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AnswerTruncated);
  }
}

TEST_CASE("qa_loss: uniform logits cost ln n") {
  for (int n : {1, 2, 7, 300}) {
    const SpanLogits l{Vector::Constant(n, 0.25), Vector::Constant(n, -3.0)};
    CHECK(qa_loss(l, {0, n - 1}) == doctest::Approx(std::log(n)).epsilon(1e-12));
  }
}

TEST_CASE("qa_loss and its gradient against a hand-rolled softmax") {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const SpanLogits l = random_logits(rng, 5, false);
    const TokenSpan gold{static_cast<int>(rng.below(3)), 2 + static_cast<int>(rng.below(3))};
    double zs = 0, ze = 0;
    for (int i = 0; i < 5; ++i) {
      zs += std::exp(l.start(i));
      ze += std::exp(l.end(i));
    }
    const double expected = -0.5 * (std::log(std::exp(l.start(gold.first)) / zs) + std::log(std::exp(l.end(gold.last)) / ze));
    CHECK(qa_loss(l, gold) == doctest::Approx(expected).epsilon(1e-12));

    const Matrix g = qa_loss_gradient(l, gold);
    for (int i = 0; i < 5; ++i) {
      SpanLogits up = l, down = l;
      up.start(i) += 1e-6;
      down.start(i) -= 1e-6;
      CHECK(g(i, 0) == doctest::Approx((qa_loss(up, gold) - qa_loss(down, gold)) / 2e-6).epsilon(1e-6));
      up = l;
      down = l;
      up.end(i) += 1e-6;
      down.end(i) -= 1e-6;
      CHECK(g(i, 1) == doctest::Approx((qa_loss(up, gold) - qa_loss(down, gold)) / 2e-6).epsilon(1e-6));
    }
  }
}

TEST_CASE("span extraction equals brute force for every length up to 64") {
  Rng rng(33);
  for (int n = 1; n <= 64; ++n) {
    for (bool integer : {false, true}) {
      const SpanLogits l = random_logits(rng, n + 4, integer);
      const TokenRange r{2, 2 + n};
      for (int max_len : {1, 3, 30, 64}) CHECK(extract_best_span(l, r, max_len) == brute_force_span(l, r, max_len));
    }
  }
}

TEST_CASE("property: span extraction equals brute force on random inputs") {
  Rng rng(34);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(80));
    const SpanLogits l = random_logits(rng, n, trial % 2 == 0);
    const int begin = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const int end = begin + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - begin)));
    const int max_len = 1 + static_cast<int>(rng.below(40));
    const TokenSpan got = extract_best_span(l, {begin, end}, max_len);
    CHECK(got == brute_force_span(l, {begin, end}, max_len));
    CHECK(got.first <= got.last);
    CHECK(got.length() <= max_len);
  }
}

TEST_CASE("span extraction errors") {
  const SpanLogits l{Vector::Zero(4), Vector::Zero(4)};
  try {
    extract_best_span(l, {2, 2}, 30);
    FAIL("empty passage accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySpan);
  }
  CHECK_THROWS_AS(extract_best_span(l, {0, 4}, 0), Error);
  CHECK_THROWS_AS(extract_best_span(l, {0, 5}, 3), Error);
}

TEST_CASE("property: pooled features match the oracle and dominate") {
  Rng rng(35);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(30));
    const SpanLogits l = random_logits(rng, n, false);
    auto pick = [&] {
      const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      return TokenSpan{std::min(a, b), std::max(a, b)};
    };
    const TokenSpan a = pick(), b = pick();
    auto max_over = [](const Vector& v, int lo, int hi) {
      double m = -1e300;
      for (int i = lo; i <= hi; ++i) m = std::max(m, v(i));
      return m;
    };
    const PooledFeatures f = span_pool_features(l, a, b);
    CHECK(f[0] == max_over(l.start, a.first, a.last));
    CHECK(f[1] == max_over(l.end, a.first, a.last));
    CHECK(f[2] == max_over(l.start, b.first, b.last));
    CHECK(f[3] == max_over(l.end, b.first, b.last));
    CHECK(f[4] == max_over(l.start, 0, n - 1));
    CHECK(f[5] == max_over(l.end, 0, n - 1));
    CHECK(f[4] >= std::max(f[0], f[2]));
    CHECK(f[5] >= std::max(f[1], f[3]));

    const PooledFeatures t = span_pool_features(l, CandidateSpans{a, std::nullopt});
    CHECK(t[0] == f[0]);
    CHECK(t[2] == l.start.minCoeff());
    CHECK(t[3] == l.end.minCoeff());
  }
  const SpanLogits l{Vector::Zero(3), Vector::Zero(3)};
  CHECK_THROWS_AS(span_pool_features(l, {2, 1}, {0, 0}), Error);
  CHECK_THROWS_AS(span_pool_features(l, {0, 3}, {0, 0}), Error);
}

TEST_CASE("QA pipeline gradients match finite differences") {
  const std::string text = "Kathleen met Mary in Leeds. Later she moved away.";
  const Vocab v = testing::vocab_for({text});
  const GapRecord r = record(text, "she", 34, "Kathleen", 0, "Mary", 13, Label::B);
  const auto ex = build_qa_example(r, v);
  REQUIRE(ex);
  EncoderParams enc = init_params(testing::tiny_encoder_config(static_cast<int>(v.size())));
  QaHead head = QaHead::init(8, 1);
  auto loss = [&] { return qa_loss(qa_forward(encoder_forward(enc, ex->encoded), head), *ex->answer_span); };

  ParameterList all = enc.parameters();
  for (Parameter* p : head.parameters()) all.push_back(p);
  zero_grads(all);
  EncoderTape tape;
  const Matrix states = encoder_forward(enc, ex->encoded, &tape);
  const SpanLogits logits = qa_forward(states, head);
  const Matrix d_states = qa_head_backward(states, qa_loss_gradient(logits, *ex->answer_span), head);
  encoder_backward(enc, tape, d_states);
  CHECK(testing::max_gradient_error(all, loss) < 1e-4);
}
