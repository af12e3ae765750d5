#include <doctest.h>

#include <cmath>

#include "gapcoref/error.hpp"
#include "gapcoref/metrics.hpp"
#include "gapcoref/rng.hpp"

using namespace gapcoref;

namespace {

ProbTriple random_triple(Rng& rng) {
  const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
  const double s = a + b + c;
  return {a / s, b / s, c / s};
}

ProbTriple one_hot(Label l) {
  return {l == Label::A ? 1.0 : 0.0, l == Label::B ? 1.0 : 0.0, l == Label::N ? 1.0 : 0.0};
}

GoldFlags flags(Label l) { return {l == Label::A, l == Label::B}; }

}  // namespace

TEST_CASE("ensemble averaging") {
  const Predictions one = {{"x", {0.2, 0.3, 0.5}}};
  CHECK(ensemble_average({one}) == one);
  const auto two = ensemble_average({{{"x", {1, 0, 0}}}, {{"x", {0, 0, 1}}}});
  CHECK(two.at("x") == ProbTriple{0.5, 0.0, 0.5});

  Rng rng(91);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Predictions> systems(3);
    for (auto& s : systems)
      for (int i = 0; i < 5; ++i) s["id" + std::to_string(i)] = random_triple(rng);
    const Predictions avg = ensemble_average(systems);
    for (const auto& [id, p] : avg) {
      for (int c = 0; c < 3; ++c) {
        const double hand = (systems[0].at(id).at(c) + systems[1].at(id).at(c) + systems[2].at(id).at(c)) / 3.0;
        CHECK(p.at(c) == doctest::Approx(hand).epsilon(1e-15));
      }
      CHECK(p.on_simplex());
    }
    std::vector<Predictions> permuted = {systems[2], systems[0], systems[1]};
    const Predictions again = ensemble_average(permuted);
    for (const auto& [id, p] : avg)
      for (int c = 0; c < 3; ++c) CHECK(again.at(id).at(c) == doctest::Approx(p.at(c)).epsilon(1e-15));
    CHECK(ensemble_average({systems[0], systems[0]}).at("id0") == systems[0].at("id0"));
  }

  try {
    ensemble_average({{{"x", {}}}, {{"y", {}}}});
    FAIL("mismatched coverage accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CoverageMismatch);
  }
}

TEST_CASE("argmax with the A > B > N tie rule") {
  CHECK(argmax_label({0.6, 0.3, 0.1}) == Label::A);
  CHECK(argmax_label(ProbTriple{}) == Label::A);
  CHECK(argmax_label({0.2, 0.4, 0.4}) == Label::B);
  CHECK(argmax_label({0.1, 0.2, 0.7}) == Label::N);
  Rng rng(92);
  for (int trial = 0; trial < 100; ++trial) {
    ProbTriple p = random_triple(rng);
    if (trial % 10 == 0) p.p_b = p.p_a;
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (p.at(c) > p.at(best)) best = c;
    CHECK(argmax_label(p) == static_cast<Label>(best));
  }
}

TEST_CASE("GAP F1 on hand-tallied fixtures") {
  const std::map<std::string, GoldFlags> gold = {{"1", flags(Label::A)}, {"2", flags(Label::B)}, {"3", flags(Label::N)},
                                                  {"4", flags(Label::A)}, {"5", flags(Label::B)}, {"6", flags(Label::N)}};
  // Two errors: 4 predicted B (one FP, one FN), 6 predicted A (one FP).
  const std::map<std::string, Label> pred = {{"1", Label::A}, {"2", Label::B}, {"3", Label::N},
                                             {"4", Label::B}, {"5", Label::B}, {"6", Label::A}};
  const F1Result r = gap_f1(pred, gold);
  CHECK(r.tp == 3);
  CHECK(r.fp == 2);
  CHECK(r.fn == 1);
  CHECK(r.precision == doctest::Approx(3.0 / 5));
  CHECK(r.recall == doctest::Approx(3.0 / 4));
  CHECK(r.f1 == doctest::Approx(2 * 0.6 * 0.75 / 1.35));

  // A missed N prediction costs recall only.
  const std::map<std::string, Label> cautious = {{"1", Label::N}, {"2", Label::B}, {"3", Label::N},
                                                 {"4", Label::A}, {"5", Label::B}, {"6", Label::N}};
  const F1Result c = gap_f1(cautious, gold);
  CHECK(c.tp == 3);
  CHECK(c.fp == 0);
  CHECK(c.fn == 1);

  std::map<std::string, Label> perfect;
  for (const auto& [id, g] : gold) perfect[id] = g.a_coref ? Label::A : (g.b_coref ? Label::B : Label::N);
  const F1Result p = gap_f1(perfect, gold);
  CHECK(p.precision == 1.0);
  CHECK(p.recall == 1.0);
  CHECK(p.f1 == 1.0);

  std::map<std::string, Label> flipped;
  for (const auto& [id, g] : gold) flipped[id] = g.a_coref ? Label::B : Label::A;
  CHECK(gap_f1(flipped, gold).precision == 0.0);

  const std::map<std::string, GoldFlags> all_a = {{"1", flags(Label::A)}, {"2", flags(Label::A)}};
  const F1Result none = gap_f1({{"1", Label::N}, {"2", Label::N}}, all_a);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK_THROWS_AS(gap_f1({{"1", Label::N}}, all_a), Error);
}

TEST_CASE("log loss values") {
  const std::map<std::string, Label> golds = {{"a", Label::A}, {"b", Label::B}, {"c", Label::N}};
  CHECK(std::abs(log_loss({{"a", {}}, {"b", {}}, {"c", {}}}, golds) - std::log(3.0)) <= 1e-9);
  CHECK(log_loss({{"a", {0.7, 0.2, 0.1}}}, {{"a", Label::A}}) == doctest::Approx(0.356675).epsilon(1e-6));
  const double perfect = log_loss({{"a", one_hot(Label::A)}}, {{"a", Label::A}});
  CHECK(perfect == doctest::Approx(-std::log(1 - 1e-15)).epsilon(1e-3));
  const double worst = log_loss({{"a", one_hot(Label::B)}}, {{"a", Label::A}});
  CHECK(worst == doctest::Approx(-std::log(1e-15)));
  CHECK_THROWS_AS(log_loss({{"a", {}}}, {{"b", Label::A}}), Error);

  Rng rng(93);
  for (int trial = 0; trial < 100; ++trial) {
    ProbTriple p = random_triple(rng);
    const double before = log_loss({{"x", p}, {"y", {}}}, {{"x", Label::B}, {"y", Label::A}});
    p.p_b += 0.5 * p.p_a;
    p.p_a *= 0.5;
    CHECK(log_loss({{"x", p}, {"y", {}}}, {{"x", Label::B}, {"y", Label::A}}) < before);
  }
}

TEST_CASE("bias ratio: display rounding and gender swap") {
  MetricsReport r;
  r.male_f1 = 0.888;
  r.female_f1 = 0.878;
  r.bias = r.female_f1 / r.male_f1;
  CHECK(format_ratio(r.bias) == "0.99");
  CHECK(format_ratio(87.8 / 88.8) == "0.99");
  CHECK(format_ratio(1.0) == "1.00");
  const std::string table = format_report(r);
  CHECK(table.find("0.99") != std::string::npos);
  CHECK(table.find("bias=0.988738") != std::string::npos);

  Rng rng(94);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, Label> pred;
    std::map<std::string, GoldFlags> gold;
    std::map<std::string, Gender> gender, swapped;
    Predictions probs;
    for (int i = 0; i < 40; ++i) {
      const std::string id = std::to_string(i);
      const Label g = static_cast<Label>(rng.below(3));
      pred[id] = rng.below(4) == 0 ? static_cast<Label>(rng.below(3)) : g;
      gold[id] = flags(g);
      gender[id] = i % 2 ? Gender::Male : Gender::Female;
      swapped[id] = i % 2 ? Gender::Female : Gender::Male;
      probs[id] = random_triple(rng);
    }
    const MetricsReport a = gender_metrics(pred, gold, gender, probs);
    const MetricsReport b = gender_metrics(pred, gold, swapped, probs);
    CHECK(a.male_f1 == b.female_f1);
    CHECK(a.female_f1 == b.male_f1);
    if (a.male_f1 > 0 && a.female_f1 > 0) CHECK(a.bias * b.bias == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.overall_f1 == b.overall_f1);
    CHECK(a.male_support == 20);
    const MetricsReport m = gender_metrics(pred, gold, gender, probs, true);
    CHECK(m.overall_f1 == doctest::Approx(0.5 * (a.male_f1 + a.female_f1)));
  }
}

TEST_CASE("gender-symmetric predictions give bias exactly 1") {
  std::vector<GapRecord> golds;
  Predictions probs;
  for (int i = 0; i < 8; ++i) {
    GapRecord r;
    r.id = "g" + std::to_string(i);
    r.pronoun = i < 4 ? "he" : "she";
    r.a_coref = i % 4 == 0;
    r.b_coref = i % 4 == 1;
    golds.push_back(r);
    probs[r.id] = i % 4 == 3 ? ProbTriple{0.5, 0.3, 0.2} : one_hot(gold_label(r));
  }
  const MetricsReport r = gender_metrics(probs, golds);
  CHECK(r.bias == 1.0);
  CHECK(r.male_f1 == r.female_f1);

  std::vector<GapRecord> only_male(golds.begin(), golds.begin() + 4);
  Predictions male_probs;
  for (const auto& g : only_male) male_probs[g.id] = probs[g.id];
  try {
    gender_metrics(male_probs, only_male);
    FAIL("single-gender set accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyGenderSubset);
  }
}

TEST_CASE("exact answer matching") {
  GapRecord r;
  r.text = "He thanked Margaret (Whittle) for the Lindsay Lohan's interest in buying the rights to Nicks.";
  r.a_name = "Margaret (Whittle)";
  r.a_offset = 11;
  r.b_name = "Lindsay Lohan";
  r.b_offset = 38;
  r.b_coref = true;
  CHECK(exact_answer_match({"x", {38, 51}, "Lindsay Lohan"}, r));
  CHECK(exact_answer_match({"x", {38, 53}, "Lindsay Lohan's"}, r));
  CHECK(exact_answer_match({"x", {38, 51}, "lindsay  LOHAN"}, r));
  CHECK_FALSE(exact_answer_match({"x", {38, 93}, "Lindsay Lohan's interest in buying the rights to Nicks"}, r));
  CHECK_FALSE(exact_answer_match({"x", {11, 29}, "Margaret (Whittle)"}, r));
  CHECK_FALSE(exact_answer_match({"x", {0, 13}, "Lindsay Lohan"}, r));

  r.b_coref = false;
  r.a_coref = true;
  CHECK(exact_answer_match({"x", {11, 29}, "Margaret (Whittle)"}, r));
  r.a_coref = false;
  CHECK_FALSE(exact_answer_match({"x", {11, 29}, "Margaret (Whittle)"}, r));
}

TEST_CASE("prediction CSV round trip and errors") {
  Rng rng(95);
  Predictions p;
  for (int i = 0; i < 20; ++i) p["development-" + std::to_string(i)] = random_triple(rng);
  const std::string csv = format_predictions_csv(p);
  CHECK(csv.rfind("ID,A,B,NEITHER\n", 0) == 0);
  const Predictions back = parse_predictions_csv(csv);
  REQUIRE(back.size() == p.size());
  for (const auto& [id, t] : p)
    for (int c = 0; c < 3; ++c) CHECK(std::abs(back.at(id).at(c) - t.at(c)) <= 5e-11);
  CHECK(format_predictions_csv(back) == csv);

  CHECK_THROWS_AS(parse_predictions_csv("id,a,b,n\nx,1,0,0\n"), Error);
  CHECK_THROWS_AS(parse_predictions_csv("ID,A,B,NEITHER\nx,1,0\n"), Error);
  CHECK_THROWS_AS(parse_predictions_csv("ID,A,B,NEITHER\nx,1,0,zero\n"), Error);
  CHECK_THROWS_AS(parse_predictions_csv("ID,A,B,NEITHER\nx,1,0,0\nx,0,1,0\n"), Error);
  CHECK(parse_predictions_csv("ID,A,B,NEITHER\r\nx,1,0,0\r\n").at("x") == ProbTriple{1, 0, 0});
}

TEST_CASE("answers TSV") {
  const std::string tsv = format_answers_tsv({{"r1", {3, 8}, "Carol"}});
  CHECK(tsv == "record_id\tchar_start\tchar_end\tanswer_text\nr1\t3\t8\tCarol\n");
}
