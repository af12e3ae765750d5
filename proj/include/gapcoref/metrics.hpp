#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gapcoref/gap_data.hpp"
#include "gapcoref/prob.hpp"
#include "gapcoref/qa.hpp"

namespace gapcoref {

// Per-id mean over systems. Throws CoverageMismatch when id sets differ.
Predictions ensemble_average(const std::vector<Predictions>& systems);

// Largest probability; exact ties go to A, then B.
Label argmax_label(const ProbTriple& p);

struct GoldFlags {
  bool a_coref = false;
  bool b_coref = false;
};

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

// Two binary decisions per example (pronoun-A, pronoun-B), micro-averaged.
// Throws CoverageMismatch unless both maps hold the same ids.
F1Result gap_f1(const std::map<std::string, Label>& predictions, const std::map<std::string, GoldFlags>& golds);

// Mean of -ln(clamp(p_gold, clip, 1 - clip)). Throws CoverageMismatch.
double log_loss(const Predictions& probs, const std::map<std::string, Label>& golds, double clip = 1e-15);

struct MetricsReport {
  double male_f1 = 0.0;
  double female_f1 = 0.0;
  double overall_f1 = 0.0;
  double bias = 0.0;  // female_f1 / male_f1; 0 when male_f1 is 0
  double log_loss = 0.0;
  std::int64_t male_support = 0;
  std::int64_t female_support = 0;
  F1Result male, female, overall;
  bool macro_overall = false;
};

// `macro` replaces the overall F1 by the mean of the two gender F1s.
// Throws EmptyGenderSubset, CoverageMismatch.
MetricsReport gender_metrics(const Predictions& probs, const std::vector<GapRecord>& golds, bool macro = false);

// Same report from explicit labels, flags and genders.
MetricsReport gender_metrics(const std::map<std::string, Label>& predictions,
                             const std::map<std::string, GoldFlags>& golds,
                             const std::map<std::string, Gender>& genders, const Predictions& probs,
                             bool macro = false);

// Two-decimal display used in the report table.
std::string format_ratio(double value);

// Plain-text table (L, O, M, F, B columns) followed by key=value lines.
std::string format_report(const MetricsReport& report);

// True when the answer overlaps the gold candidate's span and, after
// lowercasing and whitespace collapsing, equals the gold name up to a trailing
// possessive "'s" and surrounding punctuation. Gold N never matches.
bool exact_answer_match(const ExtractedAnswer& answer, const GapRecord& record);

// "ID,A,B,NEITHER" CSV with ten decimals per probability.
std::string format_predictions_csv(const Predictions& predictions);
Predictions parse_predictions_csv(std::string_view content);  // throws MalformedRow
void write_predictions_csv(const Predictions& predictions, const std::filesystem::path& path);
Predictions read_predictions_csv(const std::filesystem::path& path);

// record_id, char_start, char_end, answer_text
std::string format_answers_tsv(const std::vector<ExtractedAnswer>& answers);

std::string read_text_file(const std::filesystem::path& path);  // throws Io
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace gapcoref
