#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gapcoref {

enum class Label { A = 0, B = 1, N = 2 };
enum class Gender { Male, Female };

const char* to_string(Label label);
const char* to_string(Gender gender);

// One row of a GAP-format file. Offsets are code-point indices into `text`.
struct GapRecord {
  std::string id;
  std::string text;
  std::string pronoun;
  std::int64_t pronoun_offset = 0;
  std::string a_name;
  std::int64_t a_offset = 0;
  bool a_coref = false;
  std::string b_name;
  std::int64_t b_offset = 0;
  bool b_coref = false;
  std::string url;
};

// Parses GAP TSV content (header row with the 11 GAP column names, LF or CRLF
// line endings). Every record is validated: surface forms must appear at
// their stated offsets and at most one coreference flag may be set.
std::vector<GapRecord> parse_gap_tsv(std::string_view content);
std::vector<GapRecord> read_gap_file(const std::filesystem::path& path);

// Serializes records back to the GAP TSV layout, header included.
std::string format_gap_tsv(const std::vector<GapRecord>& records);

// Checks the record invariants; throws the same errors parse_gap_tsv does.
void validate_record(const GapRecord& record);

Label gold_label(const GapRecord& record);

Gender pronoun_gender(std::string_view pronoun);
inline Gender pronoun_gender(const GapRecord& record) { return pronoun_gender(record.pronoun); }

// Assignment of record ids to k folds.
struct FoldPlan {
  int k = 0;
  std::map<std::string, int> assignments;

  int fold_of(const std::string& id) const;

  // Records trained on for `fold`: everything outside it, or everything when
  // the plan is the degenerate single-fold plan.
  std::vector<GapRecord> training_split(const std::vector<GapRecord>& records, int fold) const;
  std::vector<GapRecord> holdout_split(const std::vector<GapRecord>& records, int fold) const;

  // k = 1: one model trained on every record.
  static FoldPlan single(const std::vector<GapRecord>& records);
};

// Gender-stratified k-fold assignment. Each gender bucket is shuffled with a
// seeded generator and dealt round-robin across the folds, the female deal
// continuing where the male deal stopped so total fold sizes stay level.
FoldPlan stratified_folds(const std::vector<GapRecord>& records, int k, std::uint64_t seed);

struct DatasetStats {
  std::int64_t total = 0;
  std::int64_t a_count = 0;
  std::int64_t b_count = 0;
  std::int64_t n_count = 0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

DatasetStats dataset_stats(const std::vector<GapRecord>& records);

struct GenderCounts {
  std::int64_t male = 0;
  std::int64_t female = 0;
};

GenderCounts gender_counts(const std::vector<GapRecord>& records);

}  // namespace gapcoref
