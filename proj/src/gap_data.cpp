#include "gapcoref/gap_data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "gapcoref/error.hpp"
#include "gapcoref/rng.hpp"
#include "gapcoref/unicode.hpp"

namespace gapcoref {
namespace {

constexpr std::array<std::string_view, 11> kColumns = {
    "ID", "Text", "Pronoun", "Pronoun-offset", "A", "A-offset",
    "A-coref", "B", "B-offset", "B-coref", "URL"};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::int64_t parse_offset(std::string_view field, std::size_t line_no) {
  std::int64_t value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 0) {
    throw Error(ErrorCode::MalformedRow,
                "line " + std::to_string(line_no) + ": bad offset '" + std::string(field) + "'");
  }
  return value;
}

bool parse_flag(std::string_view field, std::size_t line_no) {
  const std::string lower = ascii_lower(field);
  if (lower == "true") return true;
  if (lower == "false") return false;
  throw Error(ErrorCode::MalformedRow,
              "line " + std::to_string(line_no) + ": bad coref flag '" + std::string(field) + "'");
}

void check_surface(const std::u32string& text, std::int64_t offset, const std::string& surface,
                   const GapRecord& record, const char* what) {
  const std::u32string form = decode_utf8(surface);
  const auto n = static_cast<std::int64_t>(text.size());
  if (offset >= n || offset + static_cast<std::int64_t>(form.size()) > n ||
      text.compare(static_cast<std::size_t>(offset), form.size(), form) != 0) {
    throw Error(ErrorCode::OffsetMismatch, "record " + record.id + ": " + what + " '" + surface +
                                               "' not found at offset " + std::to_string(offset));
  }
}

}  // namespace

const char* to_string(Label label) {
  switch (label) {
    case Label::A: return "A";
    case Label::B: return "B";
    case Label::N: return "N";
  }
  return "?";
}

const char* to_string(Gender gender) { return gender == Gender::Male ? "Male" : "Female"; }

void validate_record(const GapRecord& record) {
  if (record.a_coref && record.b_coref) {
    throw Error(ErrorCode::BothCorefTrue, "record " + record.id);
  }
  const std::u32string text = decode_utf8(record.text);
  check_surface(text, record.pronoun_offset, record.pronoun, record, "pronoun");
  check_surface(text, record.a_offset, record.a_name, record, "A");
  check_surface(text, record.b_offset, record.b_name, record, "B");
}

std::vector<GapRecord> parse_gap_tsv(std::string_view content) {
  std::vector<GapRecord> records;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (line.empty()) continue;

    const auto fields = split_tabs(line);
    if (!header_seen) {
      if (fields.size() != kColumns.size() ||
          !std::equal(fields.begin(), fields.end(), kColumns.begin())) {
        throw Error(ErrorCode::MalformedRow, "missing or unexpected GAP header");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != kColumns.size()) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected 11 columns, got " +
                                               std::to_string(fields.size()));
    }
    GapRecord r;
    r.id = fields[0];
    r.text = fields[1];
    r.pronoun = fields[2];
    r.pronoun_offset = parse_offset(fields[3], line_no);
    r.a_name = fields[4];
    r.a_offset = parse_offset(fields[5], line_no);
    r.a_coref = parse_flag(fields[6], line_no);
    r.b_name = fields[7];
    r.b_offset = parse_offset(fields[8], line_no);
    r.b_coref = parse_flag(fields[9], line_no);
    r.url = fields[10];
    validate_record(r);
    records.push_back(std::move(r));
  }
  if (!header_seen && !content.empty()) {
    throw Error(ErrorCode::MalformedRow, "missing GAP header");
  }
  return records;
}

std::vector<GapRecord> read_gap_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_gap_tsv(buffer.str());
}

std::string format_gap_tsv(const std::vector<GapRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i) out += '\t';
    out += kColumns[i];
  }
  out += '\n';
  for (const auto& r : records) {
    out += r.id + '\t' + r.text + '\t' + r.pronoun + '\t' + std::to_string(r.pronoun_offset) + '\t' +
           r.a_name + '\t' + std::to_string(r.a_offset) + '\t' + (r.a_coref ? "TRUE" : "FALSE") + '\t' +
           r.b_name + '\t' + std::to_string(r.b_offset) + '\t' + (r.b_coref ? "TRUE" : "FALSE") + '\t' +
           r.url + '\n';
  }
  return out;
}

Label gold_label(const GapRecord& record) {
  if (record.a_coref && record.b_coref) throw Error(ErrorCode::BothCorefTrue, "record " + record.id);
  if (record.a_coref) return Label::A;
  if (record.b_coref) return Label::B;
  return Label::N;
}

Gender pronoun_gender(std::string_view pronoun) {
  const std::string p = ascii_lower(pronoun);
  if (p == "he" || p == "him" || p == "his") return Gender::Male;
  if (p == "she" || p == "her" || p == "hers") return Gender::Female;
  throw Error(ErrorCode::UnknownPronoun, "'" + std::string(pronoun) + "'");
}

int FoldPlan::fold_of(const std::string& id) const {
  const auto it = assignments.find(id);
  if (it == assignments.end()) throw Error(ErrorCode::MissingExample, "id " + id + " not in fold plan");
  return it->second;
}

std::vector<GapRecord> FoldPlan::training_split(const std::vector<GapRecord>& records, int fold) const {
  std::vector<GapRecord> out;
  for (const auto& r : records) {
    if (k == 1 || fold_of(r.id) != fold) out.push_back(r);
  }
  return out;
}

std::vector<GapRecord> FoldPlan::holdout_split(const std::vector<GapRecord>& records, int fold) const {
  std::vector<GapRecord> out;
  if (k == 1) return out;
  for (const auto& r : records) {
    if (fold_of(r.id) == fold) out.push_back(r);
  }
  return out;
}

FoldPlan FoldPlan::single(const std::vector<GapRecord>& records) {
  FoldPlan plan;
  plan.k = 1;
  for (const auto& r : records) plan.assignments[r.id] = 0;
  return plan;
}

FoldPlan stratified_folds(const std::vector<GapRecord>& records, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::BadRange, "k must be at least 2");
  if (records.empty()) throw Error(ErrorCode::TooFewRecords, "no records");

  std::vector<std::size_t> male, female;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!seen.insert(records[i].id).second) {
      throw Error(ErrorCode::DuplicateId, "id " + records[i].id);
    }
    (pronoun_gender(records[i]) == Gender::Male ? male : female).push_back(i);
  }
  if (male.size() < static_cast<std::size_t>(k) || female.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::TooFewRecords, "each gender needs at least k records");
  }

  Rng male_rng(derive_seed(seed, "folds/male"));
  Rng female_rng(derive_seed(seed, "folds/female"));
  male_rng.shuffle(male);
  female_rng.shuffle(female);

  FoldPlan plan;
  plan.k = k;
  std::size_t next = 0;
  for (const auto* bucket : {&male, &female}) {
    for (std::size_t idx : *bucket) {
      plan.assignments[records[idx].id] = static_cast<int>(next % static_cast<std::size_t>(k));
      ++next;
    }
  }
  return plan;
}

DatasetStats dataset_stats(const std::vector<GapRecord>& records) {
  DatasetStats s;
  for (const auto& r : records) {
    ++s.total;
    switch (gold_label(r)) {
      case Label::A: ++s.a_count; break;
      case Label::B: ++s.b_count; break;
      case Label::N: ++s.n_count; break;
    }
  }
  return s;
}

GenderCounts gender_counts(const std::vector<GapRecord>& records) {
  GenderCounts c;
  for (const auto& r : records) {
    (pronoun_gender(r) == Gender::Male ? c.male : c.female) += 1;
  }
  return c;
}

}  // namespace gapcoref
