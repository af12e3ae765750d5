#include "gapcoref/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gapcoref/error.hpp"
#include "gapcoref/unicode.hpp"

namespace gapcoref {

namespace {

template <typename A, typename B>
void require_same_ids(const std::map<std::string, A>& x, const std::map<std::string, B>& y, const char* what) {
  bool same = x.size() == y.size();
  if (same) {
    auto it = y.begin();
    for (const auto& [id, _] : x) {
      if (id != (it++)->first) {
        same = false;
        break;
      }
    }
  }
  if (!same) throw Error(ErrorCode::CoverageMismatch, std::string(what) + ": id sets differ");
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

F1Result finish(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  F1Result r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  r.recall = safe_ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

void tally(Label predicted, GoldFlags gold, std::int64_t& tp, std::int64_t& fp, std::int64_t& fn) {
  const bool pred[2] = {predicted == Label::A, predicted == Label::B};
  const bool truth[2] = {gold.a_coref, gold.b_coref};
  for (int i = 0; i < 2; ++i) {
    if (pred[i] && truth[i]) ++tp;
    else if (pred[i]) ++fp;
    else if (truth[i]) ++fn;
  }
}

std::string normalize_answer(std::string_view text) {
  std::string lowered = ascii_lower(text);
  std::string collapsed;
  bool space = false;
  for (char c : lowered) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = !collapsed.empty();
      continue;
    }
    if (space) collapsed.push_back(' ');
    space = false;
    collapsed.push_back(c);
  }
  auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  auto strip = [&](std::string& s) {
    while (!s.empty() && (is_punct(s.front()) || s.front() == ' ')) s.erase(s.begin());
    while (!s.empty() && (is_punct(s.back()) || s.back() == ' ')) s.pop_back();
  };
  strip(collapsed);
  for (std::string_view suffix : {"'s", "’s"}) {
    if (collapsed.size() > suffix.size() && collapsed.ends_with(suffix)) {
      collapsed.resize(collapsed.size() - suffix.size());
      strip(collapsed);
      break;
    }
  }
  return collapsed;
}

std::string format_prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10f", p);
  return buf;
}

double parse_prob(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line) + ": bad probability '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

Predictions ensemble_average(const std::vector<Predictions>& systems) {
  Predictions out;
  if (systems.empty()) return out;
  for (const auto& s : systems) require_same_ids(systems.front(), s, "ensemble");
  const double n = static_cast<double>(systems.size());
  for (const auto& [id, _] : systems.front()) {
    double a = 0.0, b = 0.0, c = 0.0;
    for (const auto& s : systems) {
      const ProbTriple& p = s.at(id);
      a += p.p_a;
      b += p.p_b;
      c += p.p_n;
    }
    out[id] = ProbTriple{a / n, b / n, c / n};
  }
  return out;
}

Label argmax_label(const ProbTriple& p) {
  if (p.p_a >= p.p_b && p.p_a >= p.p_n) return Label::A;
  if (p.p_b >= p.p_n) return Label::B;
  return Label::N;
}

F1Result gap_f1(const std::map<std::string, Label>& predictions, const std::map<std::string, GoldFlags>& golds) {
  require_same_ids(predictions, golds, "gap_f1");
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& [id, label] : predictions) tally(label, golds.at(id), tp, fp, fn);
  return finish(tp, fp, fn);
}

double log_loss(const Predictions& probs, const std::map<std::string, Label>& golds, double clip) {
  require_same_ids(probs, golds, "log_loss");
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [id, p] : probs) {
    const double q = std::clamp(p[golds.at(id)], clip, 1.0 - clip);
    total -= std::log(q);
  }
  return total / static_cast<double>(probs.size());
}

MetricsReport gender_metrics(const std::map<std::string, Label>& predictions,
                             const std::map<std::string, GoldFlags>& golds,
                             const std::map<std::string, Gender>& genders, const Predictions& probs, bool macro) {
  require_same_ids(predictions, golds, "gender_metrics");
  require_same_ids(predictions, genders, "gender_metrics");
  require_same_ids(predictions, probs, "gender_metrics");

  std::int64_t counts[2][3] = {};  // [gender][tp, fp, fn]
  MetricsReport report;
  std::map<std::string, Label> gold_labels;
  for (const auto& [id, label] : predictions) {
    const GoldFlags g = golds.at(id);
    const int gi = genders.at(id) == Gender::Male ? 0 : 1;
    tally(label, g, counts[gi][0], counts[gi][1], counts[gi][2]);
    (gi == 0 ? report.male_support : report.female_support) += 1;
    gold_labels[id] = g.a_coref ? Label::A : (g.b_coref ? Label::B : Label::N);
  }
  if (report.male_support == 0) throw Error(ErrorCode::EmptyGenderSubset, "no male examples");
  if (report.female_support == 0) throw Error(ErrorCode::EmptyGenderSubset, "no female examples");

  report.male = finish(counts[0][0], counts[0][1], counts[0][2]);
  report.female = finish(counts[1][0], counts[1][1], counts[1][2]);
  report.overall = finish(counts[0][0] + counts[1][0], counts[0][1] + counts[1][1], counts[0][2] + counts[1][2]);
  report.male_f1 = report.male.f1;
  report.female_f1 = report.female.f1;
  report.macro_overall = macro;
  report.overall_f1 = macro ? 0.5 * (report.male_f1 + report.female_f1) : report.overall.f1;
  report.bias = safe_ratio(report.female_f1, report.male_f1);
  report.log_loss = log_loss(probs, gold_labels);
  return report;
}

MetricsReport gender_metrics(const Predictions& probs, const std::vector<GapRecord>& golds, bool macro) {
  std::map<std::string, Label> labels;
  std::map<std::string, GoldFlags> flags;
  std::map<std::string, Gender> genders;
  for (const auto& r : golds) {
    if (!flags.emplace(r.id, GoldFlags{r.a_coref, r.b_coref}).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate gold id " + r.id);
    }
    genders[r.id] = pronoun_gender(r);
  }
  for (const auto& [id, p] : probs) labels[id] = argmax_label(p);
  return gender_metrics(labels, flags, genders, probs, macro);
}

std::string format_ratio(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

std::string format_report(const MetricsReport& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-8s %-6s %-6s %-6s %-6s\n", "L", "O", "M", "F", "B");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-8.4f %-6.1f %-6.1f %-6.1f %-6s\n", r.log_loss, 100.0 * r.overall_f1,
                100.0 * r.male_f1, 100.0 * r.female_f1, format_ratio(r.bias).c_str());
  out += buf;
  std::ostringstream kv;
  kv.precision(10);
  kv << "log_loss=" << r.log_loss << '\n'
     << "overall_f1=" << r.overall_f1 << '\n'
     << "male_f1=" << r.male_f1 << '\n'
     << "female_f1=" << r.female_f1 << '\n'
     << "bias=" << r.bias << '\n'
     << "overall_averaging=" << (r.macro_overall ? "macro" : "micro") << '\n'
     << "male_support=" << r.male_support << '\n'
     << "female_support=" << r.female_support << '\n'
     << "overall_precision=" << r.overall.precision << '\n'
     << "overall_recall=" << r.overall.recall << '\n'
     << "tp=" << r.overall.tp << '\n'
     << "fp=" << r.overall.fp << '\n'
     << "fn=" << r.overall.fn << '\n';
  return out + kv.str();
}

bool exact_answer_match(const ExtractedAnswer& answer, const GapRecord& record) {
  const Label gold = gold_label(record);
  if (gold == Label::N) return false;
  const std::string& name = gold == Label::A ? record.a_name : record.b_name;
  const std::int64_t start = gold == Label::A ? record.a_offset : record.b_offset;
  const std::int64_t end = start + utf8_length(name);
  const bool overlaps = answer.chars.start < end && start < answer.chars.end;
  return overlaps && normalize_answer(answer.text) == normalize_answer(name);
}

std::string format_predictions_csv(const Predictions& predictions) {
  std::string out = "ID,A,B,NEITHER\n";
  for (const auto& [id, p] : predictions) {
    out += id;
    out += ',' + format_prob(p.p_a) + ',' + format_prob(p.p_b) + ',' + format_prob(p.p_n) + '\n';
  }
  return out;
}

Predictions parse_predictions_csv(std::string_view content) {
  Predictions out;
  std::size_t line_no = 0;
  bool header = true;
  while (!content.empty()) {
    const std::size_t nl = content.find('\n');
    std::string_view line = content.substr(0, nl);
    content = nl == std::string_view::npos ? std::string_view{} : content.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (header) {
      if (line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
      if (line != "ID,A,B,NEITHER") throw Error(ErrorCode::MalformedRow, "prediction CSV must start with ID,A,B,NEITHER");
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 4) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected 4 fields");
    const std::string id(fields[0]);
    const ProbTriple p{parse_prob(fields[1], line_no), parse_prob(fields[2], line_no), parse_prob(fields[3], line_no)};
    if (!out.emplace(id, p).second) throw Error(ErrorCode::DuplicateId, "duplicate prediction id " + id);
  }
  if (header) throw Error(ErrorCode::MalformedRow, "prediction CSV is empty");
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_predictions_csv(const Predictions& predictions, const std::filesystem::path& path) {
  write_text_file(path, format_predictions_csv(predictions));
}

Predictions read_predictions_csv(const std::filesystem::path& path) {
  return parse_predictions_csv(read_text_file(path));
}

std::string format_answers_tsv(const std::vector<ExtractedAnswer>& answers) {
  std::string out = "record_id\tchar_start\tchar_end\tanswer_text\n";
  for (const auto& a : answers) {
    std::string text = a.text;
    std::replace_if(text.begin(), text.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    out += a.record_id + '\t' + std::to_string(a.chars.start) + '\t' + std::to_string(a.chars.end) + '\t' + text + '\n';
  }
  return out;
}

}  // namespace gapcoref
