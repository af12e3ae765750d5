#include "gapcoref/tokenizer.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "gapcoref/error.hpp"
#include "gapcoref/unicode.hpp"

namespace gapcoref {
namespace {

constexpr std::size_t kMaxCharsPerWord = 100;

struct NormChar {
  char32_t c;
  std::int64_t orig;
};

using Word = std::vector<NormChar>;

bool is_whitespace(char32_t c) {
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return true;
  return u_charType(static_cast<UChar32>(c)) == U_SPACE_SEPARATOR;
}

bool is_control(char32_t c) {
  if (c == '\t' || c == '\n' || c == '\r') return false;
  const auto t = u_charType(static_cast<UChar32>(c));
  return t == U_CONTROL_CHAR || t == U_FORMAT_CHAR;
}

bool is_punctuation(char32_t c) {
  if ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126)) {
    return true;
  }
  switch (u_charType(static_cast<UChar32>(c))) {
    case U_DASH_PUNCTUATION:
    case U_START_PUNCTUATION:
    case U_END_PUNCTUATION:
    case U_CONNECTOR_PUNCTUATION:
    case U_OTHER_PUNCTUATION:
    case U_INITIAL_PUNCTUATION:
    case U_FINAL_PUNCTUATION:
      return true;
    default:
      return false;
  }
}

bool is_cjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2A6DF) ||
         (c >= 0x2A700 && c <= 0x2B73F) || (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B820 && c <= 0x2CEAF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

// Lowercases and strips combining marks from one code point.
void normalize_into(char32_t c, std::int64_t orig, Word& out) {
  if (c < 0x80) {
    if (c >= 'A' && c <= 'Z') c = c - 'A' + 'a';
    out.push_back({c, orig});
    return;
  }
  UErrorCode status = U_ZERO_ERROR;
  static const icu::Normalizer2* nfd = icu::Normalizer2::getNFDInstance(status);
  icu::UnicodeString s(static_cast<UChar32>(c));
  s.toLower(icu::Locale::getRoot());
  status = U_ZERO_ERROR;
  const icu::UnicodeString decomposed = nfd->normalize(s, status);
  const icu::UnicodeString& src = U_SUCCESS(status) ? decomposed : s;
  for (int32_t i = 0; i < src.length();) {
    const UChar32 d = src.char32At(i);
    i += U16_LENGTH(d);
    if (u_charType(d) == U_NON_SPACING_MARK) continue;
    out.push_back({static_cast<char32_t>(d), orig});
  }
}

// Basic tokenization into words of normalized characters that remember the
// original code-point index they came from.
std::vector<Word> basic_tokenize(const std::u32string& text) {
  std::vector<Word> words;
  Word current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  };
  Word normalized;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char32_t c = text[i];
    const auto orig = static_cast<std::int64_t>(i);
    if (c == 0 || c == 0xFFFD || is_control(c)) continue;
    if (is_whitespace(c)) {
      flush();
      continue;
    }
    if (is_cjk(c)) {
      flush();
      words.push_back(Word{{c, orig}});
      continue;
    }
    normalized.clear();
    normalize_into(c, orig, normalized);
    for (const NormChar& nc : normalized) {
      if (is_punctuation(nc.c)) {
        flush();
        words.push_back(Word{nc});
      } else {
        current.push_back(nc);
      }
    }
  }
  flush();
  return words;
}

std::string word_text(const Word& w, std::size_t begin, std::size_t end) {
  std::u32string s;
  s.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) s.push_back(w[i].c);
  return encode_utf8(s);
}

}  // namespace

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw Error(ErrorCode::DuplicateToken, "'" + v.tokens_[i] + "' at line " + std::to_string(i + 1));
    }
  }
  auto special = [&](std::string_view name) {
    const auto id = v.find(name);
    if (!id) throw Error(ErrorCode::MissingSpecialToken, std::string(name));
    return *id;
  };
  v.cls_ = special(kClsToken);
  v.sep_ = special(kSepToken);
  v.pad_ = special(kPadToken);
  v.unk_ = special(kUnkToken);
  v.mask_ = special(kMaskToken);
  return v;
}

Vocab Vocab::load(std::string_view content) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    std::string_view line = content.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    tokens.emplace_back(line);
    pos = eol + 1;
  }
  return from_tokens(std::move(tokens));
}

Vocab Vocab::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load(buffer.str());
}

std::optional<std::int32_t> Vocab::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocab build_vocab(const std::vector<std::string>& texts, std::size_t max_words) {
  std::map<std::string, std::int64_t> word_counts;
  std::map<std::string, int> chars;
  for (const auto& text : texts) {
    for (const Word& w : basic_tokenize(decode_utf8(text))) {
      for (std::size_t i = 0; i < w.size(); ++i) chars[word_text(w, i, i + 1)] = 0;
      if (w.size() > 1) ++word_counts[word_text(w, 0, w.size())];
    }
  }
  std::vector<std::string> tokens = {std::string(kPadToken), std::string(kUnkToken), std::string(kClsToken),
                                     std::string(kSepToken), std::string(kMaskToken)};
  for (const auto& [c, _] : chars) tokens.push_back(c);
  for (const auto& [c, _] : chars) tokens.push_back("##" + c);
  std::vector<std::pair<std::string, std::int64_t>> words(word_counts.begin(), word_counts.end());
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  if (words.size() > max_words) words.resize(max_words);
  for (auto& [w, _] : words) tokens.push_back(w);
  return Vocab::from_tokens(std::move(tokens));
}

TokenizedText wordpiece_tokenize(std::string_view text, const Vocab& vocab) {
  TokenizedText out;
  for (const Word& word : basic_tokenize(decode_utf8(text))) {
    const CharSpan whole{word.front().orig, word.back().orig + 1};
    if (word.size() > kMaxCharsPerWord) {
      out.pieces.push_back({std::string(kUnkToken), vocab.unk_id(), whole});
      continue;
    }
    std::vector<Piece> pieces;
    bool bad = false;
    std::size_t start = 0;
    while (start < word.size()) {
      std::size_t end = word.size();
      std::optional<std::int32_t> found;
      std::string candidate;
      while (start < end) {
        candidate = (start > 0 ? "##" : "") + word_text(word, start, end);
        found = vocab.find(candidate);
        if (found) break;
        --end;
      }
      if (!found) {
        bad = true;
        break;
      }
      pieces.push_back({candidate, *found, {word[start].orig, word[end - 1].orig + 1}});
      start = end;
    }
    if (bad) {
      out.pieces.push_back({std::string(kUnkToken), vocab.unk_id(), whole});
    } else {
      for (auto& p : pieces) out.pieces.push_back(std::move(p));
    }
  }
  return out;
}

TokenSpan align_char_span(const TokenizedText& text, std::int64_t char_start, std::int64_t char_len) {
  const std::int64_t char_end = char_start + char_len;
  int first = -1;
  int last = -1;
  for (std::size_t i = 0; i < text.pieces.size(); ++i) {
    const CharSpan& s = text.pieces[i].span;
    if (s.start < char_end && char_start < s.end) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  }
  if (first < 0) {
    throw Error(ErrorCode::NoOverlap,
                "chars [" + std::to_string(char_start) + ", " + std::to_string(char_end) + ") cover no token");
  }
  return {first, last};
}

namespace {

void push_token(EncodedInput& e, std::int32_t id, std::int32_t segment, std::optional<CharSpan> span) {
  e.ids.push_back(id);
  e.segment_ids.push_back(segment);
  e.mask.push_back(1);
  e.alignment.push_back(span);
}

}  // namespace

EncodedInput encode_pair(const TokenizedText& first, const TokenizedText& second, const Vocab& vocab,
                         int max_seq_len) {
  const int first_len = static_cast<int>(first.size());
  if (first_len + 3 > max_seq_len) {
    throw Error(ErrorCode::FirstSegmentTooLong, std::to_string(first_len) + " pieces do not fit in " +
                                                    std::to_string(max_seq_len));
  }
  const int budget = max_seq_len - 3 - first_len;
  const int kept = std::min(budget, static_cast<int>(second.size()));

  EncodedInput e;
  push_token(e, vocab.cls_id(), 0, std::nullopt);
  for (const auto& p : first.pieces) push_token(e, p.id, 0, p.span);
  push_token(e, vocab.sep_id(), 0, std::nullopt);
  for (int i = 0; i < kept; ++i) push_token(e, second.pieces[i].id, 1, second.pieces[i].span);
  push_token(e, vocab.sep_id(), 1, std::nullopt);

  e.first_range = {1, 1 + first_len};
  e.second_range = {2 + first_len, 2 + first_len + kept};
  e.passage_range = e.second_range;
  e.passage_piece_offset = 0;
  e.truncated_pieces = static_cast<int>(second.size()) - kept;
  return e;
}

EncodedInput encode_single(const TokenizedText& text, const Vocab& vocab, int max_seq_len, int piece_offset) {
  if (max_seq_len < 3) throw Error(ErrorCode::FirstSegmentTooLong, "max_seq_len below 3");
  const int total = static_cast<int>(text.size());
  piece_offset = std::clamp(piece_offset, 0, total);
  const int kept = std::min(max_seq_len - 2, total - piece_offset);

  EncodedInput e;
  push_token(e, vocab.cls_id(), 0, std::nullopt);
  for (int i = 0; i < kept; ++i) {
    const auto& p = text.pieces[static_cast<std::size_t>(piece_offset + i)];
    push_token(e, p.id, 0, p.span);
  }
  push_token(e, vocab.sep_id(), 0, std::nullopt);
  e.first_range = {1, 1 + kept};
  e.second_range = {2 + kept, 2 + kept};
  e.passage_range = e.first_range;
  e.passage_piece_offset = piece_offset;
  e.truncated_pieces = total - kept;
  return e;
}

std::optional<TokenSpan> passage_to_encoded(const EncodedInput& input, TokenSpan piece_span) {
  const int shift = input.passage_range.begin - input.passage_piece_offset;
  const TokenSpan mapped{piece_span.first + shift, piece_span.last + shift};
  if (!input.passage_range.contains(mapped)) return std::nullopt;
  return mapped;
}

EncodedInput pad_to(EncodedInput input, int length, const Vocab& vocab) {
  while (static_cast<int>(input.ids.size()) < length) {
    input.ids.push_back(vocab.pad_id());
    input.segment_ids.push_back(0);
    input.mask.push_back(0);
    input.alignment.push_back(std::nullopt);
  }
  return input;
}

}  // namespace gapcoref
