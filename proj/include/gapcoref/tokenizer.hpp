#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gapcoref {

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kMaskToken = "[MASK]";

// WordPiece vocabulary; ids are line numbers of the vocabulary file.
class Vocab {
 public:
  // One token per line. Throws DuplicateToken or MissingSpecialToken.
  static Vocab load(std::string_view content);
  static Vocab load_file(const std::filesystem::path& path);
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::optional<std::int32_t> find(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }

  std::int32_t cls_id() const { return cls_; }
  std::int32_t sep_id() const { return sep_; }
  std::int32_t pad_id() const { return pad_; }
  std::int32_t unk_id() const { return unk_; }
  std::int32_t mask_id() const { return mask_; }

  // Vocabulary file content, one token per line.
  std::string serialize() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::int32_t cls_ = -1, sep_ = -1, pad_ = -1, unk_ = -1, mask_ = -1;
};

// Builds a vocabulary from a corpus: the special tokens, every normalized
// character seen (bare and "##"-prefixed), then whole words by descending
// frequency. Meant for corpora without a pretrained vocabulary.
Vocab build_vocab(const std::vector<std::string>& texts, std::size_t max_words = 30000);

// Half-open code-point interval into an original text.
struct CharSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;

  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Piece {
  std::string text;  // "##" prefix on continuation pieces
  std::int32_t id = 0;
  CharSpan span;     // in the original, un-lowercased text
};

struct TokenizedText {
  std::vector<Piece> pieces;

  std::size_t size() const { return pieces.size(); }
  bool empty() const { return pieces.empty(); }
};

// Inclusive token interval.
struct TokenSpan {
  int first = 0;
  int last = 0;

  int length() const { return last - first + 1; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// Half-open token interval.
struct TokenRange {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(TokenSpan s) const { return s.first >= begin && s.last < end && s.first <= s.last; }
  friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

// Uncased basic tokenization (lowercase, accent stripping, whitespace and
// punctuation splitting, CJK isolation) followed by greedy longest-match-first
// WordPiece. Unsegmentable words become a single [UNK] spanning the word.
TokenizedText wordpiece_tokenize(std::string_view text, const Vocab& vocab);

// Smallest piece interval covering every piece that overlaps
// [char_start, char_start + char_len). Throws NoOverlap.
TokenSpan align_char_span(const TokenizedText& text, std::int64_t char_start, std::int64_t char_len);

struct EncodedInput {
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> mask;
  std::vector<std::optional<CharSpan>> alignment;  // empty for special and pad tokens
  TokenRange first_range;
  TokenRange second_range;
  TokenRange passage_range;
  // Index, within the passage's TokenizedText, of the piece at passage_range.begin.
  int passage_piece_offset = 0;
  // Pieces of the passage that were cut by the length budget.
  int truncated_pieces = 0;

  std::size_t size() const { return ids.size(); }
};

// [CLS] first [SEP] second [SEP]. The second segment (the passage) is cut from
// the right to fit max_seq_len. Throws FirstSegmentTooLong.
EncodedInput encode_pair(const TokenizedText& first, const TokenizedText& second, const Vocab& vocab,
                         int max_seq_len);

// [CLS] text [SEP], keeping passage pieces starting at `piece_offset`.
EncodedInput encode_single(const TokenizedText& text, const Vocab& vocab, int max_seq_len,
                           int piece_offset = 0);

// Maps a span of passage pieces to encoded positions; nullopt when any part
// of it was truncated away.
std::optional<TokenSpan> passage_to_encoded(const EncodedInput& input, TokenSpan piece_span);

// Right-pads with [PAD] (mask 0) up to `length`.
EncodedInput pad_to(EncodedInput input, int length, const Vocab& vocab);

}  // namespace gapcoref
