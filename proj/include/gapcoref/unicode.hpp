#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gapcoref {

// Text offsets throughout the toolkit count Unicode scalar values, not bytes.

std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view text);

// Code-point substring [start, start + length) of a UTF-8 string.
std::string utf8_substr(std::string_view text, std::int64_t start, std::int64_t length);

std::int64_t utf8_length(std::string_view text);

std::string ascii_lower(std::string_view text);

}  // namespace gapcoref
