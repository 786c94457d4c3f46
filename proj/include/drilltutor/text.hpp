#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dt {

/// Half-open byte range [begin, end) into some UTF-8 string.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const Span&) const = default;
};

/// Code points of a UTF-8 string together with the byte offset of each
/// one; `offsets` has one extra trailing entry equal to the byte length.
struct DecodedText {
  std::u32string chars;
  std::vector<std::size_t> offsets;
};

/// Throws Error(InvalidUtf8) on malformed input.
DecodedText decode_utf8(std::string_view text);
bool is_valid_utf8(std::string_view text) noexcept;
void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(std::u32string_view text);

/// Unicode White_Space property.
bool is_space(char32_t cp) noexcept;
/// ASCII, Latin-1 and general punctuation plus the CJK/fullwidth marks
/// used in the shipped fixtures.
bool is_punctuation(char32_t cp) noexcept;

/// Simple one-to-one lowercase mapping for Latin, Greek and Cyrillic.
/// Scripts without case (kana, CJK) map to themselves.
char32_t fold_case(char32_t cp) noexcept;
std::string fold_case(std::string_view text);

/// Byte spans of the whitespace-separated tokens of `text`.
std::vector<Span> tokenize(std::string_view text);
std::size_t count_tokens(std::string_view text);

/// Removes leading and trailing Unicode whitespace.
std::string_view trim(std::string_view text);
/// Collapses every whitespace run to a single ASCII space and trims.
std::string normalize_space(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

using Timestamp = std::chrono::system_clock::time_point;

/// "2026-10-15T23:14:05.123Z"
std::string format_iso8601(Timestamp t);
/// "20261015T231405.123Z", safe for file names.
std::string format_iso8601_basic(Timestamp t);
/// Accepts either of the two forms above. Throws Error(ConstraintViolation).
Timestamp parse_iso8601(std::string_view text);

}  // namespace dt
