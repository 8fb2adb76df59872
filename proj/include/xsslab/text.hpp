#pragma once

#include <cstdint>
#include <string>
#include <string_view>

// Byte-level text helpers shared by the preprocessing pipeline and the HTML parser.
namespace xsslab::text {

inline bool is_word(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

inline bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

std::string ascii_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

void append_utf8(std::string& out, char32_t cp);

// Replaces every invalid UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view s);

// Simple (one-to-one) lowercase folding for ASCII, Latin-1, Latin Extended-A,
// Greek and Cyrillic. Input must be valid UTF-8.
std::string unicode_lower(std::string_view s);

// HTML character references: named (subset), decimal and hexadecimal, with
// the semicolon optional for numeric forms. Malformed references pass through.
std::string decode_html_entities(std::string_view s);

// %XX escapes to raw bytes. Malformed escapes pass through.
std::string percent_decode(std::string_view s);

// JavaScript \uXXXX and \xXX escapes to UTF-8. Malformed escapes pass through.
std::string js_unescape(std::string_view s);

std::string base64_encode(std::string_view s);

}  // namespace xsslab::text
