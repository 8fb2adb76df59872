#include "xsslab/text.hpp"

#include <array>
#include <string_view>
#include <utility>

namespace xsslab::text {
namespace {

struct NamedEntity {
  std::string_view name;
  char32_t cp;
};

// Subset of the HTML named references: everything the mutation catalogue emits
// plus the common punctuation and Latin-1 names seen in payload corpora.
constexpr std::array kNamedEntities = std::to_array<NamedEntity>({
    {"amp", U'&'},      {"AMP", U'&'},      {"lt", U'<'},        {"LT", U'<'},
    {"gt", U'>'},       {"GT", U'>'},       {"quot", U'"'},      {"QUOT", U'"'},
    {"apos", U'\''},    {"nbsp", 0xA0},     {"Tab", U'\t'},      {"NewLine", U'\n'},
    {"colon", U':'},    {"Colon", 0x2237},  {"lpar", U'('},      {"rpar", U')'},
    {"sol", U'/'},      {"bsol", U'\\'},    {"lsqb", U'['},      {"rsqb", U']'},
    {"lbrack", U'['},   {"rbrack", U']'},   {"lcub", U'{'},      {"rcub", U'}'},
    {"lbrace", U'{'},   {"rbrace", U'}'},   {"semi", U';'},      {"comma", U','},
    {"period", U'.'},   {"excl", U'!'},     {"quest", U'?'},     {"num", U'#'},
    {"dollar", U'$'},   {"percnt", U'%'},   {"plus", U'+'},      {"equals", U'='},
    {"lowbar", U'_'},   {"grave", U'`'},    {"Hat", U'^'},       {"ast", U'*'},
    {"midast", U'*'},   {"vert", U'|'},     {"verbar", U'|'},    {"hyphen", 0x2010},
    {"dash", 0x2010},   {"tilde", 0x02DC},  {"commat", U'@'},    {"copy", 0xA9},
    {"reg", 0xAE},      {"deg", 0xB0},      {"laquo", 0xAB},     {"raquo", 0xBB},
    {"middot", 0xB7},   {"times", 0xD7},    {"divide", 0xF7},    {"euro", 0x20AC},
    {"pound", 0xA3},    {"yen", 0xA5},      {"cent", 0xA2},      {"sect", 0xA7},
    {"para", 0xB6},     {"iexcl", 0xA1},    {"iquest", 0xBF},    {"shy", 0xAD},
    {"ndash", 0x2013},  {"mdash", 0x2014},  {"lsquo", 0x2018},   {"rsquo", 0x2019},
    {"ldquo", 0x201C},  {"rdquo", 0x201D},  {"hellip", 0x2026},  {"bull", 0x2022},
    {"zwj", 0x200D},    {"zwnj", 0x200C},   {"ensp", 0x2002},    {"emsp", 0x2003},
    {"auml", 0xE4},     {"ouml", 0xF6},     {"uuml", 0xFC},      {"szlig", 0xDF},
    {"eacute", 0xE9},   {"egrave", 0xE8},   {"aacute", 0xE1},    {"agrave", 0xE0},
});

// Legacy references browsers accept without the trailing semicolon.
constexpr std::array<std::string_view, 8> kSemicolonOptional = {"amp", "AMP", "lt", "LT",
                                                                 "gt", "GT",  "quot", "QUOT"};

char32_t sanitize_cp(std::uint64_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0xFFFD;
  return static_cast<char32_t>(cp);
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Length of the valid UTF-8 sequence starting at s[i], or 0 if invalid.
std::size_t utf8_sequence_length(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return 1;
  std::size_t len = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    min = 0x10000;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  char32_t cp = b0 & (0x7F >> len);
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

char32_t decode_at(std::string_view s, std::size_t i, std::size_t len) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (len == 1) return b0;
  char32_t cp = b0 & (0x7F >> len);
  for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  return cp;
}

char32_t lower_cp(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
  if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E && cp % 2 == 1) return cp + 1;
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

}  // namespace

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (ascii_lower(a[i]) != ascii_lower(b[i])) return false;
  }
  return true;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string sanitize_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t len = utf8_sequence_length(s, i);
    if (len == 0) {
      append_utf8(out, 0xFFFD);
      ++i;
    } else {
      out.append(s.substr(i, len));
      i += len;
    }
  }
  return out;
}

std::string unicode_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    if (b < 0x80) {
      out += ascii_lower(s[i]);
      ++i;
      continue;
    }
    const std::size_t len = utf8_sequence_length(s, i);
    if (len == 0) {
      out += s[i];
      ++i;
      continue;
    }
    append_utf8(out, lower_cp(decode_at(s, i, len)));
    i += len;
  }
  return out;
}

std::string decode_html_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    if (i + 1 < s.size() && s[i + 1] == '#') {
      std::size_t j = i + 2;
      const bool hex = j < s.size() && (s[j] == 'x' || s[j] == 'X');
      if (hex) ++j;
      const std::size_t digits_start = j;
      std::uint64_t value = 0;
      while (j < s.size() && (hex ? hex_value(s[j]) >= 0 : (s[j] >= '0' && s[j] <= '9'))) {
        if (value <= 0x10FFFF) value = value * (hex ? 16 : 10) + static_cast<std::uint64_t>(hex_value(s[j]));
        ++j;
      }
      if (j == digits_start) {
        out += s[i++];
        continue;
      }
      if (j < s.size() && s[j] == ';') ++j;
      append_utf8(out, sanitize_cp(value));
      i = j;
      continue;
    }
    std::size_t j = i + 1;
    while (j < s.size() && j - i <= 32 && (is_alpha(s[j]) || (j > i + 1 && s[j] >= '0' && s[j] <= '9'))) ++j;
    const std::string_view name = s.substr(i + 1, j - i - 1);
    const bool semicolon = j < s.size() && s[j] == ';';
    bool decoded = false;
    if (!name.empty()) {
      for (const auto& entity : kNamedEntities) {
        if (entity.name != name) continue;
        bool optional = false;
        for (auto legacy : kSemicolonOptional) optional = optional || legacy == name;
        if (semicolon || optional) {
          append_utf8(out, entity.cp);
          i = j + (semicolon ? 1 : 0);
          decoded = true;
        }
        break;
      }
    }
    if (!decoded) out += s[i++];
  }
  return out;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && hex_value(s[i + 1]) >= 0 && hex_value(s[i + 2]) >= 0) {
      out += static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2]));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string js_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char kind = s[i + 1];
      const std::size_t width = kind == 'u' ? 4 : (kind == 'x' ? 2 : 0);
      if (width > 0 && i + 2 + width <= s.size()) {
        std::uint32_t value = 0;
        bool ok = true;
        for (std::size_t k = 0; k < width; ++k) {
          const int h = hex_value(s[i + 2 + k]);
          if (h < 0) {
            ok = false;
            break;
          }
          value = value * 16 + static_cast<std::uint32_t>(h);
        }
        if (ok) {
          append_utf8(out, sanitize_cp(value));
          i += 2 + width;
          continue;
        }
      }
    }
    out += s[i++];
  }
  return out;
}

std::string base64_encode(std::string_view s) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((s.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < s.size(); i += 3) {
    const auto n = (static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << 16) |
                   (static_cast<std::uint32_t>(static_cast<unsigned char>(s[i + 1])) << 8) |
                   static_cast<unsigned char>(s[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i < s.size()) {
    std::uint32_t n = static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << 16;
    if (i + 1 < s.size()) n |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i + 1])) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += i + 1 < s.size() ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

}  // namespace xsslab::text
