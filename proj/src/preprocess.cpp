#include "xsslab/preprocess.hpp"

#include "xsslab/text.hpp"

namespace xsslab::preprocess {
namespace {

using text::is_space;
using text::is_word;

std::size_t word_run(std::string_view s, std::size_t pos) {
  std::size_t end = pos;
  while (end < s.size() && is_word(s[end])) ++end;
  return end;
}

// [\w\.]+?\(
std::size_t match_function(std::string_view s, std::size_t pos) {
  std::size_t end = pos;
  while (end < s.size() && (is_word(s[end]) || s[end] == '.')) ++end;
  if (end == pos || end >= s.size() || s[end] != '(') return 0;
  return end + 1;
}

// "\w+?" and '\w+?'
std::size_t match_quoted(std::string_view s, std::size_t pos, char quote) {
  if (s[pos] != quote) return 0;
  const std::size_t end = word_run(s, pos + 1);
  if (end == pos + 1 || end >= s.size() || s[end] != quote) return 0;
  return end + 1;
}

// http://\w+
std::size_t match_url(std::string_view s, std::size_t pos) {
  constexpr std::string_view kScheme = "http://";
  if (s.substr(pos, kScheme.size()) != kScheme) return 0;
  const std::size_t end = word_run(s, pos + kScheme.size());
  return end == pos + kScheme.size() ? 0 : end;
}

// <\w+> and </\w+>
std::size_t match_tag(std::string_view s, std::size_t pos, bool closing) {
  const std::string_view prefix = closing ? "</" : "<";
  if (s.substr(pos, prefix.size()) != prefix) return 0;
  const std::size_t start = pos + prefix.size();
  const std::size_t end = word_run(s, start);
  if (end == start || end >= s.size() || s[end] != '>') return 0;
  return end + 1;
}

// \b\w+=
std::size_t match_attribute(std::string_view s, std::size_t pos) {
  if (!is_word(s[pos]) || (pos > 0 && is_word(s[pos - 1]))) return 0;
  const std::size_t end = word_run(s, pos);
  if (end >= s.size() || s[end] != '=') return 0;
  return end + 1;
}

// (?<=\()\S+(?=\)) : the longest non-space run ending right before a ')'.
std::size_t match_paren_content(std::string_view s, std::size_t pos) {
  if (pos == 0 || s[pos - 1] != '(') return 0;
  std::size_t best = 0;
  for (std::size_t q = pos; q < s.size() && !is_space(s[q]); ++q) {
    if (s[q] == ')' && q > pos) best = q;
  }
  return best;
}

}  // namespace

std::string normalize(std::string_view input) {
  std::string current(input);
  for (;;) {
    std::string next = text::decode_html_entities(current);
    next = text::percent_decode(next);
    next = text::js_unescape(next);
    next = text::unicode_lower(text::sanitize_utf8(next));
    std::string rewritten;
    rewritten.reserve(next.size());
    constexpr std::string_view kSecure = "https://";
    for (std::size_t i = 0; i < next.size();) {
      if (next.compare(i, kSecure.size(), kSecure) == 0 && i + kSecure.size() < next.size() &&
          next[i + kSecure.size()] != '/' && !is_space(next[i + kSecure.size()])) {
        rewritten += "http://";
        i += kSecure.size();
      } else {
        rewritten += next[i++];
      }
    }
    if (rewritten == current) break;
    current = std::move(rewritten);
  }
  return current;
}

RuleMatch match_rule_at(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return {};
  std::size_t end = 0;
  if ((end = match_function(s, pos))) return {0, end};
  if ((end = match_quoted(s, pos, '"'))) return {1, end};
  if ((end = match_quoted(s, pos, '\''))) return {2, end};
  if ((end = match_url(s, pos))) return {3, end};
  if ((end = match_tag(s, pos, false))) return {4, end};
  if ((end = match_tag(s, pos, true))) return {5, end};
  if ((end = match_attribute(s, pos))) return {6, end};
  if ((end = match_paren_content(s, pos))) return {7, end};
  return {};
}

TokenSequence tokenize(std::string_view s) {
  TokenSequence seq;
  seq.normalized_text = std::string(s);
  std::size_t pos = 0;
  while (pos < s.size()) {
    const RuleMatch m = match_rule_at(s, pos);
    if (m.rule < 0) {
      ++pos;
      continue;
    }
    seq.tokens.emplace_back(s.substr(pos, m.end - pos));
    seq.spans.push_back({pos, m.end});
    pos = m.end;
  }
  return seq;
}

TokenSequence preprocess(std::string_view raw) { return tokenize(normalize(raw)); }

}  // namespace xsslab::preprocess
