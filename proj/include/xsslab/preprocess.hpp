#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace xsslab::preprocess {

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<Span> spans;  // byte offsets into normalized_text, one per token
  std::string normalized_text;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// Decode (entities, percent escapes, JS escapes), lowercase, and force URL
// schemes to "http://". Repeats until stable. After the first round no pass
// can lengthen the text, so there is no decode bomb to cap.
std::string normalize(std::string_view text);

// Left-to-right scan applying the token rules in precedence order at every
// offset; characters no rule matches are skipped. `text` must be normalized.
TokenSequence tokenize(std::string_view text);

// normalize + tokenize.
TokenSequence preprocess(std::string_view raw);

// Index of the first rule that matches exactly at `pos`, with the match end,
// or -1. Exposed for tests and the debug CLI.
struct RuleMatch {
  int rule = -1;
  std::size_t end = 0;
};
RuleMatch match_rule_at(std::string_view text, std::size_t pos);

}  // namespace xsslab::preprocess
