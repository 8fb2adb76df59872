#pragma once

#include <array>
#include <string_view>

namespace xsslab::preprocess {

// The eight tokenization rules, in precedence order. `pattern` is the
// original expression as published; `ecmascript` is the same rule in the
// std::regex (ECMAScript) dialect. ECMAScript has no lookbehind, so rule 8's
// "(?<=\()" guard is checked separately by callers of the regex form.
// The hand-written matchers in preprocess.cpp implement these exactly.
struct TokenRule {
  std::string_view name;
  std::string_view pattern;
  std::string_view ecmascript;
  bool needs_open_paren_before;
};

inline constexpr std::array<TokenRule, 8> kTokenRules{{
    {"Javascript function", R"((?x)[\w\.]+?\()", R"([\w\.]+?\()", false},
    {"Content within double quotes", R"("\w+?")", R"("\w+?")", false},
    {"Content within single quotes", R"('\w+?')", R"('\w+?')", false},
    {"URLs", R"(http://\w+)", R"(http://\w+)", false},
    {"Opening tags", R"(<\w+>)", R"(<\w+>)", false},
    {"Termination tags", R"(</\w+>)", R"(</\w+>)", false},
    {"Attributes", R"(\b\w+=)", R"(\b\w+=)", false},
    {"Content within parentheses", R"((?<=\()\S+(?=\)))", R"(\S+(?=\)))", true},
}};

}  // namespace xsslab::preprocess
