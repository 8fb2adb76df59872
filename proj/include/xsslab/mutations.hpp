#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xsslab/util.hpp"

namespace xsslab::mutations {

inline constexpr int kActionCount = 27;

enum class Category { Encoding, Case, Structure, KeywordReplacement, Insertion };

std::string_view to_string(Category c);

struct Action {
  int id;                       // 1..27
  std::string_view name;        // "A1".."A27"
  Category category;
  std::string_view summary;     // the catalogue row this rewrite implements
  std::string_view definition;  // the exact rewrite applied
};

struct MutationResult {
  std::string payload;
  bool changed = false;
  int action_id = 0;
};

// Literal prepended by A23.
inline constexpr std::string_view kInterferenceString = "?lang=en&q=";

std::span<const Action> registry();
const Action& action(int id);

// Parses "A21" or "21".
int parse_action_id(std::string_view s);

// Applies the rewrite at every matching site. Unknown ids throw ConfigError.
MutationResult apply_action(std::string_view payload, int action_id);

// Ids whose rewrite changes `payload`, ascending.
std::vector<int> applicable_actions(std::string_view payload);

json registry_json();

}  // namespace xsslab::mutations
