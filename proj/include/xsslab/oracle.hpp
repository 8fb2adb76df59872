#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xsslab/preprocess.hpp"

namespace xsslab::oracle {

// Canonical node label: lowercase tag, sorted event-handler attribute names,
// and whether any attribute value carries a javascript:/vbscript:/data: URI.
struct NodeLabel {
  std::string tag;
  std::vector<std::string> handlers;
  bool dangerous_uri = false;

  friend bool operator==(const NodeLabel&, const NodeLabel&) = default;
  std::string str() const;
};

// Ordered rooted tree in a flat arena. Node 0 is the document root.
struct ElementTree {
  struct Node {
    NodeLabel label;
    std::vector<std::size_t> children;

    friend bool operator==(const Node&, const Node&) = default;
  };
  std::vector<Node> nodes;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  friend bool operator==(const ElementTree&, const ElementTree&) = default;
};

enum class Label { Benign, Malicious };

std::string_view to_string(Label label);
Label label_from_string(std::string_view s);

struct Verdict {
  Label label = Label::Benign;
  std::size_t distance = 0;
};

// The page template with its single interpolation site.
const std::string& page_template();
std::string template_sha256();

// Substitutes the payload verbatim at the template's interpolation site.
std::string render(std::string_view payload);

// Permissive HTML parsing; text and comments are dropped, only elements kept.
ElementTree parse_dom(std::string_view html);

// Emits HTML that parse_dom maps back to the same tree.
std::string serialize(const ElementTree& tree);

// Zhang-Shasha, unit costs for insert, delete and relabel.
std::size_t tree_edit_distance(const ElementTree& a, const ElementTree& b);

Verdict classify(std::string_view payload);
inline bool is_malicious(std::string_view payload) { return classify(payload).label == Label::Malicious; }

// Rebuilds the string a detector effectively sees: the normalized payload
// with every token replaced by "None" (after OOV substitution) spliced in.
// Spans must index into substituted.normalized_text; a span out of bounds
// means the tokenizer produced garbage and is reported as an Error.
std::string detokenize_for_oracle(const preprocess::TokenSequence& substituted);
// Same, with the spans checked against normalize(original).
std::string detokenize_for_oracle(std::string_view original, const preprocess::TokenSequence& substituted);

// 1 - (fraction classified Malicious). Throws on an empty set.
double ruin_rate(std::span<const std::string> payloads);

}  // namespace xsslab::oracle
