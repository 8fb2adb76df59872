#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "xsslab/oracle.hpp"
#include "xsslab/text.hpp"

namespace xsslab::oracle {
namespace {

using text::ascii_lower;
using text::is_space;

constexpr std::array<std::string_view, 16> kVoidElements = {
    "area", "base", "br", "col", "embed", "hr", "img", "image", "input", "keygen", "link", "meta",
    "param", "source", "track", "wbr"};

// Elements whose content is not parsed as markup.
constexpr std::array<std::string_view, 9> kRawTextElements = {
    "script", "style", "xmp", "iframe", "noembed", "noframes", "noscript", "textarea", "title"};

bool contains(auto const& list, std::string_view name) {
  return std::find(list.begin(), list.end(), name) != list.end();
}

struct Attribute {
  std::string name;
  std::string value;
};

struct TagToken {
  std::string name;
  std::vector<Attribute> attributes;
};

bool is_dangerous_uri(std::string_view raw_value) {
  std::string value;
  for (char c : raw_value) {
    if (c == '\t' || c == '\n' || c == '\r') continue;
    value += ascii_lower(c);
  }
  std::size_t start = 0;
  while (start < value.size() && static_cast<unsigned char>(value[start]) <= 0x20) ++start;
  const std::string_view v = std::string_view(value).substr(start);
  return v.starts_with("javascript:") || v.starts_with("vbscript:") || v.starts_with("data:");
}

void apply_attributes(NodeLabel& label, const std::vector<Attribute>& attributes) {
  for (const auto& attr : attributes) {
    if (attr.name.size() > 2 && attr.name.starts_with("on")) label.handlers.push_back(attr.name);
    if (is_dangerous_uri(attr.value)) label.dangerous_uri = true;
  }
  std::sort(label.handlers.begin(), label.handlers.end());
  label.handlers.erase(std::unique(label.handlers.begin(), label.handlers.end()), label.handlers.end());
}

std::string sanitize_name_char(char c) {
  if (c == '\0') return "\xEF\xBF\xBD";
  return std::string(1, ascii_lower(c));
}

class TreeBuilder {
 public:
  TreeBuilder() {
    tree_.nodes.push_back({NodeLabel{"#document", {}, false}, {}});
    stack_.push_back(0);
  }

  void start_tag(const TagToken& tag) {
    if (tag.name == "html" || tag.name == "body") {
      // A repeated html/body start tag merges new attributes into the open element.
      for (std::size_t idx : stack_) {
        if (tree_.nodes[idx].label.tag == tag.name) {
          apply_attributes(tree_.nodes[idx].label, tag.attributes);
          return;
        }
      }
    }
    if (tag.name == "head" && in_stack("body")) return;
    NodeLabel label{tag.name, {}, false};
    apply_attributes(label, tag.attributes);
    const std::size_t idx = tree_.nodes.size();
    tree_.nodes.push_back({std::move(label), {}});
    tree_.nodes[stack_.back()].children.push_back(idx);
    if (!contains(kVoidElements, tag.name)) stack_.push_back(idx);
  }

  void end_tag(std::string_view name) {
    if (name == "html" || name == "body") return;
    if (name == "head" && in_stack("body")) return;
    for (std::size_t i = stack_.size(); i-- > 1;) {
      if (tree_.nodes[stack_[i]].label.tag == name) {
        stack_.resize(i);
        return;
      }
    }
  }

  ElementTree finish() { return std::move(tree_); }

 private:
  bool in_stack(std::string_view name) const {
    return std::any_of(stack_.begin(), stack_.end(),
                       [&](std::size_t idx) { return tree_.nodes[idx].label.tag == name; });
  }

  ElementTree tree_;
  std::vector<std::size_t> stack_;
};

class Tokenizer {
 public:
  Tokenizer(std::string_view html, TreeBuilder& builder) : s_(html), builder_(builder) {}

  void run() {
    while (pos_ < s_.size()) {
      if (s_[pos_] != '<') {
        ++pos_;
        continue;
      }
      markup();
    }
  }

 private:
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }
  bool at_end() const { return pos_ >= s_.size(); }

  void skip_past(std::string_view terminator) {
    const std::size_t found = s_.find(terminator, pos_);
    pos_ = found == std::string_view::npos ? s_.size() : found + terminator.size();
  }

  void markup() {
    const char next = peek(1);
    if (next == '!') {
      if (s_.substr(pos_, 4) == "<!--") {
        pos_ += 4;
        // "<!-->" and "<!--->" close immediately.
        if (peek() == '>') {
          ++pos_;
        } else if (peek() == '-' && peek(1) == '>') {
          pos_ += 2;
        } else {
          skip_past("-->");
        }
      } else {
        skip_past(">");
      }
      return;
    }
    if (next == '?') {
      skip_past(">");
      return;
    }
    if (next == '/') {
      const char after = peek(2);
      if (text::is_alpha(after)) {
        pos_ += 2;
        std::string name = tag_name();
        skip_tag_remainder();
        if (!name.empty() && !eof_in_tag_) builder_.end_tag(name);
      } else if (after == '>') {
        pos_ += 3;
      } else if (after == '\0' && pos_ + 2 >= s_.size()) {
        pos_ = s_.size();
      } else {
        skip_past(">");
      }
      return;
    }
    if (text::is_alpha(next)) {
      ++pos_;
      TagToken tag;
      tag.name = tag_name();
      attributes(tag);
      if (eof_in_tag_) return;
      builder_.start_tag(tag);
      if (tag.name == "plaintext") {
        pos_ = s_.size();
      } else if (contains(kRawTextElements, tag.name)) {
        raw_text(tag.name);
      }
      return;
    }
    ++pos_;  // a lone '<' is text
  }

  std::string tag_name() {
    std::string name;
    while (!at_end() && !is_space(peek()) && peek() != '/' && peek() != '>') {
      name += sanitize_name_char(peek());
      ++pos_;
    }
    if (at_end()) eof_in_tag_ = true;
    return name;
  }

  void skip_tag_remainder() {
    TagToken ignored;
    attributes(ignored);
  }

  void attributes(TagToken& tag) {
    while (true) {
      while (!at_end() && (is_space(peek()) || peek() == '/')) ++pos_;
      if (at_end()) {
        eof_in_tag_ = true;
        return;
      }
      if (peek() == '>') {
        ++pos_;
        return;
      }
      Attribute attr;
      attr.name += sanitize_name_char(peek());  // may legitimately start with '='
      ++pos_;
      while (!at_end() && !is_space(peek()) && peek() != '/' && peek() != '>' && peek() != '=') {
        attr.name += sanitize_name_char(peek());
        ++pos_;
      }
      std::size_t look = pos_;
      while (look < s_.size() && is_space(s_[look])) ++look;
      if (look < s_.size() && s_[look] == '=') {
        pos_ = look + 1;
        while (!at_end() && is_space(peek())) ++pos_;
        attr.value = attribute_value();
        if (eof_in_tag_) return;
      }
      if (std::none_of(tag.attributes.begin(), tag.attributes.end(),
                       [&](const Attribute& a) { return a.name == attr.name; })) {
        tag.attributes.push_back(std::move(attr));
      }
    }
  }

  std::string attribute_value() {
    std::string raw;
    if (peek() == '"' || peek() == '\'') {
      const char quote = peek();
      ++pos_;
      const std::size_t close = s_.find(quote, pos_);
      if (close == std::string_view::npos) {
        pos_ = s_.size();
        eof_in_tag_ = true;
        return {};
      }
      raw = std::string(s_.substr(pos_, close - pos_));
      pos_ = close + 1;
    } else {
      while (!at_end() && !is_space(peek()) && peek() != '>') raw += s_[pos_++];
      if (at_end()) eof_in_tag_ = true;
    }
    return text::decode_html_entities(raw);
  }

  void raw_text(std::string_view name) {
    std::size_t search = pos_;
    while (true) {
      const std::size_t lt = s_.find("</", search);
      if (lt == std::string_view::npos) {
        pos_ = s_.size();
        return;
      }
      const std::size_t after = lt + 2 + name.size();
      if (after <= s_.size() && text::iequals(s_.substr(lt + 2, name.size()), name) &&
          (after == s_.size() || is_space(s_[after]) || s_[after] == '/' || s_[after] == '>')) {
        pos_ = lt;
        return;
      }
      search = lt + 2;
    }
  }

  std::string_view s_;
  TreeBuilder& builder_;
  std::size_t pos_ = 0;
  bool eof_in_tag_ = false;
};

void serialize_node(const ElementTree& tree, std::size_t idx, std::string& out) {
  const auto& node = tree.nodes[idx];
  out += '<';
  out += node.label.tag;
  for (const auto& handler : node.label.handlers) out += " " + handler + "=\"\"";
  if (node.label.dangerous_uri) out += " href=\"javascript:\"";
  out += '>';
  for (std::size_t child : node.children) serialize_node(tree, child, out);
  if (!contains(kVoidElements, node.label.tag)) out += "</" + node.label.tag + ">";
}

}  // namespace

ElementTree parse_dom(std::string_view html) {
  TreeBuilder builder;
  Tokenizer(html, builder).run();
  return builder.finish();
}

std::string serialize(const ElementTree& tree) {
  std::string out;
  if (tree.empty()) return out;
  for (std::size_t child : tree.nodes[0].children) serialize_node(tree, child, out);
  return out;
}

}  // namespace xsslab::oracle
