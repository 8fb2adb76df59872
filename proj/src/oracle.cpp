#include "xsslab/oracle.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "xsslab/util.hpp"

namespace xsslab::oracle {
namespace {

constexpr std::string_view kSite = "{{payload}}";

std::string load_template() {
  std::string path = std::string(XSSLAB_ASSET_DIR) + "/template.html";
  if (const char* override_path = std::getenv("XSSLAB_TEMPLATE")) path = override_path;
  std::string html = read_file(path);
  const auto first = html.find(kSite);
  if (first == std::string::npos || html.find(kSite, first + 1) != std::string::npos) {
    throw ConfigError("template " + path + " must contain exactly one " + std::string(kSite));
  }
  return html;
}

const ElementTree& baseline_tree() {
  static const ElementTree tree = parse_dom(render(""));
  return tree;
}

}  // namespace

std::string NodeLabel::str() const {
  std::string out = tag;
  if (!handlers.empty()) {
    out += "[";
    for (std::size_t i = 0; i < handlers.size(); ++i) out += (i ? "," : "") + handlers[i];
    out += "]";
  }
  if (dangerous_uri) out += "!";
  return out;
}

std::string_view to_string(Label label) { return label == Label::Malicious ? "Malicious" : "Benign"; }

Label label_from_string(std::string_view s) {
  if (s == "Malicious") return Label::Malicious;
  if (s == "Benign") return Label::Benign;
  throw Error("unknown label '" + std::string(s) + "'");
}

const std::string& page_template() {
  static const std::string html = load_template();
  return html;
}

std::string template_sha256() { return sha256_hex(page_template()); }

std::string render(std::string_view payload) {
  const std::string& html = page_template();
  const auto site = html.find(kSite);
  std::string out;
  out.reserve(html.size() + payload.size());
  out.append(html, 0, site);
  out.append(payload);
  out.append(html, site + kSite.size());
  return out;
}

Verdict classify(std::string_view payload) {
  const std::size_t distance = tree_edit_distance(parse_dom(render(payload)), baseline_tree());
  return {distance > 0 ? Label::Malicious : Label::Benign, distance};
}

std::string detokenize_for_oracle(const preprocess::TokenSequence& seq) {
  const std::string& text = seq.normalized_text;
  if (seq.spans.size() != seq.tokens.size()) throw Error("token/span count mismatch");
  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const auto& span = seq.spans[i];
    if (span.start < cursor || span.end < span.start || span.end > text.size()) {
      throw Error("token span out of bounds: internal tokenizer error");
    }
    out.append(text, cursor, span.start - cursor);
    if (seq.tokens[i] == "None") {
      out += "None";
    } else {
      out.append(text, span.start, span.end - span.start);
    }
    cursor = span.end;
  }
  out.append(text, cursor, std::string::npos);
  return out;
}

std::string detokenize_for_oracle(std::string_view original, const preprocess::TokenSequence& seq) {
  preprocess::TokenSequence checked = seq;
  checked.normalized_text = preprocess::normalize(original);
  return detokenize_for_oracle(checked);
}

double ruin_rate(std::span<const std::string> payloads) {
  if (payloads.empty()) throw Error("ruin rate of an empty payload set is undefined");
  std::size_t malicious = 0;
  for (const auto& p : payloads) malicious += is_malicious(p) ? 1 : 0;
  return 1.0 - static_cast<double>(malicious) / static_cast<double>(payloads.size());
}

}  // namespace xsslab::oracle
