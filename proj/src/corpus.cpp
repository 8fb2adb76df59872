#include "xsslab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <unordered_set>

#include "xsslab/rng.hpp"
#include "xsslab/text.hpp"

namespace xsslab::corpus {

json CsvFormat::to_json() const {
  json labels = json::object();
  for (const auto& [raw, label] : label_map) labels[raw] = oracle::to_string(label);
  return {{"payload_column", payload_column},
          {"label_column", label_column},
          {"label_map", labels},
          {"delimiter", std::string(1, delimiter)}};
}

CsvFormat CsvFormat::from_json(const json& j) {
  CsvFormat f;
  f.payload_column = j.value("payload_column", f.payload_column);
  f.label_column = j.value("label_column", f.label_column);
  if (j.contains("label_map")) {
    f.label_map.clear();
    for (const auto& [raw, label] : j.at("label_map").items()) {
      f.label_map[raw] = oracle::label_from_string(label.get<std::string>());
    }
  }
  const std::string delim = j.value("delimiter", std::string(","));
  if (delim.size() != 1) throw ConfigError("CSV delimiter must be a single character");
  f.delimiter = delim[0];
  return f;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view data, char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(std::string_view field, char delimiter) {
  const bool needs_quotes = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

IngestResult ingest_text(std::string_view csv, const CsvFormat& format) {
  IngestResult result;
  const auto rows = parse_csv(csv, format.delimiter);
  if (rows.empty()) {
    result.warnings.push_back("empty input: no header and no rows");
    return result;
  }
  const auto& header = rows.front();
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IngestError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t text_col = column(format.payload_column);
  const std::size_t label_col = column(format.label_column);

  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    ++result.rows;
    if (row.size() <= std::max(text_col, label_col)) {
      throw IngestError("row " + std::to_string(r) + ": expected at least " +
                        std::to_string(std::max(text_col, label_col) + 1) + " fields");
    }
    const auto label_it = format.label_map.find(row[label_col]);
    if (label_it == format.label_map.end()) {
      throw IngestError("row " + std::to_string(r) + ": unmappable label '" + row[label_col] + "'");
    }
    std::string text = text::sanitize_utf8(row[text_col]);
    if (text.empty()) {
      ++result.empty_texts;
      continue;
    }
    if (!seen.insert(text).second) {
      ++result.duplicates;
      continue;
    }
    result.payloads.push_back({std::move(text), label_it->second, static_cast<std::int64_t>(r)});
  }
  if (result.payloads.empty()) result.warnings.push_back("no payload rows after filtering");
  return result;
}

IngestResult ingest(const std::filesystem::path& path, const CsvFormat& format) {
  if (!std::filesystem::exists(path)) throw IngestError("dataset not found: " + path.string());
  IngestResult result = ingest_text(read_file(path), format);
  for (const auto& w : result.warnings) std::cerr << "warning: " << path.string() << ": " << w << "\n";
  return result;
}

PrefilterResult prefilter_with_oracle(const std::vector<Payload>& payloads, const OracleFn& oracle) {
  PrefilterResult result;
  for (const auto& p : payloads) {
    Label verdict;
    try {
      verdict = oracle(p.text);
    } catch (const std::exception&) {
      ++result.render_failures;
      continue;
    }
    if (verdict == p.label) {
      result.retained.push_back(p);
    } else if (p.label == Label::Benign) {
      ++result.removed_benign;
    } else {
      ++result.removed_malicious;
    }
  }
  return result;
}

PrefilterResult prefilter_with_oracle(const std::vector<Payload>& payloads) {
  return prefilter_with_oracle(payloads, [](std::string_view text) { return oracle::classify(text).label; });
}

std::vector<std::pair<std::string, const std::vector<Payload>*>> DatasetSplit::named() const {
  return {{"detector_train", &detector_train}, {"detector_val", &detector_val}, {"detector_test", &detector_test},
          {"agent_train", &agent_train},       {"agent_val", &agent_val},       {"agent_test", &agent_test}};
}

DatasetSplit balance_and_split(const std::vector<Payload>& payloads, std::uint64_t seed, Fractions fractions) {
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  std::vector<Payload> benign, malicious;
  for (const auto& p : payloads) (p.label == Label::Benign ? benign : malicious).push_back(p);
  if (benign.empty() || malicious.empty()) throw ConfigError("both classes must be non-empty to balance");

  Rng rng(seed);
  rng.shuffle(benign);
  rng.shuffle(malicious);
  const std::size_t n = std::min(benign.size(), malicious.size());
  benign.resize(n);
  malicious.resize(n);

  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions.val * static_cast<double>(n))));
  auto cut = [&](const std::vector<Payload>& v, std::size_t from, std::size_t to) {
    return std::vector<Payload>(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to));
  };

  DatasetSplit split;
  split.seed = seed;
  split.fractions = fractions;
  split.agent_train = cut(malicious, 0, n_train);
  split.agent_val = cut(malicious, n_train, n_train + n_val);
  split.agent_test = cut(malicious, n_train + n_val, n);

  auto merge = [&](std::size_t from, std::size_t to) {
    std::vector<Payload> out = cut(benign, from, to);
    const auto mal = cut(malicious, from, to);
    out.insert(out.end(), mal.begin(), mal.end());
    rng.shuffle(out);
    return out;
  };
  split.detector_train = merge(0, n_train);
  split.detector_val = merge(n_train, n_train + n_val);
  split.detector_test = merge(n_train + n_val, n);
  return split;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Payload>& payloads) {
  std::string out;
  for (const auto& p : payloads) {
    out += json{{"id", p.id}, {"text", p.text}, {"label", oracle::to_string(p.label)}}.dump() + "\n";
  }
  write_file(path, out);
}

std::vector<Payload> read_jsonl(const std::filesystem::path& path) {
  std::vector<Payload> payloads;
  const std::string data = read_file(path);
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    if (end > start) {
      const json j = json::parse(data.substr(start, end - start));
      payloads.push_back({j.at("text").get<std::string>(), oracle::label_from_string(j.at("label").get<std::string>()),
                          j.at("id").get<std::int64_t>()});
    }
    start = end + 1;
  }
  return payloads;
}

void save_split(const std::filesystem::path& dir, const DatasetSplit& split, const json& extra_manifest) {
  json counts = json::object();
  for (const auto& [name, items] : split.named()) {
    write_jsonl(dir / (name + ".jsonl"), *items);
    std::size_t mal = 0;
    for (const auto& p : *items) mal += p.label == Label::Malicious ? 1 : 0;
    counts[name] = {{"Benign", items->size() - mal}, {"Malicious", mal}};
  }
  json manifest = {{"seed", split.seed},
                   {"fractions", {split.fractions.train, split.fractions.val, split.fractions.test}},
                   {"counts", counts}};
  if (extra_manifest.is_object()) manifest.update(extra_manifest);
  write_json(dir / "manifest.json", manifest);
}

DatasetSplit load_split(const std::filesystem::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  DatasetSplit split;
  split.seed = manifest.at("seed").get<std::uint64_t>();
  const auto f = manifest.at("fractions");
  split.fractions = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>()};
  split.detector_train = read_jsonl(dir / "detector_train.jsonl");
  split.detector_val = read_jsonl(dir / "detector_val.jsonl");
  split.detector_test = read_jsonl(dir / "detector_test.jsonl");
  split.agent_train = read_jsonl(dir / "agent_train.jsonl");
  split.agent_val = read_jsonl(dir / "agent_val.jsonl");
  split.agent_test = read_jsonl(dir / "agent_test.jsonl");
  return split;
}

std::vector<std::string> texts(const std::vector<Payload>& payloads) {
  std::vector<std::string> out;
  out.reserve(payloads.size());
  for (const auto& p : payloads) out.push_back(p.text);
  return out;
}

}  // namespace xsslab::corpus
