#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xsslab/oracle.hpp"
#include "xsslab/util.hpp"

namespace xsslab::corpus {

using oracle::Label;

struct Payload {
  std::string text;
  Label label = Label::Benign;
  std::int64_t id = 0;  // data row index of the first occurrence

  friend bool operator==(const Payload&, const Payload&) = default;
};

// How to read a payload CSV: which columns hold the text and the label, and
// how raw label values map onto Benign/Malicious.
struct CsvFormat {
  std::string payload_column = "Payloads";
  std::string label_column = "Class";
  std::map<std::string, Label> label_map = {
      {"Malicious", Label::Malicious}, {"Benign", Label::Benign}, {"1", Label::Malicious}, {"0", Label::Benign}};
  char delimiter = ',';

  json to_json() const;
  static CsvFormat from_json(const json& j);
};

struct IngestResult {
  std::vector<Payload> payloads;
  std::size_t rows = 0;
  std::size_t duplicates = 0;
  std::size_t empty_texts = 0;
  std::vector<std::string> warnings;
};

// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view data, char delimiter);
std::string csv_escape(std::string_view field, char delimiter = ',');

IngestResult ingest(const std::filesystem::path& path, const CsvFormat& format);
IngestResult ingest_text(std::string_view csv, const CsvFormat& format);

using OracleFn = std::function<Label(std::string_view)>;

struct PrefilterResult {
  std::vector<Payload> retained;
  std::size_t removed_benign = 0;     // labelled Benign, oracle says Malicious
  std::size_t removed_malicious = 0;  // labelled Malicious, oracle says Benign
  std::size_t render_failures = 0;
};

// Keeps payloads whose oracle verdict equals their label.
PrefilterResult prefilter_with_oracle(const std::vector<Payload>& payloads, const OracleFn& oracle);
PrefilterResult prefilter_with_oracle(const std::vector<Payload>& payloads);

struct Fractions {
  double train = 0.64;
  double val = 0.16;
  double test = 0.20;
};

struct DatasetSplit {
  std::vector<Payload> detector_train, detector_val, detector_test;
  std::vector<Payload> agent_train, agent_val, agent_test;
  std::uint64_t seed = 0;
  Fractions fractions;

  // name -> split, in the canonical order used for files and manifests.
  std::vector<std::pair<std::string, const std::vector<Payload>*>> named() const;
};

// Undersamples the majority class to the minority count, shuffles each class
// with `seed`, and cuts it by `fractions`. Agent splits are the Malicious
// members of the matching detector split.
DatasetSplit balance_and_split(const std::vector<Payload>& payloads, std::uint64_t seed, Fractions fractions = {});

void write_jsonl(const std::filesystem::path& path, const std::vector<Payload>& payloads);
std::vector<Payload> read_jsonl(const std::filesystem::path& path);

// One JSONL file per split plus manifest.json.
void save_split(const std::filesystem::path& dir, const DatasetSplit& split, const json& extra_manifest = {});
DatasetSplit load_split(const std::filesystem::path& dir);

std::vector<std::string> texts(const std::vector<Payload>& payloads);

// Deterministic stand-in for the public payload CSV, same column layout.
struct SynthConfig {
  std::uint64_t seed = 20240501;
  std::size_t benign = 10000;
  std::size_t malicious = 4885;
};
std::string synthesize_csv(const SynthConfig& config);

}  // namespace xsslab::corpus
