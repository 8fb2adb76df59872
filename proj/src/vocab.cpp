#include "xsslab/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace xsslab::vocab {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{std::string(kNoneToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_.front() != kNoneToken) {
    throw ConfigError("vocabulary must start with the \"None\" token");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw ConfigError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

Vocabulary build_vocabulary(std::span<const TokenSequence> corpus, double fraction) {
  if (corpus.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("vocabulary fraction must be in (0, 1]");
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus) {
    for (const auto& t : seq.tokens) ++counts[t];
  }
  counts.erase(std::string(kNoneToken));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ranked.size()) - 1e-9));
  std::vector<std::string> tokens{std::string(kNoneToken)};
  for (std::size_t i = 0; i < keep && i < ranked.size(); ++i) tokens.push_back(ranked[i].first);
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocabulary_for_split(const corpus::DatasetSplit& split, const std::vector<corpus::Payload>& payloads,
                                      double fraction) {
  std::set<std::int64_t> allowed;
  for (const auto& p : split.detector_train) allowed.insert(p.id);
  std::set<std::int64_t> seen;
  std::vector<TokenSequence> sequences;
  sequences.reserve(payloads.size());
  for (const auto& p : payloads) {
    if (!allowed.contains(p.id)) {
      throw ConfigError("vocabulary must be built from the detector training split only; payload " +
                        std::to_string(p.id) + " is not in it");
    }
    if (!seen.insert(p.id).second) {
      throw ConfigError("payload " + std::to_string(p.id) + " appears twice in the vocabulary corpus");
    }
    sequences.push_back(preprocess::preprocess(p.text));
  }
  return build_vocabulary(sequences, fraction);
}

TokenSequence substitute_oov(const TokenSequence& seq, const Vocabulary& vocab) {
  TokenSequence out = seq;
  for (auto& t : out.tokens) {
    if (!vocab.contains(t)) t = std::string(kNoneToken);
  }
  return out;
}

EmbeddingConfig EmbeddingConfig::preset(std::string_view name) {
  EmbeddingConfig c;
  if (name == "default") return c;
  if (name == "replication") {
    c.dim = 8;
    return c;
  }
  throw ConfigError("unknown embedding preset '" + std::string(name) + "'");
}

json EmbeddingConfig::to_json() const {
  return {{"dim", dim},         {"max_len", max_len},     {"vocab_fraction", vocab_fraction},
          {"window", window},   {"negatives", negatives}, {"epochs", epochs},
          {"learning_rate", learning_rate}};
}

EmbeddingConfig EmbeddingConfig::from_json(const json& j) {
  EmbeddingConfig c = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : EmbeddingConfig{};
  c.dim = j.value("dim", c.dim);
  c.max_len = j.value("max_len", c.max_len);
  c.vocab_fraction = j.value("vocab_fraction", c.vocab_fraction);
  c.window = j.value("window", c.window);
  c.negatives = j.value("negatives", c.negatives);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  return c;
}

EmbeddedSample embed(const TokenSequence& seq, const EmbeddingTable& table) {
  EmbeddedSample sample;
  sample.rows = table.max_len;
  sample.cols = table.dim;
  sample.matrix.assign(table.max_len * table.dim, 0.0);
  sample.true_len = std::min(seq.tokens.size(), table.max_len);
  for (std::size_t i = 0; i < sample.true_len; ++i) {
    const std::size_t idx = table.vocabulary.index_of(seq.tokens[i]);
    if (idx == 0) sample.oov_positions.push_back(i);
    const auto v = table.vector(idx);
    std::copy(v.begin(), v.end(), sample.matrix.begin() + static_cast<std::ptrdiff_t>(i * table.dim));
  }
  return sample;
}

double oov_rate(const TokenSequence& substituted, std::size_t max_len) {
  const std::size_t n = std::min(substituted.tokens.size(), max_len);
  if (n == 0) return 0.0;
  std::size_t none = 0;
  for (std::size_t i = 0; i < n; ++i) none += substituted.tokens[i] == kNoneToken ? 1 : 0;
  return static_cast<double>(none) / static_cast<double>(n);
}

void save_table(const std::filesystem::path& json_path, const EmbeddingTable& table) {
  std::filesystem::path blob = json_path;
  blob.replace_extension(".bin");
  write_f32_blob(blob, table.vectors);
  write_json(json_path, {{"dim", table.dim},
                         {"max_len", table.max_len},
                         {"vocab", table.vocabulary.tokens()},
                         {"blob", blob.filename().string()},
                         {"blob_sha256", sha256_file(blob)}});
}

EmbeddingTable load_table(const std::filesystem::path& json_path) {
  const json header = read_json(json_path);
  EmbeddingTable table;
  table.dim = header.at("dim").get<std::size_t>();
  table.max_len = header.at("max_len").get<std::size_t>();
  table.vocabulary = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
  table.vectors = read_f32_blob(json_path.parent_path() / header.at("blob").get<std::string>());
  if (table.vectors.size() != table.vocabulary.size() * table.dim) {
    throw ShapeError("embedding blob holds " + std::to_string(table.vectors.size()) + " floats, expected " +
                     std::to_string(table.vocabulary.size() * table.dim));
  }
  return table;
}

}  // namespace xsslab::vocab
