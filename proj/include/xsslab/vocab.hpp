#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xsslab/corpus.hpp"
#include "xsslab/preprocess.hpp"
#include "xsslab/util.hpp"

namespace xsslab::vocab {

using preprocess::TokenSequence;

inline constexpr std::string_view kNoneToken = "None";

class Vocabulary {
 public:
  Vocabulary();  // just "None"
  explicit Vocabulary(std::vector<std::string> tokens_in_index_order);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const { return index_.contains(std::string(token)); }
  // Index of the token, or 0 ("None") when out of vocabulary.
  std::size_t index_of(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Keeps the ceil(fraction * distinct) most frequent tokens (ties broken
// lexicographically) behind a leading "None". Throws on an empty corpus.
Vocabulary build_vocabulary(std::span<const TokenSequence> corpus, double fraction = 0.10);

// As above, but `corpus` must be exactly the detector training split: any
// payload from another split, or a repeated payload, is a ConfigError.
Vocabulary build_vocabulary_for_split(const corpus::DatasetSplit& split, const std::vector<corpus::Payload>& corpus,
                                      double fraction = 0.10);

TokenSequence substitute_oov(const TokenSequence& seq, const Vocabulary& vocab);

struct EmbeddingConfig {
  std::size_t dim = 32;
  std::size_t max_len = 200;
  double vocab_fraction = 0.10;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;

  static EmbeddingConfig preset(std::string_view name);  // "default" (32-d) or "replication" (8-d)
  json to_json() const;
  static EmbeddingConfig from_json(const json& j);
};

struct EmbeddingTable {
  Vocabulary vocabulary;
  std::vector<double> vectors;  // |V| x dim, row-major
  std::size_t dim = 32;
  std::size_t max_len = 200;

  std::span<const double> vector(std::size_t index) const { return {vectors.data() + index * dim, dim}; }
};

// Skip-gram with negative sampling over already-substituted sequences.
// Single-threaded and deterministic for a fixed seed.
EmbeddingTable train_embeddings(std::span<const TokenSequence> substituted, const Vocabulary& vocab,
                                const EmbeddingConfig& config, std::uint64_t seed);

struct EmbeddedSample {
  std::vector<double> matrix;  // max_len x dim, row-major; rows >= true_len are zero
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t true_len = 0;
  std::vector<std::size_t> oov_positions;

  const double* row(std::size_t i) const { return matrix.data() + i * cols; }
};

EmbeddedSample embed(const TokenSequence& seq, const EmbeddingTable& table);

// Share of "None" tokens among the first max_len tokens; 0 for empty input.
double oov_rate(const TokenSequence& substituted, std::size_t max_len = 200);

void save_table(const std::filesystem::path& json_path, const EmbeddingTable& table);
EmbeddingTable load_table(const std::filesystem::path& json_path);

}  // namespace xsslab::vocab
