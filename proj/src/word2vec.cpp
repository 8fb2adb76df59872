#include <cmath>

#include "xsslab/rng.hpp"
#include "xsslab/vocab.hpp"

namespace xsslab::vocab {
namespace {

constexpr std::size_t kUnigramTableSize = 1'000'000;

double sigmoid(double x) {
  if (x > 30) return 1.0;
  if (x < -30) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

EmbeddingTable train_embeddings(std::span<const TokenSequence> substituted, const Vocabulary& vocab,
                                const EmbeddingConfig& config, std::uint64_t seed) {
  const std::size_t V = vocab.size();
  const std::size_t D = config.dim;
  Rng rng(seed);

  std::vector<std::vector<std::size_t>> sentences;
  std::vector<double> counts(V, 0.0);
  std::size_t total_tokens = 0;
  for (const auto& seq : substituted) {
    std::vector<std::size_t> ids;
    ids.reserve(seq.tokens.size());
    for (const auto& t : seq.tokens) {
      const std::size_t idx = vocab.index_of(t);
      ids.push_back(idx);
      counts[idx] += 1.0;
    }
    total_tokens += ids.size();
    sentences.push_back(std::move(ids));
  }

  EmbeddingTable table;
  table.vocabulary = vocab;
  table.dim = D;
  table.max_len = config.max_len;
  table.vectors.resize(V * D);
  for (auto& w : table.vectors) w = (rng.uniform() - 0.5) / static_cast<double>(D);
  std::vector<double> context(V * D, 0.0);

  // Negative-sampling distribution: unigram counts raised to 3/4.
  std::vector<std::size_t> unigram;
  double norm = 0.0;
  for (double c : counts) norm += std::pow(c, 0.75);
  if (norm > 0.0) {
    unigram.reserve(kUnigramTableSize);
    double cumulative = 0.0;
    std::size_t word = 0;
    for (std::size_t i = 0; i < kUnigramTableSize; ++i) {
      while (word < V && static_cast<double>(i) / kUnigramTableSize >= cumulative + std::pow(counts[word], 0.75) / norm) {
        cumulative += std::pow(counts[word], 0.75) / norm;
        ++word;
      }
      unigram.push_back(std::min(word, V - 1));
    }
  }

  const double total_work = static_cast<double>(config.epochs * total_tokens) + 1.0;
  double processed = 0.0;
  std::vector<double> grad(D);
  for (std::size_t epoch = 0; epoch < config.epochs && !unigram.empty(); ++epoch) {
    for (const auto& sentence : sentences) {
      for (std::size_t pos = 0; pos < sentence.size(); ++pos) {
        const double lr = std::max(config.learning_rate * 1e-4, config.learning_rate * (1.0 - processed / total_work));
        processed += 1.0;
        const std::size_t center = sentence[pos];
        const std::size_t shrink = rng.index(config.window);
        const std::size_t reach = config.window - shrink;
        const std::size_t lo = pos >= reach ? pos - reach : 0;
        const std::size_t hi = std::min(sentence.size() - 1, pos + reach);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          double* in = table.vectors.data() + sentence[c] * D;
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t k = 0; k <= config.negatives; ++k) {
            std::size_t target = center;
            double label = 1.0;
            if (k > 0) {
              target = unigram[rng.index(unigram.size())];
              if (target == center) continue;
              label = 0.0;
            }
            double* out = context.data() + target * D;
            double dot = 0.0;
            for (std::size_t d = 0; d < D; ++d) dot += in[d] * out[d];
            const double g = (label - sigmoid(dot)) * lr;
            for (std::size_t d = 0; d < D; ++d) {
              grad[d] += g * out[d];
              out[d] += g * in[d];
            }
          }
          for (std::size_t d = 0; d < D; ++d) in[d] += grad[d];
        }
      }
    }
  }
  for (auto& w : table.vectors) w = round_f32(w);
  return table;
}

}  // namespace xsslab::vocab
