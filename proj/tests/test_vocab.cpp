#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <filesystem>

#include "checks.hpp"
#include "xsslab/corpus.hpp"
#include "xsslab/rng.hpp"
#include "xsslab/vocab.hpp"

using namespace xsslab;
using vocab::TokenSequence;

namespace {

TokenSequence seq(std::vector<std::string> tokens) {
  TokenSequence s;
  for (const auto& t : tokens) {
    s.spans.push_back({s.normalized_text.size(), s.normalized_text.size() + t.size()});
    s.normalized_text += t;
  }
  s.tokens = std::move(tokens);
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_CASE("vocabulary examples") {
  std::vector<TokenSequence> c = {seq({"a", "a", "a", "a", "a", "b", "b", "b", "c", "d", "e", "f", "g", "h", "i", "j"})};
  CHECK(vocab::build_vocabulary(c, 0.10).tokens() == std::vector<std::string>{"None", "a"});
  std::vector<TokenSequence> tie = {seq({"b", "a", "b", "a", "c"})};
  CHECK(vocab::build_vocabulary(tie, 0.34).tokens() == std::vector<std::string>{"None", "a", "b"});
  CHECK(vocab::build_vocabulary(tie, 0.2).tokens() == std::vector<std::string>{"None", "a"});
  CHECK(vocab::build_vocabulary(c, 1.0).size() == 11);
  CHECK_THROWS(vocab::build_vocabulary(std::vector<TokenSequence>{}, 0.1));
}

TEST_CASE("vocabulary size is ceil(0.1 * distinct) + 1 on the corpus") {
  std::vector<TokenSequence> c;
  std::set<std::string> distinct;
  for (const auto& p : checks::corpus_sample(2000)) {
    c.push_back(preprocess::preprocess(p));
    distinct.insert(c.back().tokens.begin(), c.back().tokens.end());
  }
  const auto v = vocab::build_vocabulary(c);
  CHECK(v.size() == static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(distinct.size()))) + 1);
  CHECK(v.tokens()[0] == "None");
  CHECK(v.index_of("None") == 0);
  CHECK(v.index_of("never-seen-token") == 0);
}

TEST_CASE("vocabulary constructor contract") {
  CHECK_THROWS(vocab::Vocabulary({"a", "None"}));
  CHECK_THROWS(vocab::Vocabulary({"None", "a", "a"}));
}

TEST_CASE("vocabulary guard against non-training splits") {
  std::vector<corpus::Payload> ps;
  for (int i = 0; i < 40; ++i) ps.push_back({"<b>x" + std::to_string(i), oracle::Label::Malicious, i});
  for (int i = 0; i < 40; ++i) ps.push_back({"plain " + std::to_string(i), oracle::Label::Benign, 100 + i});
  const auto split = corpus::balance_and_split(ps, 1, {});
  CHECK_NOTHROW(vocab::build_vocabulary_for_split(split, split.detector_train));
  auto leaked = split.detector_train;
  leaked.insert(leaked.end(), split.agent_test.begin(), split.agent_test.end());
  CHECK_THROWS_AS(vocab::build_vocabulary_for_split(split, leaked), ConfigError);
  auto doubled = split.detector_train;
  doubled.push_back(doubled.front());
  CHECK_THROWS_AS(vocab::build_vocabulary_for_split(split, doubled), ConfigError);
}

TEST_CASE("substitute_oov") {
  const vocab::Vocabulary v({"None", "alert("});
  const auto out = vocab::substitute_oov(seq({"alert(", "zzz9("}), v);
  CHECK(out.tokens == std::vector<std::string>{"alert(", "None"});
  CHECK(out.spans == seq({"alert(", "zzz9("}).spans);
  CHECK(vocab::substitute_oov(seq({"alert("}), v).tokens == std::vector<std::string>{"alert("});
  CHECK(vocab::substitute_oov(seq({}), v).tokens.empty());
}

TEST_CASE("oov rate") {
  CHECK(vocab::oov_rate(seq({"None", "a"})) == 0.5);
  CHECK(vocab::oov_rate(seq({"a", "b"})) == 0.0);
  CHECK(vocab::oov_rate(seq({})) == 0.0);
  std::vector<std::string> long_seq(200, "a");
  long_seq.resize(300, "None");
  CHECK(vocab::oov_rate(seq(long_seq)) == 0.0);
}

TEST_CASE("embedding training and lookup") {
  // Two groups of tokens that only ever co-occur within their group.
  std::vector<TokenSequence> corpus;
  Rng rng(3);
  for (int i = 0; i < 400; ++i) {
    std::vector<std::string> t;
    const bool left = i % 2 == 0;
    for (int k = 0; k < 12; ++k) t.push_back(std::string(left ? "l" : "r") + std::to_string(rng.index(4)));
    t.push_back(left ? "p" : "x");
    t.push_back(left ? "q" : "y");
    corpus.push_back(seq(t));
  }
  const auto v = vocab::build_vocabulary(corpus, 1.0);
  vocab::EmbeddingConfig cfg;
  const auto table = vocab::train_embeddings(corpus, v, cfg, 1);
  CHECK(table.dim == 32);
  CHECK(table.vectors.size() == v.size() * 32);
  for (double x : table.vectors) CHECK(std::isfinite(x));
  const double together = cosine(table.vector(v.index_of("p")), table.vector(v.index_of("q")));
  double mean = 0;
  int pairs = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j, ++pairs) mean += cosine(table.vector(i), table.vector(j));
  }
  mean /= pairs;
  CHECK(together > mean);
  CHECK(table.vectors == vocab::train_embeddings(corpus, v, cfg, 1).vectors);

  // 250 tokens: truncated to 200, no padding.
  std::vector<std::string> many;
  for (int i = 0; i < 250; ++i) many.push_back(i % 3 ? "p" : "unknown");
  const auto e = vocab::embed(seq(many), table);
  CHECK(e.rows == 200);
  CHECK(e.cols == 32);
  CHECK(e.true_len == 200);
  for (std::size_t i = 0; i < e.true_len; ++i) {
    const auto want = table.vector(v.index_of(many[i]));
    CHECK(std::equal(want.begin(), want.end(), e.row(i)));
  }
  const auto empty = vocab::embed(seq({}), table);
  CHECK(empty.true_len == 0);
  CHECK(std::all_of(empty.matrix.begin(), empty.matrix.end(), [](double x) { return x == 0.0; }));
  const auto three = vocab::embed(seq({"p", "zz", "q"}), table);
  CHECK(three.oov_positions == std::vector<std::size_t>{1});
  for (std::size_t i = 3 * 32; i < three.matrix.size(); ++i) REQUIRE(three.matrix[i] == 0.0);

  const auto path = std::filesystem::temp_directory_path() / "xsslab_table_test" / "emb.json";
  vocab::save_table(path, table);
  const auto back = vocab::load_table(path);
  CHECK(back.vocabulary.tokens() == table.vocabulary.tokens());
  CHECK(back.vectors == table.vectors);
  std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("embedding presets") {
  CHECK(vocab::EmbeddingConfig::preset("default").dim == 32);
  CHECK(vocab::EmbeddingConfig::preset("replication").dim == 8);
  const auto c = vocab::EmbeddingConfig::preset("replication");
  CHECK(vocab::EmbeddingConfig::from_json(c.to_json()).to_json() == c.to_json());
}
