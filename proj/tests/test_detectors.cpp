#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "require.hpp"
#include "xsslab/detectors.hpp"
#include "xsslab/rng.hpp"

using namespace xsslab;
using detectors::Architecture;
using detectors::DetectorModel;

namespace {
const Architecture kAll[] = {Architecture::MLP, Architecture::CNN, Architecture::LSTM};

// Two Gaussian blobs in the embedding space, variable lengths.
detectors::LabeledSet toy_set(std::size_t n, std::size_t max_len, std::size_t dim, std::uint64_t seed) {
  detectors::LabeledSet set;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double label = static_cast<double>(i % 2);
    detectors::CompactSample s;
    s.len = 1 + rng.index(max_len);
    for (std::size_t k = 0; k < s.len * dim; ++k) s.rows.push_back((label > 0 ? 1.0 : -1.0) + 0.3 * rng.normal());
    set.samples.push_back(std::move(s));
    set.labels.push_back(label);
  }
  return set;
}
}  // namespace

TEST_CASE("names") {
  for (auto a : kAll) CHECK(detectors::architecture_from_string(detectors::to_string(a)) == a);
  CHECK(detectors::architecture_from_string("LSTM") == Architecture::LSTM);
  CHECK_THROWS(detectors::architecture_from_string("rnn"));
}

TEST_CASE("zero parameters score one half") {
  for (auto a : kAll) {
    DetectorModel m(a, 4, 3, 1);
    m.parameters().setZero();
    vocab::EmbeddedSample s;
    s.rows = 4;
    s.cols = 3;
    s.matrix.assign(12, 0.0);
    CHECK(m.score(s) == 0.5);
  }
}

TEST_CASE("shape errors") {
  DetectorModel m(Architecture::MLP, 4, 3, 1);
  vocab::EmbeddedSample s;
  s.rows = 5;
  s.cols = 3;
  s.matrix.assign(15, 0.0);
  CHECK_THROWS_AS(m.score(s), ShapeError);
}

TEST_CASE("gradient checks") {
  require(checks::detector_gradient(Architecture::MLP, 1e-4));
  require(checks::detector_gradient(Architecture::CNN, 1e-4));
  require(checks::detector_gradient(Architecture::LSTM, 1e-4));
}

TEST_CASE("scores ignore padding content and are deterministic") {
  Rng rng(4);
  for (auto a : kAll) {
    DetectorModel m(a, 6, 3, 2);
    vocab::EmbeddedSample s;
    s.rows = 6;
    s.cols = 3;
    s.true_len = 3;
    s.matrix.assign(18, 0.0);
    for (std::size_t i = 0; i < 9; ++i) s.matrix[i] = rng.normal();
    const double base = m.score(s);
    CHECK(m.score(s) == base);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    const detectors::Input compact{s.matrix.data(), 3};
    CHECK(m.score(compact) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("toy separable set is learned, early stopping contract holds") {
  const auto train = toy_set(320, 4, 3, 1);
  const auto val = toy_set(64, 4, 3, 2);
  vocab::EmbeddingTable table;
  table.dim = 3;
  table.max_len = 4;
  for (auto a : kAll) {
    const auto m = detectors::train(a, train, val, table, {}, 5);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < train.size(); ++i) correct += m.predicts_malicious(train.samples[i].view()) == (train.labels[i] > 0.5);
    CHECK_MESSAGE(correct == train.size(), detectors::to_string(a));
    const auto& meta = m.meta;
    CHECK(meta.epochs_run <= 150);
    CHECK(meta.val_losses.size() == meta.epochs_run);
    CHECK(meta.best_val_loss == *std::min_element(meta.val_losses.begin(), meta.val_losses.end()));
    if (meta.epochs_run < 150) CHECK(meta.epochs_run == meta.best_epoch + 10);
    const auto again = detectors::train(a, train, val, table, {}, 5);
    CHECK(again.parameters() == m.parameters());
  }
}

TEST_CASE("patience exhaustion stops early") {
  // Labels carry no signal, so validation loss stalls.
  auto train = toy_set(40, 3, 2, 1);
  for (std::size_t i = 0; i < train.size(); ++i) train.labels[i] = static_cast<double>((i / 2) % 2);
  auto val = toy_set(40, 3, 2, 7);
  for (std::size_t i = 0; i < val.size(); ++i) val.labels[i] = static_cast<double>((i / 2) % 2);
  vocab::EmbeddingTable table;
  table.dim = 2;
  table.max_len = 3;
  detectors::TrainConfig cfg;
  cfg.learning_rate = 0.5;
  const auto m = detectors::train(Architecture::MLP, train, val, table, cfg, 1);
  CHECK(m.meta.epochs_run < 150);
  CHECK(m.meta.epochs_run == m.meta.best_epoch + cfg.patience);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const auto train = toy_set(320, 4, 3, 1);
  vocab::EmbeddingTable table;
  table.dim = 3;
  table.max_len = 4;
  detectors::TrainConfig cfg;
  cfg.learning_rate = 1e300;
  CHECK_THROWS_WITH_AS(detectors::train(Architecture::MLP, train, train, table, cfg, 1), doctest::Contains("lr"),
                       NumericError);
}

TEST_CASE("metrics") {
  const auto perfect = detectors::EvalReport::from_counts(1, 0, 1, 0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);
  const auto half = detectors::EvalReport::from_counts(1, 1, 1, 1);
  CHECK(half.precision == 0.5);
  CHECK(half.recall == 0.5);
  CHECK(half.accuracy == 0.5);
  CHECK(half.f1 == 0.5);
  const auto r = detectors::EvalReport::from_counts(90, 5, 80, 10);
  CHECK(r.f1 == doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall)));
  DetectorModel m(Architecture::MLP, 4, 3, 1);
  CHECK_THROWS(detectors::evaluate(m, {}));
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "xsslab_model_test";
  for (auto a : kAll) {
    DetectorModel m(a, 5, 3, 8);
    m.meta.epochs_run = 12;
    m.meta.val_losses = {0.5, 0.25};
    const auto path = dir / (std::string(detectors::to_string(a)) + ".json");
    detectors::save_model(path, m);
    const auto back = detectors::load_model(path);
    CHECK(back.architecture() == a);
    CHECK(back.parameters() == m.parameters());
    CHECK(back.meta.epochs_run == 12);
    CHECK(back.meta.val_losses == m.meta.val_losses);
    const auto j = read_json(path);
    CHECK(j.at("blob_sha256").get<std::string>() == sha256_file(path.parent_path() / j.at("blob").get<std::string>()));
  }
  std::filesystem::remove_all(dir);
}
