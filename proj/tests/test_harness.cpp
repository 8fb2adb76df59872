#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "checks.hpp"
#include "xsslab/harness.hpp"

using namespace xsslab;
using harness::ExperimentConfig;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.dataset.synth.benign = 400;
  c.dataset.synth.malicious = 300;
  c.embedding.dim = 8;
  c.embedding.epochs = 2;
  c.detector.epochs = 4;
  c.detectors = {detectors::Architecture::MLP, detectors::Architecture::CNN};
  c.seeds = {1, 2};
  c.ppo.rollout_steps = 256;
  c.budget = 1024;
  c.validate_every = 2;
  c.workers = 2;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("xsslab_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

// Report numbers without anything that may legitimately differ between runs.
json numbers(json report) {
  for (auto& [arch, block] : report.at("detectors").items()) {
    for (auto& cell : block.at("cells")) cell.erase("error");
  }
  return report;
}

}  // namespace

TEST_CASE("summarize uses the sample standard deviation") {
  const auto s = harness::summarize({1, 2, 3, 4});
  CHECK(s.mean == 2.5);
  CHECK(s.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(harness::summarize({0.7}).stddev == 0.0);
  CHECK_FALSE(harness::summarize({}).available());
}

TEST_CASE("config json, hash and validation") {
  auto c = tiny();
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
  auto w = c;
  w.workers = 7;
  CHECK(w.hash() == c.hash());
  auto s = c;
  s.seeds = {1, 3};
  CHECK(s.hash() != c.hash());
  CHECK(ExperimentConfig::from_json({{"profile", "fast"}}).seeds.size() == 3);
  CHECK(ExperimentConfig::fast().budget == 100'000);
  CHECK(ExperimentConfig{}.seeds.size() == 10);

  auto dup = c;
  dup.seeds = {1, 1};
  CHECK_THROWS_AS(dup.validate(), ConfigError);
  auto missing = c;
  missing.dataset.path = "/nonexistent.csv";
  CHECK_THROWS_AS(missing.validate(), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent.json"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"fractions", {0.5, 0.5}}}), ConfigError);
}

TEST_CASE("cell result json round trip") {
  harness::CellResult c;
  c.arch = detectors::Architecture::LSTM;
  c.seed = 4;
  c.mode = rl::Mode::Oracle;
  c.ok = true;
  c.total = 10;
  c.escaped = 3;
  c.er = 0.3;
  c.dr = 0.7;
  c.rr_e = 0.1;
  c.outcomes = {{"Escaped", 3}, {"Exhausted", 7}};
  const auto back = harness::CellResult::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_FALSE(back.rr_v.has_value());
}

TEST_CASE("end to end on a tiny corpus: arithmetic, provenance, determinism, isolation") {
  const auto root_a = scratch("a"), root_b = scratch("b");
  harness::Workspace a(tiny(), root_a);
  const auto rq1 = harness::run_rq1(a);
  const auto rq2 = harness::run_rq2(a);
  const auto rq3 = harness::run_rq3(a);
  const auto rq4 = harness::run_rq4(a);

  const auto& summary = a.artifacts().data_summary;
  CHECK(summary.at("baseline_ruin_rate").get<double>() == 0.0);
  CHECK(summary.at("vocabulary_size").get<std::size_t>() ==
        static_cast<std::size_t>(std::ceil(0.1 * summary.at("distinct_train_tokens").get<double>())) + 1);

  for (const auto* report : {&rq1, &rq2, &rq3, &rq4}) {
    CHECK(report->at("manifest").at("config_sha256") == a.config().hash());
    CHECK(report->at("manifest").at("dataset_sha256").get<std::string>().size() == 64);
    CHECK(report->at("manifest").at("template_sha256") == oracle::template_sha256());
    CHECK(report->at("failed_cells") == 0);
    CHECK(fs::exists(root_a / "reports" / (report->at("name").get<std::string>() + ".txt")));
  }
  for (const auto& [arch, block] : rq1.at("detectors").items()) {
    double sum = 0;
    for (const auto& cell : block.at("cells")) {
      CHECK(cell.at("er").get<double>() + cell.at("dr").get<double>() == 1.0);
      CHECK(cell.at("er").get<double>() >= 0.0);
      CHECK(cell.at("er").get<double>() <= 1.0);
      sum += cell.at("er").get<double>();
    }
    CHECK(block.at("summary").at("er").at("mean").get<double>() == doctest::Approx(sum / 2).epsilon(1e-15));
  }
  // Plain cells never end Ruined; persisted artifacts exist.
  for (const auto& cell : harness::load_cells(a, rl::Mode::Plain)) {
    CHECK(cell.ok);
    CHECK_FALSE(cell.outcomes.contains("Ruined"));
    const auto dir = a.cell_dir(rl::Mode::Plain, cell.arch, cell.seed);
    for (const char* f : {"policy.json", "curve.csv", "episodes.jsonl", "escaped.jsonl", "cell.json"}) {
      CHECK(fs::exists(dir / f));
    }
    CHECK((cell.escaped == 0) == !cell.rr_e.has_value());
  }
  CHECK(harness::render_table(rq1).find("MLP") != std::string::npos);

  // Same config in a fresh directory: identical numbers.
  harness::Workspace b(tiny(), root_b);
  CHECK(numbers(harness::run_rq1(b)) == numbers(rq1));
  CHECK(numbers(harness::run_rq3(b)) == numbers(rq3));
  CHECK(read_file(root_a / "reports" / "rq1.txt") == read_file(root_b / "reports" / "rq1.txt"));

  // A corrupted cell fails alone.
  const auto broken = b.cell_dir(rl::Mode::Plain, detectors::Architecture::CNN, 2);
  write_file(broken / "policy.json", "{not json");
  fs::remove(broken / "cell.stamp");
  const auto cells = harness::run_cells(b, rl::Mode::Plain);
  std::size_t failed = 0;
  for (const auto& c : cells) {
    if (!c.ok) {
      ++failed;
      CHECK(c.arch == detectors::Architecture::CNN);
      CHECK(c.seed == 2);
      CHECK_FALSE(c.error.empty());
    }
  }
  CHECK(failed == 1);
  const auto partial = harness::make_report(b, "rq1", cells, {"er", "dr"});
  CHECK(partial.at("failed_cells") == 1);
  CHECK(partial.at("detectors").at("mlp") == rq1.at("detectors").at("mlp"));
  CHECK(partial.at("detectors").at("cnn").at("summary").at("er").at("n") == 1);

  fs::remove_all(root_a);
  fs::remove_all(root_b);
}

TEST_CASE("missing cells are reported, not invented") {
  const auto root = scratch("missing");
  auto cfg = tiny();
  cfg.detectors = {detectors::Architecture::MLP};
  harness::Workspace ws(cfg, root);
  for (const auto& c : harness::load_cells(ws, rl::Mode::Plain)) {
    CHECK_FALSE(c.ok);
    CHECK(c.error.find("rq1") != std::string::npos);
  }
  CHECK_THROWS_AS(harness::attack_cell(ws, rl::Mode::Plain, detectors::Architecture::MLP, 1), ConfigError);
  fs::remove_all(root);
}
