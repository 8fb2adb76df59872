#include <doctest.h>

#include <filesystem>
#include <set>

#include "checks.hpp"
#include "xsslab/corpus.hpp"
#include "xsslab/oracle.hpp"

using namespace xsslab;
using corpus::Label;
using corpus::Payload;

namespace {

std::vector<Payload> make(std::size_t benign, std::size_t malicious) {
  std::vector<Payload> out;
  for (std::size_t i = 0; i < benign; ++i) out.push_back({"b" + std::to_string(i), Label::Benign, static_cast<std::int64_t>(out.size())});
  for (std::size_t i = 0; i < malicious; ++i) {
    out.push_back({"<b>" + std::to_string(i), Label::Malicious, static_cast<std::int64_t>(out.size())});
  }
  return out;
}

std::size_t count(const std::vector<Payload>& v, Label l) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](const Payload& p) { return p.label == l; }));
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto rows = corpus::parse_csv("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\n\"multi\nline\",2\r\n", ',');
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == std::vector<std::string>{"x,1", "he said \"hi\""});
  CHECK(rows[2] == std::vector<std::string>{"multi\nline", "2"});
  CHECK(corpus::csv_escape("a\"b") == "\"a\"\"b\"");
  CHECK(corpus::parse_csv(corpus::csv_escape("x,\"y\"\n"), ',')[0][0] == "x,\"y\"\n");
}

TEST_CASE("ingest examples") {
  const auto r = corpus::ingest_text("Payloads,Class\nhello,0\n<script>alert(1)</script>,1\nhello,1\n,0\n", {});
  REQUIRE(r.payloads.size() == 2);
  CHECK(r.payloads[0].text == "hello");
  CHECK(r.payloads[0].label == Label::Benign);
  CHECK(r.payloads[1].label == Label::Malicious);
  CHECK(r.duplicates == 1);
  CHECK(r.empty_texts == 1);
  CHECK(r.rows == 4);

  const auto empty = corpus::ingest_text("", {});
  CHECK(empty.payloads.empty());
  CHECK_FALSE(empty.warnings.empty());

  CHECK_THROWS_WITH_AS(corpus::ingest_text("Text,Class\nx,0\n", {}), doctest::Contains("Payloads"), IngestError);
  CHECK_THROWS_WITH_AS(corpus::ingest_text("Payloads,Class\nx,maybe\n", {}), doctest::Contains("row 1"), IngestError);
  CHECK_THROWS_AS(corpus::ingest("/nonexistent/file.csv", {}), IngestError);
}

TEST_CASE("custom format") {
  corpus::CsvFormat f;
  f.payload_column = "text";
  f.label_column = "y";
  f.label_map = {{"xss", Label::Malicious}, {"ok", Label::Benign}};
  f.delimiter = ';';
  const auto r = corpus::ingest_text("y;text\nxss;<b>\nok;hi\n", f);
  REQUIRE(r.payloads.size() == 2);
  CHECK(r.payloads[0].label == Label::Malicious);
  CHECK(corpus::CsvFormat::from_json(f.to_json()).to_json() == f.to_json());
}

TEST_CASE("prefilter") {
  std::vector<Payload> ps = {{"plain text", Label::Benign, 0},
                             {"plain text 2", Label::Malicious, 1},
                             {"<script>alert(1)</script>", Label::Malicious, 2},
                             {"<b>x</b>", Label::Benign, 3},
                             {"boom", Label::Benign, 4}};
  const auto r = corpus::prefilter_with_oracle(ps, [](std::string_view t) {
    if (t == "boom") throw std::runtime_error("render failure");
    return oracle::classify(t).label;
  });
  REQUIRE(r.retained.size() == 2);
  CHECK(r.retained[0].id == 0);
  CHECK(r.retained[1].id == 2);
  CHECK(r.removed_malicious == 1);
  CHECK(r.removed_benign == 1);
  CHECK(r.render_failures == 1);
}

TEST_CASE("balance and split arithmetic") {
  const auto s = corpus::balance_and_split(make(10, 4), 1, {0.5, 0.25, 0.25});
  CHECK(s.detector_train.size() + s.detector_val.size() + s.detector_test.size() == 8);
  CHECK(s.detector_train.size() == 4);
  CHECK(s.detector_val.size() == 2);
  CHECK(s.detector_test.size() == 2);
  CHECK_THROWS_AS(corpus::balance_and_split(make(10, 4), 1, {0.5, 0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(corpus::balance_and_split(make(10, 0), 1, {}), ConfigError);
}

TEST_CASE("split invariants") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = corpus::balance_and_split(make(1000, 537), seed, {});
    std::set<std::int64_t> det_ids, agent_ids;
    for (const auto* split : {&s.detector_train, &s.detector_val, &s.detector_test}) {
      CHECK(std::abs(static_cast<long>(count(*split, Label::Benign)) - static_cast<long>(count(*split, Label::Malicious))) <= 1);
      for (const auto& p : *split) CHECK(det_ids.insert(p.id).second);
    }
    for (const auto* split : {&s.agent_train, &s.agent_val, &s.agent_test}) {
      CHECK(count(*split, Label::Benign) == 0);
      for (const auto& p : *split) CHECK(agent_ids.insert(p.id).second);
    }
    // Agent splits are the Malicious members of the matching detector split.
    auto malicious_ids = [](const std::vector<Payload>& v) {
      std::set<std::int64_t> ids;
      for (const auto& p : v) if (p.label == Label::Malicious) ids.insert(p.id);
      return ids;
    };
    auto ids = [](const std::vector<Payload>& v) {
      std::set<std::int64_t> out;
      for (const auto& p : v) out.insert(p.id);
      return out;
    };
    CHECK(malicious_ids(s.detector_train) == ids(s.agent_train));
    CHECK(malicious_ids(s.detector_val) == ids(s.agent_val));
    CHECK(malicious_ids(s.detector_test) == ids(s.agent_test));
  }
}

TEST_CASE("split determinism and persistence") {
  const auto a = corpus::balance_and_split(make(50, 30), 9, {});
  const auto b = corpus::balance_and_split(make(50, 30), 9, {});
  const auto dir = std::filesystem::temp_directory_path() / "xsslab_split_test";
  std::filesystem::remove_all(dir);
  corpus::save_split(dir, a);
  const auto c = corpus::load_split(dir);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(*a.named()[i].second == *b.named()[i].second);
    CHECK(*a.named()[i].second == *c.named()[i].second);
  }
  const auto first = read_file(dir / "detector_train.jsonl");
  corpus::save_split(dir, b);
  CHECK(read_file(dir / "detector_train.jsonl") == first);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic corpus reproduces the published split sizes") {
  const auto csv = corpus::synthesize_csv({});
  CHECK(sha256_hex(csv) == sha256_hex(corpus::synthesize_csv({})));
  const auto ingested = corpus::ingest_text(csv, {});
  const auto filtered = corpus::prefilter_with_oracle(ingested.payloads);
  const auto s = corpus::balance_and_split(filtered.retained, 1, {});
  CHECK(count(s.detector_train, Label::Malicious) == 2883);
  CHECK(count(s.detector_train, Label::Benign) == 2883);
  CHECK(s.agent_val.size() == 721);
  CHECK(s.agent_test.size() == 901);
  // Oracle consistency after prefiltering.
  CHECK(oracle::ruin_rate(corpus::texts(s.agent_test)) == 0.0);
  CHECK(oracle::ruin_rate(corpus::texts(s.agent_train)) == 0.0);
}
