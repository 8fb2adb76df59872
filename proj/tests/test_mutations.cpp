#include <doctest.h>

#include <algorithm>

#include "require.hpp"
#include "xsslab/mutations.hpp"
#include "xsslab/oracle.hpp"

using namespace xsslab;
using mutations::apply_action;

namespace {
std::vector<std::string> suite() { return checks::read_lines(checks::fixture_dir() / "mutation_suite.txt"); }
}  // namespace

TEST_CASE("registry") {
  const auto reg = mutations::registry();
  REQUIRE(reg.size() == 27);
  for (int i = 0; i < 27; ++i) {
    CHECK(reg[i].id == i + 1);
    CHECK(reg[i].name == "A" + std::to_string(i + 1));
  }
  CHECK(mutations::parse_action_id("A21") == 21);
  CHECK(mutations::parse_action_id("21") == 21);
  CHECK_THROWS_AS(apply_action("x", 0), ConfigError);
  CHECK_THROWS_AS(apply_action("x", 28), ConfigError);
  CHECK(mutations::registry_json().size() == 27);
}

TEST_CASE("table examples") {
  CHECK(apply_action("<a href=http://x>", 10).payload == "<a href=//x>");
  CHECK(apply_action("alert(1)", 21).payload == "top['al' + 'ert'](1)");
  const auto none = apply_action("no keywords here", 1);
  CHECK(none.payload == "no keywords here");
  CHECK_FALSE(none.changed);
  CHECK(apply_action("<script>", 4).payload == "<ScRiPt>");
  CHECK(apply_action("<img src=x>", 3).payload == "<img/src=x>");
  CHECK(apply_action("javascript:x", 1).payload == "&#14javascript:x");
  CHECK(apply_action("<script>", 14).payload == "<script/drfv/>");
  CHECK(apply_action("alert(1)", 15).payload == "alert`1`");
  CHECK(apply_action("x", 23).payload == "?lang=en&q=x");
  CHECK(apply_action("javascript:1", 25).payload == "vbscript:1");
}

TEST_CASE("applicable actions") {
  const auto ids = mutations::applicable_actions("javascript:alert(1)");
  for (int id : {1, 6, 7, 12, 13, 19, 21, 25}) CHECK(std::find(ids.begin(), ids.end(), id) != ids.end());
  CHECK(mutations::applicable_actions("") == std::vector<int>{23});
}

TEST_CASE("determinism and applicability on suite and corpus") {
  auto payloads = suite();
  const auto sample = checks::corpus_sample(300);
  payloads.insert(payloads.end(), sample.begin(), sample.end());
  require(checks::mutation_determinism(payloads));
}

TEST_CASE("oracle preservation per action on the curated suite") {
  const auto r = checks::mutation_preservation(suite(), 0.90);
  for (const auto& f : r.failures) MESSAGE(f);
  require(r);
}

TEST_CASE("substitution actions are idempotent") {
  auto payloads = suite();
  const auto sample = checks::corpus_sample(300);
  payloads.insert(payloads.end(), sample.begin(), sample.end());
  require(checks::mutation_idempotence(payloads));
}

TEST_CASE("insertion actions grow monotonically, everything else is bounded") {
  for (const auto& p : suite()) {
    for (int id : {23, 24}) {
      std::string cur = p;
      for (int k = 0; k < 5; ++k) {
        const auto next = apply_action(cur, id).payload;
        if (id == 24 && next == cur) break;  // no start tag to comment
        CHECK(next.size() > cur.size());
        cur = next;
      }
    }
    // Twenty applications of any single action stay within a linear bound.
    for (int id = 1; id <= 27; ++id) {
      std::string cur = p;
      for (int k = 0; k < 20; ++k) cur = apply_action(cur, id).payload;
      CHECK_MESSAGE(cur.size() <= 40 * p.size() + 400, "A" << id << " on " << p);
    }
  }
}
