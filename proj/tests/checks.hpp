#pragma once

// Property checks shared by the unit suites and the acceptance binary.

#include <filesystem>
#include <string>
#include <vector>

#include "xsslab/detectors.hpp"

namespace xsslab::checks {

struct Result {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;  // capped catalogue

  void fail(std::string what);
};

std::filesystem::path fixture_dir();
std::vector<std::string> read_lines(const std::filesystem::path& path);
// First `n` unique payloads of the synthetic corpus, both classes interleaved.
std::vector<std::string> corpus_sample(std::size_t n);

// Every rule's positive and negative fixtures, through match_rule_at and std::regex.
Result tokenizer_rule_fixtures();
// match_rule_at against a std::regex cascade on random strings, at every offset.
Result tokenizer_differential(std::size_t strings, std::uint64_t seed);
// Tokens equal their normalized slices, spans strictly increasing, each token a full rule match.
Result span_round_trip(const std::vector<std::string>& payloads);

Result mutation_determinism(const std::vector<std::string>& payloads);
// Per action, over curated payloads where it applies: share still Malicious.
Result mutation_preservation(const std::vector<std::string>& suite, double min_rate);
Result mutation_idempotence(const std::vector<std::string>& payloads);

// Zhang-Shasha against an exhaustive search over Tai mappings.
Result ted_brute_force();
Result ted_metric_axioms();
Result oracle_fixture(const std::filesystem::path& path);

// Central differences, h = 1e-5, norm-wise relative error.
Result detector_gradient(detectors::Architecture arch, double tolerance);
Result surrogate_gradient(std::size_t action_count, double tolerance);
Result policy_network_gradient(double tolerance);

// Stub detector flagging "http://"; A10 escapes. Greedy ER must reach 1.
// With check_trend, the training mean reward must not drop over the last 5 rollouts.
Result ppo_stub_task(std::size_t budget, bool check_trend);

}  // namespace xsslab::checks
