#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "require.hpp"
#include "xsslab/oracle.hpp"
#include "xsslab/rl.hpp"

using namespace xsslab;
using rl::Environment;
using rl::Outcome;

namespace {

// Flags anything still containing "<script"; ruin whenever the payload lost its "<".
rl::Target script_target() {
  rl::Target t;
  t.score = [](std::string_view p) { return p.find("<script") != std::string_view::npos ? 0.9 : 0.1; };
  t.ruined = [](std::string_view p) { return p.find('<') == std::string_view::npos; };
  return t;
}

std::vector<std::string> starts() { return {"<script>alert(1)</script>", "<script src=http://e/x.js></script>"}; }

}  // namespace

TEST_CASE("clipped objective") {
  CHECK(rl::clipped_objective(1.0, 1.0, 0.2) == -1.0);
  CHECK(rl::clipped_objective(2.0, 1.0, 0.2) == doctest::Approx(-1.2));
  CHECK(rl::clipped_objective(0.5, -1.0, 0.2) == doctest::Approx(0.8));
  CHECK(rl::clipped_objective(0.5, 1.0, 0.2) == doctest::Approx(-0.5));
}

TEST_CASE("surrogate gradient") {
  require(checks::surrogate_gradient(3, 1e-4));
  require(checks::surrogate_gradient(27, 1e-4));
}

TEST_CASE("policy network gradient") { require(checks::policy_network_gradient(1e-4)); }

TEST_CASE("gae matches a hand computation") {
  rl::RolloutBuffer b;
  b.rewards = {-1, 10, -1};
  b.values = {0.5, 0.2, 0.1};
  b.dones = {false, true, false};
  b.actions = {0, 0, 0};
  b.last_value = 0.3;
  const double g = 0.9, l = 0.8;
  const auto [adv, ret] = rl::compute_gae(b, g, l);
  const double d2 = -1 + g * 0.3 - 0.1;
  const double d1 = 10 - 0.2;
  const double d0 = -1 + g * 0.2 - 0.5;
  CHECK(adv[2] == doctest::Approx(d2));
  CHECK(adv[1] == doctest::Approx(d1));
  CHECK(adv[0] == doctest::Approx(d0 + g * l * d1));
  for (int i = 0; i < 3; ++i) CHECK(ret[i] == doctest::Approx(adv[i] + b.values[i]));
}

TEST_CASE("environment reset and observation") {
  Environment env(starts(), script_target(), {});
  Rng a(1), b(1);
  const auto obs = env.reset(a);
  CHECK(obs.size() == 28);
  CHECK(std::all_of(obs.begin(), obs.end(), [](double x) { return x == 0.0; }));
  Environment env2(starts(), script_target(), {});
  env2.reset(b);
  for (int i = 0; i < 10; ++i) {
    env.reset(a);
    env2.reset(b);
    CHECK(env.current_payload() == env2.current_payload());
  }
  CHECK_THROWS(Environment({}, script_target(), {}).reset(a));
}

TEST_CASE("rewards and outcomes, plain mode") {
  Environment env(starts(), script_target(), {});
  env.reset_to("<script>alert(1)</script>");
  auto r = env.step(0);  // A1: nothing to change, still detected
  CHECK(r.reward == rl::kDetectedReward);
  CHECK_FALSE(r.done);
  CHECK(r.observation[0] == doctest::Approx(1.0 / 20));
  CHECK(r.observation[27] == doctest::Approx(1.0 / 20));
  r = env.step(3);  // A4 mixes the tag case: "<ScRiPt" escapes the stub
  CHECK(r.reward == rl::kEscapeReward);
  CHECK(r.done);
  CHECK(env.record().outcome == Outcome::Escaped);
  CHECK_THROWS_AS(env.step(0), ContractError);

  env.reset_to("<script>alert(1)</script>");
  for (int k = 0; k < 20; ++k) {
    r = env.step(0);
    for (double x : r.observation) CHECK((x >= 0.0 && x <= 1.0));
  }
  CHECK(r.done);
  CHECK(env.record().outcome == Outcome::Exhausted);
  CHECK(env.record().actions.size() == 20);
}

TEST_CASE("oracle mode ruin") {
  rl::EnvConfig cfg;
  cfg.mode = rl::Mode::Oracle;
  auto t = script_target();
  t.ruined = [](std::string_view p) { return p.find('`') != std::string_view::npos; };
  Environment env(starts(), t, cfg);
  env.reset_to("<script>alert(1)</script>");
  const auto r = env.step(14);  // A15 inserts backticks
  CHECK(r.reward == rl::kRuinReward);
  CHECK(r.done);
  CHECK(env.record().outcome == Outcome::Ruined);
  // Plain mode never consults the oracle.
  Environment plain(starts(), t, {});
  plain.reset_to("<script>alert(1)</script>");
  CHECK(plain.step(14).reward == rl::kDetectedReward);
}

TEST_CASE("reward alphabet and episode bounds under random play") {
  Rng rng(5);
  for (auto mode : {rl::Mode::Plain, rl::Mode::Oracle}) {
    rl::EnvConfig cfg;
    cfg.mode = mode;
    Environment env(starts(), script_target(), cfg);
    std::set<double> seen;
    for (int ep = 0; ep < 200; ++ep) {
      env.reset(rng);
      while (!env.done()) seen.insert(env.step(rng.index(27)).reward);
      const auto& rec = env.record();
      CHECK(rec.rewards.size() == rec.actions.size());
      CHECK(rec.actions.size() <= 20);
      if (rec.outcome == Outcome::Escaped) CHECK(rec.rewards.back() == rl::kEscapeReward);
      if (mode == rl::Mode::Plain) CHECK(rec.outcome != Outcome::Ruined);
    }
    for (double r : seen) {
      const bool ok = r == 10.0 || r == -1.0 || (mode == rl::Mode::Oracle && r == -2.0);
      CHECK_MESSAGE(ok, r);
    }
  }
}

TEST_CASE("history window extends the observation") {
  rl::EnvConfig cfg;
  cfg.history_window = 2;
  Environment env(starts(), script_target(), cfg);
  CHECK(env.observation_size() == 28 + 54);
  env.reset_to("<script>x</script>");
  const auto obs = env.step(5).observation;
  CHECK(obs.size() == 82);
  CHECK(obs[28 + 5] == 1.0);
}

TEST_CASE("evaluation arithmetic") {
  const auto policy = rl::PolicyModel::create(28, 27, {}, 1);
  rl::Target never;
  never.score = [](std::string_view) { return 1.0; };
  std::vector<std::string> ps(4, "<b>");
  const auto none = rl::evaluate_agent(policy, ps, never, {});
  CHECK(none.escape_rate == 0.0);
  CHECK(none.detection_rate == 1.0);
  rl::Target half;
  half.score = [](std::string_view p) { return p.find("odd") != std::string_view::npos ? 0.0 : 1.0; };
  std::vector<std::string> mixed;
  for (int i = 0; i < 10; ++i) mixed.push_back(i % 2 ? "odd" : "even");
  const auto e = rl::evaluate_agent(policy, mixed, half, {});
  CHECK(e.escape_rate == 0.5);
  CHECK(e.escape_rate + e.detection_rate == 1.0);
  CHECK(e.escaped.size() == 5);
  CHECK_THROWS(rl::evaluate_agent(policy, {}, half, {}));
}

TEST_CASE("policy distribution and greedy ties") {
  auto p = rl::PolicyModel::create(28, 27, {}, 3);
  const std::vector<double> obs(28, 0.0);
  CHECK(p.probabilities(obs).sum() == doctest::Approx(1.0).epsilon(1e-12));
  p.policy.parameters().setZero();
  CHECK(p.greedy(obs) == 0);
}

TEST_CASE("stub detector task: A10 escapes within 50k steps, reward does not drop late") {
  require(checks::ppo_stub_task(50'000, true));
}

TEST_CASE("training is deterministic and checkpoints round trip") {
  Environment env1(starts(), script_target(), {}), env2(starts(), script_target(), {});
  rl::PpoConfig cfg;
  cfg.rollout_steps = 256;
  const auto a = rl::train_agent(env1, cfg, 1024, 7);
  const auto b = rl::train_agent(env2, cfg, 1024, 7);
  CHECK(a.policy.policy.parameters() == b.policy.policy.parameters());
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].mean_reward == b.curve[i].mean_reward);
  for (const auto& u : a.updates) {
    CHECK(u.first_ratio_deviation <= 1e-6);
    CHECK(std::abs(u.min_probability_sum - 1.0) <= 1e-6);
    CHECK(std::abs(u.max_probability_sum - 1.0) <= 1e-6);
  }
  const auto dir = std::filesystem::temp_directory_path() / "xsslab_policy_test";
  rl::save_policy(dir / "policy.json", a.policy);
  const auto back = rl::load_policy(dir / "policy.json");
  CHECK(back.policy.parameters() == a.policy.policy.parameters());
  CHECK(back.value.parameters() == a.policy.value.parameters());
  CHECK(back.policy_opt.m == a.policy.policy_opt.m);
  CHECK(back.policy_opt.t == a.policy.policy_opt.t);
  rl::write_curve_csv(dir / "curve.csv", a.curve);
  CHECK(read_file(dir / "curve.csv").starts_with("rollout,steps,episodes,mean_reward,val_escape_rate\n"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("config round trips") {
  rl::EnvConfig e;
  e.mode = rl::Mode::Oracle;
  e.max_steps = 7;
  CHECK(rl::EnvConfig::from_json(e.to_json()).to_json() == e.to_json());
  rl::PpoConfig p;
  p.clip = 0.1;
  CHECK(rl::PpoConfig::from_json(p.to_json()).to_json() == p.to_json());
  CHECK(rl::mode_from_string("oracle-in-loop") == rl::Mode::Oracle);
}
