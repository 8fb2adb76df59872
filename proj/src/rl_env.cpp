#include <algorithm>
#include <numeric>

#include "xsslab/oracle.hpp"
#include "xsslab/rl.hpp"
#include "xsslab/text.hpp"

namespace xsslab::rl {

std::string_view to_string(Mode m) { return m == Mode::Plain ? "plain" : "oracle"; }

Mode mode_from_string(std::string_view s) {
  const std::string lower = text::ascii_lower(s);
  if (lower == "plain") return Mode::Plain;
  if (lower == "oracle" || lower == "oracle-in-loop") return Mode::Oracle;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected plain or oracle)");
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Escaped: return "Escaped";
    case Outcome::Exhausted: return "Exhausted";
    case Outcome::Ruined: return "Ruined";
  }
  return "?";
}

vocab::TokenSequence DetectionPipeline::view(std::string_view payload) const {
  return vocab::substitute_oov(preprocess::preprocess(payload), table_->vocabulary);
}

double DetectionPipeline::score(std::string_view payload) const {
  const auto sample = detectors::compact(preprocess::preprocess(payload), *table_);
  return model_->score(sample.view());
}

bool DetectionPipeline::ruined(std::string_view payload) const {
  return !oracle::is_malicious(oracle::detokenize_for_oracle(view(payload)));
}

Target DetectionPipeline::target() const {
  return {[this](std::string_view p) { return score(p); }, model_->threshold,
          [this](std::string_view p) { return ruined(p); }};
}

json EnvConfig::to_json() const {
  return {{"max_steps", max_steps}, {"mode", to_string(mode)}, {"history_window", history_window}};
}

EnvConfig EnvConfig::from_json(const json& j) {
  EnvConfig c;
  c.max_steps = j.value("max_steps", c.max_steps);
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
  c.history_window = j.value("history_window", c.history_window);
  if (c.max_steps == 0) throw ConfigError("max_steps must be positive");
  return c;
}

double EpisodeRecord::total_reward() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

json EpisodeRecord::to_json() const {
  return {{"start", start_payload},
          {"actions", actions},
          {"rewards", rewards},
          {"final", final_payload},
          {"outcome", to_string(outcome)}};
}

Environment::Environment(std::vector<std::string> start_payloads, Target target, EnvConfig config)
    : starts_(std::move(start_payloads)), target_(std::move(target)), config_(config),
      counts_(mutations::kActionCount, 0) {
  if (!target_.score) throw ConfigError("environment needs a detector score function");
  if (config_.mode == Mode::Oracle && !target_.ruined) throw ConfigError("oracle mode needs a ruin check");
  if (config_.max_steps == 0) throw ConfigError("max_steps must be positive");
}

std::vector<double> Environment::reset(Rng& rng) {
  if (starts_.empty()) throw ConfigError("cannot reset: the agent training split is empty");
  return reset_to(starts_[rng.index(starts_.size())]);
}

std::vector<double> Environment::reset_to(std::string payload) {
  payload_ = std::move(payload);
  std::fill(counts_.begin(), counts_.end(), 0);
  steps_ = 0;
  done_ = false;
  record_ = EpisodeRecord{};
  record_.start_payload = payload_;
  record_.final_payload = payload_;
  return observation();
}

std::vector<double> Environment::observation() const {
  std::vector<double> obs(observation_size(), 0.0);
  const double scale = static_cast<double>(config_.max_steps);
  for (std::size_t a = 0; a < counts_.size(); ++a) obs[a] = static_cast<double>(counts_[a]) / scale;
  obs[counts_.size()] = static_cast<double>(steps_) / scale;
  const std::size_t base = counts_.size() + 1;
  const auto& acts = record_.actions;
  for (std::size_t k = 0; k < config_.history_window && k < acts.size(); ++k) {
    const int id = acts[acts.size() - 1 - k];
    obs[base + k * mutations::kActionCount + static_cast<std::size_t>(id - 1)] = 1.0;
  }
  return obs;
}

StepResult Environment::step(std::size_t action_index) {
  if (done_) throw ContractError("step() called on a finished episode; call reset() first");
  if (action_index >= mutations::kActionCount) throw ContractError("action index out of range");
  const int id = static_cast<int>(action_index) + 1;
  payload_ = mutations::apply_action(payload_, id).payload;
  ++counts_[action_index];
  ++steps_;
  record_.actions.push_back(id);
  record_.final_payload = payload_;

  StepResult r;
  // A payload the oracle no longer accepts is a failed attack even when it
  // slips past the detector, so the ruin check runs first.
  if (config_.mode == Mode::Oracle && target_.ruined(payload_)) {
    r.reward = kRuinReward;
    r.done = true;
    record_.outcome = Outcome::Ruined;
  } else if (target_.score(payload_) < target_.threshold) {
    r.reward = kEscapeReward;
    r.done = true;
    record_.outcome = Outcome::Escaped;
  } else {
    r.reward = kDetectedReward;
    r.done = steps_ >= config_.max_steps;
    record_.outcome = Outcome::Exhausted;
  }
  record_.rewards.push_back(r.reward);
  done_ = r.done;
  r.observation = observation();
  return r;
}

AgentEval evaluate_agent(const PolicyModel& policy, const std::vector<std::string>& payloads, const Target& target,
                         const EnvConfig& config) {
  if (payloads.empty()) throw ConfigError("cannot evaluate an agent on an empty split");
  Environment env({}, target, config);
  AgentEval eval;
  std::size_t escaped = 0;
  for (const auto& p : payloads) {
    auto obs = env.reset_to(p);
    while (!env.done()) obs = env.step(policy.greedy(obs)).observation;
    const auto& rec = env.record();
    if (rec.outcome == Outcome::Escaped) {
      ++escaped;
      eval.escaped.push_back(rec.final_payload);
    }
    eval.episodes.push_back(rec);
  }
  eval.escape_rate = static_cast<double>(escaped) / static_cast<double>(payloads.size());
  eval.detection_rate = 1.0 - eval.escape_rate;
  return eval;
}

}  // namespace xsslab::rl
