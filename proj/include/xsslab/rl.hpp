#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "xsslab/detectors.hpp"
#include "xsslab/mutations.hpp"
#include "xsslab/rng.hpp"
#include "xsslab/vocab.hpp"

namespace xsslab::rl {

enum class Mode { Plain, Oracle };
std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);  // "plain" | "oracle"

enum class Outcome { Escaped, Exhausted, Ruined };
std::string_view to_string(Outcome o);

// What the environment attacks. `ruined` is only consulted in Oracle mode.
struct Target {
  std::function<double(std::string_view)> score;
  double threshold = 0.5;
  std::function<bool(std::string_view)> ruined;
};

// normalize -> tokenize -> substitute_oov -> embed -> detector.
class DetectionPipeline {
 public:
  DetectionPipeline(const vocab::EmbeddingTable& table, const detectors::DetectorModel& model)
      : table_(&table), model_(&model) {}

  vocab::TokenSequence view(std::string_view payload) const;  // the substituted sequence V
  double score(std::string_view payload) const;
  // True when the oracle no longer sees an attack in what the detector sees.
  bool ruined(std::string_view payload) const;
  Target target() const;

 private:
  const vocab::EmbeddingTable* table_;
  const detectors::DetectorModel* model_;
};

struct EnvConfig {
  std::size_t max_steps = 20;
  Mode mode = Mode::Plain;
  std::size_t history_window = 0;  // extra one-hot slots for the last k actions

  json to_json() const;
  static EnvConfig from_json(const json& j);
};

struct EpisodeRecord {
  std::string start_payload;
  std::vector<int> actions;  // 1-based action ids
  std::vector<double> rewards;
  std::string final_payload;
  Outcome outcome = Outcome::Exhausted;

  double total_reward() const;
  json to_json() const;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
};

inline constexpr double kEscapeReward = 10.0;
inline constexpr double kDetectedReward = -1.0;
inline constexpr double kRuinReward = -2.0;

class Environment {
 public:
  Environment(std::vector<std::string> start_payloads, Target target, EnvConfig config);

  std::size_t observation_size() const { return mutations::kActionCount + 1 + config_.history_window * mutations::kActionCount; }
  static constexpr std::size_t action_count() { return mutations::kActionCount; }
  const EnvConfig& config() const { return config_; }

  // Uniform start payload from the training split.
  std::vector<double> reset(Rng& rng);
  std::vector<double> reset_to(std::string payload);
  // `action_index` is 0-based (action id minus one).
  StepResult step(std::size_t action_index);

  bool done() const { return done_; }
  const EpisodeRecord& record() const { return record_; }
  const std::string& current_payload() const { return payload_; }
  std::vector<double> observation() const;

 private:
  std::vector<std::string> starts_;
  Target target_;
  EnvConfig config_;
  std::string payload_;
  std::vector<std::size_t> counts_;
  std::size_t steps_ = 0;
  bool done_ = true;
  EpisodeRecord record_;
};

// Fully connected network, tanh hidden layers, linear output. Batches are
// column-major: one column per sample.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> sizes, const std::vector<double>& layer_gains, Rng& rng);  // orthogonal init

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Eigen::VectorXd& parameters() { return theta_; }
  const Eigen::VectorXd& parameters() const { return theta_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  // Forward keeping activations, then backward of dL/doutput into a gradient.
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;
  };
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape& tape) const;
  Eigen::VectorXd backward(const Tape& tape, const Eigen::MatrixXd& d_output) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd theta_;
};

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  std::size_t rollout_steps = 2048;
  std::size_t minibatch = 64;
  std::size_t epochs = 10;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  std::size_t hidden = 64;
  bool normalize_advantage = true;

  json to_json() const;
  static PpoConfig from_json(const json& j);
};

struct Adam {
  Eigen::VectorXd m, v;
  std::size_t t = 0;
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
};

struct PolicyModel {
  std::size_t observation_size = 0;
  std::size_t action_count = 0;
  PpoConfig config;
  Mlp policy;
  Mlp value;
  Adam policy_opt, value_opt;

  static PolicyModel create(std::size_t observation_size, std::size_t action_count, const PpoConfig& config,
                            std::uint64_t seed);

  Eigen::VectorXd probabilities(const std::vector<double>& obs) const;
  // argmax of the logits; ties go to the lowest index.
  std::size_t greedy(const std::vector<double>& obs) const;
};

// -min(r*A, clip(r, 1-eps, 1+eps)*A) for one sample.
double clipped_objective(double ratio, double advantage, double eps);

// Minibatch loss over policy logits (actions x batch). Returns the loss and
// dLoss/dlogits: clipped surrogate plus -entropy_coef * mean entropy.
struct SurrogateResult {
  double loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  Eigen::VectorXd ratios;
  Eigen::MatrixXd d_logits;
};
SurrogateResult surrogate(const Eigen::MatrixXd& logits, const std::vector<std::size_t>& actions,
                          const Eigen::VectorXd& old_log_probs, const Eigen::VectorXd& advantages, double clip,
                          double entropy_coef);

struct RolloutBuffer {
  std::vector<std::vector<double>> observations;
  std::vector<std::size_t> actions;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<bool> dones;  // episode ended after this step
  double last_value = 0.0;  // V of the state after the final step
  std::size_t size() const { return actions.size(); }
};

// Generalized advantage estimation; returns (advantages, returns).
std::pair<std::vector<double>, std::vector<double>> compute_gae(const RolloutBuffer& buffer, double gamma,
                                                                double lambda);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double first_ratio_deviation = 0.0;  // max |r - 1| before the first gradient step
  double min_probability_sum = 1.0;
  double max_probability_sum = 1.0;
};
UpdateStats ppo_update(PolicyModel& model, const RolloutBuffer& buffer, Rng& rng);

struct CurvePoint {
  std::size_t rollout = 0;
  std::size_t steps = 0;
  std::size_t episodes = 0;
  double mean_reward = 0.0;           // over episodes finished in this rollout
  std::optional<double> val_escape;   // ER on the validation split, when measured
};

struct TrainResult {
  PolicyModel policy;
  std::vector<CurvePoint> curve;
  std::vector<UpdateStats> updates;
  std::size_t steps = 0;
  std::size_t episodes = 0;
};

using Validator = std::function<double(const PolicyModel&)>;
TrainResult train_agent(Environment& env, const PpoConfig& config, std::size_t budget, std::uint64_t seed,
                        const Validator& validate = {}, std::size_t validate_every = 10);

struct AgentEval {
  double escape_rate = 0.0;
  double detection_rate = 1.0;
  std::vector<std::string> escaped;  // the set E
  std::vector<EpisodeRecord> episodes;
};
// One greedy episode per payload, in order. Throws on an empty set.
AgentEval evaluate_agent(const PolicyModel& policy, const std::vector<std::string>& payloads, const Target& target,
                         const EnvConfig& config);

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);
void save_policy(const std::filesystem::path& json_path, const PolicyModel& model);
PolicyModel load_policy(const std::filesystem::path& json_path);

}  // namespace xsslab::rl
