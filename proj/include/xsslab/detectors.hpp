#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "xsslab/vocab.hpp"

namespace xsslab::detectors {

enum class Architecture { MLP, CNN, LSTM };
std::string_view to_string(Architecture a);
Architecture architecture_from_string(std::string_view s);  // "mlp", "cnn", "lstm" (any case)

// A sample restricted to its non-padding rows: `len` rows of `dim` values,
// row-major. Padding rows are all-zero and every architecture ignores them.
struct Input {
  const double* data = nullptr;
  std::size_t len = 0;
};

// Owning compact form used for training sets.
struct CompactSample {
  std::vector<double> rows;
  std::size_t len = 0;
  Input view() const { return {rows.data(), len}; }
};
CompactSample compact(const vocab::TokenSequence& seq, const vocab::EmbeddingTable& table);

struct ParamInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct TrainingMeta {
  std::size_t epochs_run = 0;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::vector<double> val_losses;
};

class DetectorModel {
 public:
  DetectorModel() = default;
  // PyTorch default initialization (see constructor).
  DetectorModel(Architecture arch, std::size_t max_len, std::size_t dim, std::uint64_t seed);

  Architecture architecture() const { return arch_; }
  std::size_t max_len() const { return max_len_; }
  std::size_t dim() const { return dim_; }
  const std::vector<ParamInfo>& layout() const { return layout_; }
  Eigen::VectorXd& parameters() { return theta_; }
  const Eigen::VectorXd& parameters() const { return theta_; }

  double threshold = 0.5;
  TrainingMeta meta;

  double logit(Input x) const;
  double score(Input x) const;
  // Throws ShapeError unless the sample is max_len x dim.
  double score(const vocab::EmbeddedSample& sample) const;
  bool predicts_malicious(Input x) const { return score(x) >= threshold; }

  // Binary cross-entropy of one sample; adds dLoss/dtheta into `grad`.
  double loss_and_grad(Input x, double label, Eigen::VectorXd& grad) const;
  double loss(Input x, double label) const;

 private:
  std::size_t add_param(std::string name, std::vector<std::size_t> shape);
  const ParamInfo& param(std::string_view name) const;

  // Each returns the logit; with `grad` set it also backpropagates the BCE
  // loss against `label` into it.
  double mlp(Input x, Eigen::VectorXd* grad, double label) const;
  double cnn(Input x, Eigen::VectorXd* grad, double label) const;
  double lstm(Input x, Eigen::VectorXd* grad, double label) const;

  Architecture arch_ = Architecture::MLP;
  std::size_t max_len_ = 0;
  std::size_t dim_ = 0;
  std::vector<ParamInfo> layout_;
  Eigen::VectorXd theta_;

  friend DetectorModel load_model(const std::filesystem::path&);
};

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t patience = 10;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;

  json to_json() const;
  static TrainConfig from_json(const json& j);
};

struct LabeledSet {
  std::vector<CompactSample> samples;
  std::vector<double> labels;  // 1 = Malicious
  std::size_t size() const { return samples.size(); }
};
LabeledSet make_set(const std::vector<corpus::Payload>& payloads, const vocab::EmbeddingTable& table);

// Plain minibatch SGD on mean BCE. Stops after `patience` epochs without a
// validation-loss improvement and returns the best-validation parameters,
// rounded to float32. Non-finite loss throws NumericError.
DetectorModel train(Architecture arch, const LabeledSet& train_set, const LabeledSet& val_set,
                    const vocab::EmbeddingTable& table, const TrainConfig& config, std::uint64_t seed);

double mean_loss(const DetectorModel& model, const LabeledSet& set);

struct EvalReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0, recall = 0, accuracy = 0, f1 = 0;

  static EvalReport from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);
  json to_json() const;
};

// Threshold 0.5 confusion counts and metrics. Throws on an empty set.
EvalReport evaluate(const DetectorModel& model, const LabeledSet& test_set);

void save_model(const std::filesystem::path& json_path, const DetectorModel& model);
DetectorModel load_model(const std::filesystem::path& json_path);

}  // namespace xsslab::detectors
