#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xsslab/corpus.hpp"
#include "xsslab/detectors.hpp"
#include "xsslab/rl.hpp"
#include "xsslab/vocab.hpp"

namespace xsslab::harness {

namespace fs = std::filesystem;
using detectors::Architecture;

struct DatasetConfig {
  std::string path;  // empty: generate the synthetic corpus
  corpus::CsvFormat format;
  corpus::SynthConfig synth;
  bool prefilter = true;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::uint64_t split_seed = 1;
  corpus::Fractions fractions;
  vocab::EmbeddingConfig embedding;
  std::uint64_t embedding_seed = 7;
  detectors::TrainConfig detector;
  std::uint64_t detector_seed = 3;
  std::vector<Architecture> detectors = {Architecture::MLP, Architecture::CNN, Architecture::LSTM};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  rl::EnvConfig env;
  rl::PpoConfig ppo;
  std::size_t budget = 100'000;
  std::size_t validate_every = 10;
  std::size_t workers = 0;  // 0: one per hardware thread; never affects results

  static ExperimentConfig fast();  // 3 seeds, 100k steps
  json to_json() const;
  static ExperimentConfig from_json(const json& j);
  static ExperimentConfig load(const fs::path& path);
  // Throws ConfigError on duplicate seeds, missing paths, empty sets.
  void validate() const;
  // SHA-256 of the canonical JSON, `workers` excluded.
  std::string hash() const;
};

// Everything the agents need, produced once per configuration.
struct Artifacts {
  corpus::DatasetSplit split;
  vocab::EmbeddingTable table;
  std::map<Architecture, detectors::DetectorModel> models;
  std::map<Architecture, detectors::EvalReport> evals;
  json data_summary;
  std::string dataset_hash;
};

class Workspace {
 public:
  Workspace(ExperimentConfig config, fs::path root);

  const ExperimentConfig& config() const { return config_; }
  const fs::path& root() const { return root_; }

  // Stages, each cached on disk under a stamp of the config it depends on.
  void prepare();
  void train_detector(Architecture arch);
  void train_detectors();
  const Artifacts& artifacts() const { return artifacts_; }

  fs::path cell_dir(rl::Mode mode, Architecture arch, std::uint64_t seed) const;

 private:
  std::string stamp(const json& relevant) const;
  bool fresh(const fs::path& stamp_file, const std::string& stamp) const;

  ExperimentConfig config_;
  fs::path root_;
  Artifacts artifacts_;
  bool prepared_ = false;
};

struct CellResult {
  Architecture arch = Architecture::MLP;
  std::uint64_t seed = 0;
  rl::Mode mode = rl::Mode::Plain;
  bool ok = false;
  std::string error;
  std::size_t total = 0;
  std::size_t escaped = 0;
  double er = 0.0;
  double dr = 1.0;
  std::optional<double> rr_e, rr_v, or_v;
  std::map<std::string, std::size_t> outcomes;  // evaluation episode outcomes
  double mean_episode_length = 0.0;
  std::size_t ruined_training_episodes = 0;

  json to_json() const;
  static CellResult from_json(const json& j);
};

// Trains (or reloads) the agent for one cell and attacks the agent test
// split. Errors are captured in the result, never thrown.
CellResult run_cell(Workspace& ws, rl::Mode mode, Architecture arch, std::uint64_t seed);
// Train only: writes policy and training curve.
void train_cell_agent(Workspace& ws, rl::Mode mode, Architecture arch, std::uint64_t seed);
// Loads the cell's policy and evaluates it; writes E, episodes and metrics.
CellResult attack_cell(Workspace& ws, rl::Mode mode, Architecture arch, std::uint64_t seed);

// Every (detector, seed) cell of a mode, fanned out over worker threads.
std::vector<CellResult> run_cells(Workspace& ws, rl::Mode mode);
// Cells already on disk; missing ones are reported as failed.
std::vector<CellResult> load_cells(const Workspace& ws, rl::Mode mode);

struct Summary {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one value
  bool available() const { return !values.empty(); }
};
Summary summarize(const std::vector<double>& values);

// One report per research question; `metrics` picks the columns.
json make_report(const Workspace& ws, const std::string& name, const std::vector<CellResult>& cells,
                 const std::vector<std::string>& metrics);
std::string render_table(const json& report);
void write_report(const Workspace& ws, const json& report);

json run_rq1(Workspace& ws);
json run_rq2(Workspace& ws);  // post-processes RQ1 cells
json run_rq3(Workspace& ws);  // post-processes RQ1 cells
json run_rq4(Workspace& ws);
json detector_report(Workspace& ws);

double metric_value(const CellResult& cell, const std::string& metric, bool& present);

}  // namespace xsslab::harness
