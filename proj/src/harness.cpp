#include "xsslab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "xsslab/oracle.hpp"

namespace xsslab::harness {
namespace {

std::vector<std::string> architecture_names(const std::vector<Architecture>& archs) {
  std::vector<std::string> out;
  for (auto a : archs) out.emplace_back(detectors::to_string(a));
  return out;
}

void write_lines(const fs::path& path, const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  write_file(path, out);
}

struct ViewMetrics {
  double rr_v = 0.0;
  double or_v = 0.0;
};

ViewMetrics view_metrics(const rl::DetectionPipeline& pipeline, const std::vector<std::string>& escaped) {
  std::size_t ruined = 0;
  double oov = 0.0;
  for (const auto& e : escaped) {
    const auto v = pipeline.view(e);
    oov += vocab::oov_rate(v);
    if (!oracle::is_malicious(oracle::detokenize_for_oracle(v))) ++ruined;
  }
  const auto n = static_cast<double>(escaped.size());
  return {static_cast<double>(ruined) / n, oov / n};
}

}  // namespace

ExperimentConfig ExperimentConfig::fast() {
  ExperimentConfig c;
  c.seeds = {1, 2, 3};
  c.budget = 100'000;
  return c;
}

json ExperimentConfig::to_json() const {
  json seeds_json = seeds;
  return {{"dataset",
           {{"path", dataset.path},
            {"format", dataset.format.to_json()},
            {"synthetic", {{"seed", dataset.synth.seed}, {"benign", dataset.synth.benign}, {"malicious", dataset.synth.malicious}}},
            {"prefilter", dataset.prefilter}}},
          {"split_seed", split_seed},
          {"fractions", {fractions.train, fractions.val, fractions.test}},
          {"embedding", embedding.to_json()},
          {"embedding_seed", embedding_seed},
          {"detector", detector.to_json()},
          {"detector_seed", detector_seed},
          {"detectors", architecture_names(detectors)},
          {"seeds", seeds_json},
          {"env", env.to_json()},
          {"ppo", ppo.to_json()},
          {"budget", budget},
          {"validate_every", validate_every},
          {"workers", workers}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c = j.value("profile", std::string("full")) == "fast" ? fast() : ExperimentConfig{};
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    c.dataset.path = d.value("path", c.dataset.path);
    if (d.contains("format")) c.dataset.format = corpus::CsvFormat::from_json(d.at("format"));
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      c.dataset.synth.seed = s.value("seed", c.dataset.synth.seed);
      c.dataset.synth.benign = s.value("benign", c.dataset.synth.benign);
      c.dataset.synth.malicious = s.value("malicious", c.dataset.synth.malicious);
    }
    c.dataset.prefilter = d.value("prefilter", c.dataset.prefilter);
  }
  c.split_seed = j.value("split_seed", c.split_seed);
  if (j.contains("fractions")) {
    const auto& f = j.at("fractions");
    if (!f.is_array() || f.size() != 3) throw ConfigError("fractions must be [train, val, test]");
    c.fractions = {f[0].get<double>(), f[1].get<double>(), f[2].get<double>()};
  }
  if (j.contains("embedding")) c.embedding = vocab::EmbeddingConfig::from_json(j.at("embedding"));
  c.embedding_seed = j.value("embedding_seed", c.embedding_seed);
  if (j.contains("detector")) c.detector = detectors::TrainConfig::from_json(j.at("detector"));
  c.detector_seed = j.value("detector_seed", c.detector_seed);
  if (j.contains("detectors")) {
    c.detectors.clear();
    for (const auto& name : j.at("detectors")) c.detectors.push_back(detectors::architecture_from_string(name.get<std::string>()));
  }
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("env")) c.env = rl::EnvConfig::from_json(j.at("env"));
  if (j.contains("ppo")) c.ppo = rl::PpoConfig::from_json(j.at("ppo"));
  c.budget = j.value("budget", c.budget);
  c.validate_every = j.value("validate_every", c.validate_every);
  c.workers = j.value("workers", c.workers);
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return from_json(read_json(path));
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be pairwise distinct");
  }
  if (detectors.empty()) throw ConfigError("at least one detector is required");
  if (!dataset.path.empty() && !fs::exists(dataset.path)) throw ConfigError("dataset not found: " + dataset.path);
  if (budget == 0) throw ConfigError("agent budget must be positive");
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("workers");
  return sha256_hex(j.dump());
}

Workspace::Workspace(ExperimentConfig config, fs::path root) : config_(std::move(config)), root_(std::move(root)) {
  config_.validate();
}

std::string Workspace::stamp(const json& relevant) const { return sha256_hex(relevant.dump()); }

bool Workspace::fresh(const fs::path& stamp_file, const std::string& stamp) const {
  return fs::exists(stamp_file) && read_file(stamp_file) == stamp;
}

namespace {

json data_relevant(const ExperimentConfig& c) {
  const json full = c.to_json();
  return {{"dataset", full.at("dataset")},         {"split_seed", c.split_seed},
          {"fractions", full.at("fractions")},     {"embedding", full.at("embedding")},
          {"embedding_seed", c.embedding_seed}};
}

json detector_relevant(const ExperimentConfig& c, Architecture arch) {
  json j = data_relevant(c);
  j["detector"] = c.detector.to_json();
  j["detector_seed"] = c.detector_seed;
  j["architecture"] = detectors::to_string(arch);
  return j;
}

json cell_relevant(const ExperimentConfig& c, rl::Mode mode, Architecture arch, std::uint64_t seed) {
  json j = detector_relevant(c, arch);
  j["env"] = c.env.to_json();
  j["ppo"] = c.ppo.to_json();
  j["budget"] = c.budget;
  j["validate_every"] = c.validate_every;
  j["seed"] = seed;
  j["mode"] = rl::to_string(mode);
  return j;
}

}  // namespace

void Workspace::prepare() {
  if (prepared_) return;
  const fs::path dir = root_ / "data";
  const std::string st = stamp(data_relevant(config_));
  if (fresh(dir / "stamp", st)) {
    artifacts_.split = corpus::load_split(dir);
    artifacts_.table = vocab::load_table(dir / "embeddings.json");
    artifacts_.data_summary = read_json(dir / "summary.json");
    artifacts_.dataset_hash = artifacts_.data_summary.at("dataset_sha256").get<std::string>();
    prepared_ = true;
    return;
  }
  std::string csv;
  if (config_.dataset.path.empty()) {
    csv = corpus::synthesize_csv(config_.dataset.synth);
    write_file(dir / "corpus.csv", csv);
  } else {
    csv = read_file(config_.dataset.path);
  }
  artifacts_.dataset_hash = sha256_hex(csv);
  const auto ingested = corpus::ingest_text(csv, config_.dataset.format);
  for (const auto& w : ingested.warnings) std::cerr << "warning: dataset: " << w << "\n";
  corpus::PrefilterResult filtered;
  if (config_.dataset.prefilter) {
    filtered = corpus::prefilter_with_oracle(ingested.payloads);
  } else {
    filtered.retained = ingested.payloads;
  }
  auto& split = artifacts_.split;
  split = corpus::balance_and_split(filtered.retained, config_.split_seed, config_.fractions);

  const auto vocabulary = vocab::build_vocabulary_for_split(split, split.detector_train, config_.embedding.vocab_fraction);
  std::vector<vocab::TokenSequence> substituted;
  std::set<std::string> distinct;
  for (const auto& p : split.detector_train) {
    auto seq = preprocess::preprocess(p.text);
    distinct.insert(seq.tokens.begin(), seq.tokens.end());
    substituted.push_back(vocab::substitute_oov(seq, vocabulary));
  }
  artifacts_.table = vocab::train_embeddings(substituted, vocabulary, config_.embedding, config_.embedding_seed);

  // Unmutated baselines: OOV rate and oracle validity before/after preprocessing.
  double oov = 0.0;
  std::vector<std::string> raw, views;
  for (const auto& p : split.agent_test) {
    const auto v = vocab::substitute_oov(preprocess::preprocess(p.text), vocabulary);
    oov += vocab::oov_rate(v);
    raw.push_back(p.text);
    views.push_back(oracle::detokenize_for_oracle(v));
  }
  artifacts_.data_summary = {
      {"dataset_sha256", artifacts_.dataset_hash},
      {"source", config_.dataset.path.empty() ? "synthetic" : config_.dataset.path},
      {"rows", ingested.rows},
      {"duplicates", ingested.duplicates},
      {"empty_texts", ingested.empty_texts},
      {"unique_payloads", ingested.payloads.size()},
      {"prefilter_removed_benign", filtered.removed_benign},
      {"prefilter_removed_malicious", filtered.removed_malicious},
      {"prefilter_render_failures", filtered.render_failures},
      {"distinct_train_tokens", distinct.size()},
      {"vocabulary_size", vocabulary.size()},
      {"baseline_oov_rate", split.agent_test.empty() ? 0.0 : oov / static_cast<double>(split.agent_test.size())},
      {"baseline_ruin_rate", split.agent_test.empty() ? 0.0 : oracle::ruin_rate(raw)},
      {"baseline_ruin_rate_preprocessed", split.agent_test.empty() ? 0.0 : oracle::ruin_rate(views)},
      {"template_sha256", oracle::template_sha256()}};
  corpus::save_split(dir, split, {{"dataset_sha256", artifacts_.dataset_hash}});
  vocab::save_table(dir / "embeddings.json", artifacts_.table);
  write_json(dir / "summary.json", artifacts_.data_summary);
  write_file(dir / "stamp", st);
  prepared_ = true;
}

void Workspace::train_detector(Architecture arch) {
  prepare();
  if (artifacts_.models.contains(arch)) return;
  const fs::path dir = root_ / "detectors";
  const std::string name(detectors::to_string(arch));
  const std::string st = stamp(detector_relevant(config_, arch));
  const fs::path stamp_file = dir / (name + ".stamp");
  if (fresh(stamp_file, st)) {
    artifacts_.models[arch] = detectors::load_model(dir / (name + ".json"));
    const json e = read_json(dir / (name + "_eval.json"));
    artifacts_.evals[arch] = detectors::EvalReport::from_counts(e.at("tp"), e.at("fp"), e.at("tn"), e.at("fn"));
    return;
  }
  const auto& split = artifacts_.split;
  const auto train_set = detectors::make_set(split.detector_train, artifacts_.table);
  const auto val_set = detectors::make_set(split.detector_val, artifacts_.table);
  const auto test_set = detectors::make_set(split.detector_test, artifacts_.table);
  auto model = detectors::train(arch, train_set, val_set, artifacts_.table, config_.detector, config_.detector_seed);
  const auto eval = detectors::evaluate(model, test_set);
  detectors::save_model(dir / (name + ".json"), model);
  write_json(dir / (name + "_eval.json"), eval.to_json());
  write_file(stamp_file, st);
  artifacts_.models[arch] = std::move(model);
  artifacts_.evals[arch] = eval;
}

void Workspace::train_detectors() {
  for (auto a : config_.detectors) train_detector(a);
}

fs::path Workspace::cell_dir(rl::Mode mode, Architecture arch, std::uint64_t seed) const {
  return root_ / "agents" / std::string(rl::to_string(mode)) / std::string(detectors::to_string(arch)) /
         ("seed_" + std::to_string(seed));
}

json CellResult::to_json() const {
  json j = {{"detector", detectors::to_string(arch)},
            {"seed", seed},
            {"mode", rl::to_string(mode)},
            {"ok", ok},
            {"total", total},
            {"escaped", escaped},
            {"er", er},
            {"dr", dr},
            {"outcomes", outcomes},
            {"mean_episode_length", mean_episode_length},
            {"ruined_training_episodes", ruined_training_episodes}};
  j["rr_e"] = rr_e ? json(*rr_e) : json(nullptr);
  j["rr_v"] = rr_v ? json(*rr_v) : json(nullptr);
  j["or_v"] = or_v ? json(*or_v) : json(nullptr);
  if (!ok) j["error"] = error;
  return j;
}

CellResult CellResult::from_json(const json& j) {
  CellResult c;
  c.arch = detectors::architecture_from_string(j.at("detector").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.mode = rl::mode_from_string(j.at("mode").get<std::string>());
  c.ok = j.at("ok").get<bool>();
  c.error = j.value("error", std::string());
  c.total = j.value("total", std::size_t{0});
  c.escaped = j.value("escaped", std::size_t{0});
  c.er = j.value("er", 0.0);
  c.dr = j.value("dr", 1.0);
  auto opt = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<double>();
  };
  c.rr_e = opt("rr_e");
  c.rr_v = opt("rr_v");
  c.or_v = opt("or_v");
  if (j.contains("outcomes")) c.outcomes = j.at("outcomes").get<std::map<std::string, std::size_t>>();
  c.mean_episode_length = j.value("mean_episode_length", 0.0);
  c.ruined_training_episodes = j.value("ruined_training_episodes", std::size_t{0});
  return c;
}

void train_cell_agent(Workspace& ws, rl::Mode mode, Architecture arch, std::uint64_t seed) {
  ws.train_detector(arch);
  const auto& cfg = ws.config();
  const auto& art = ws.artifacts();
  const fs::path dir = ws.cell_dir(mode, arch, seed);
  const std::string st = sha256_hex(cell_relevant(cfg, mode, arch, seed).dump());
  if (fs::exists(dir / "train.stamp") && read_file(dir / "train.stamp") == st) return;

  const rl::DetectionPipeline pipeline(art.table, art.models.at(arch));
  rl::Target target = pipeline.target();
  std::size_t ruined = 0;
  target.ruined = [&pipeline, &ruined](std::string_view p) {
    const bool r = pipeline.ruined(p);
    ruined += r ? 1 : 0;
    return r;
  };
  rl::EnvConfig env_cfg = cfg.env;
  env_cfg.mode = mode;
  rl::Environment env(corpus::texts(art.split.agent_train), target, env_cfg);

  rl::EnvConfig eval_cfg = cfg.env;
  eval_cfg.mode = rl::Mode::Plain;
  const auto val_texts = corpus::texts(art.split.agent_val);
  const rl::Target eval_target = pipeline.target();
  rl::Validator validate;
  if (!val_texts.empty()) {
    validate = [&](const rl::PolicyModel& p) { return rl::evaluate_agent(p, val_texts, eval_target, eval_cfg).escape_rate; };
  }
  auto result = rl::train_agent(env, cfg.ppo, cfg.budget, seed, validate, cfg.validate_every);
  rl::save_policy(dir / "policy.json", result.policy);
  rl::write_curve_csv(dir / "curve.csv", result.curve);
  double max_dev = 0.0;
  for (const auto& u : result.updates) max_dev = std::max(max_dev, u.first_ratio_deviation);
  write_json(dir / "train.json", {{"steps", result.steps},
                                  {"episodes", result.episodes},
                                  {"ruined_episodes", ruined},
                                  {"updates", result.updates.size()},
                                  {"max_first_ratio_deviation", max_dev}});
  write_file(dir / "train.stamp", st);
}

CellResult attack_cell(Workspace& ws, rl::Mode mode, Architecture arch, std::uint64_t seed) {
  ws.train_detector(arch);
  const auto& cfg = ws.config();
  const auto& art = ws.artifacts();
  const fs::path dir = ws.cell_dir(mode, arch, seed);
  if (!fs::exists(dir / "policy.json")) throw ConfigError("no trained agent in " + dir.string() + "; run train-agent first");
  const auto policy = rl::load_policy(dir / "policy.json");
  const rl::DetectionPipeline pipeline(art.table, art.models.at(arch));
  // Escape rate counts detector verdicts only, in both modes.
  rl::EnvConfig eval_cfg = cfg.env;
  eval_cfg.mode = rl::Mode::Plain;
  const auto eval = rl::evaluate_agent(policy, corpus::texts(art.split.agent_test), pipeline.target(), eval_cfg);

  CellResult cell;
  cell.arch = arch;
  cell.seed = seed;
  cell.mode = mode;
  cell.ok = true;
  cell.total = eval.episodes.size();
  cell.escaped = eval.escaped.size();
  cell.er = eval.escape_rate;
  cell.dr = eval.detection_rate;
  double length = 0.0;
  std::vector<json> episode_rows, escaped_rows;
  for (const auto& e : eval.episodes) {
    ++cell.outcomes[std::string(rl::to_string(e.outcome))];
    length += static_cast<double>(e.actions.size());
    episode_rows.push_back(e.to_json());
    if (e.outcome == rl::Outcome::Escaped) escaped_rows.push_back({{"text", e.final_payload}});
  }
  cell.mean_episode_length = length / static_cast<double>(std::max<std::size_t>(1, eval.episodes.size()));
  if (!eval.escaped.empty()) {
    cell.rr_e = oracle::ruin_rate(eval.escaped);
    const auto vm = view_metrics(pipeline, eval.escaped);
    cell.rr_v = vm.rr_v;
    cell.or_v = vm.or_v;
  }
  if (fs::exists(dir / "train.json")) {
    cell.ruined_training_episodes = read_json(dir / "train.json").value("ruined_episodes", std::size_t{0});
  }
  write_lines(dir / "episodes.jsonl", episode_rows);
  write_lines(dir / "escaped.jsonl", escaped_rows);
  write_json(dir / "cell.json", cell.to_json());
  write_file(dir / "cell.stamp", sha256_hex(cell_relevant(cfg, mode, arch, seed).dump()));
  return cell;
}

CellResult run_cell(Workspace& ws, rl::Mode mode, Architecture arch, std::uint64_t seed) {
  const fs::path dir = ws.cell_dir(mode, arch, seed);
  try {
    const std::string st = sha256_hex(cell_relevant(ws.config(), mode, arch, seed).dump());
    if (fs::exists(dir / "cell.stamp") && read_file(dir / "cell.stamp") == st && fs::exists(dir / "cell.json")) {
      return CellResult::from_json(read_json(dir / "cell.json"));
    }
    train_cell_agent(ws, mode, arch, seed);
    return attack_cell(ws, mode, arch, seed);
  } catch (const std::exception& e) {
    CellResult cell;
    cell.arch = arch;
    cell.seed = seed;
    cell.mode = mode;
    cell.ok = false;
    cell.error = e.what();
    return cell;
  }
}

std::vector<CellResult> run_cells(Workspace& ws, rl::Mode mode) {
  const auto& cfg = ws.config();
  ws.train_detectors();
  std::vector<std::pair<Architecture, std::uint64_t>> jobs;
  for (auto a : cfg.detectors) {
    for (auto s : cfg.seeds) jobs.emplace_back(a, s);
  }
  std::vector<CellResult> results(jobs.size());
  std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      results[i] = run_cell(ws, mode, jobs[i].first, jobs[i].second);
      std::lock_guard lock(log_mutex);
      std::cerr << "[" << rl::to_string(mode) << "] " << detectors::to_string(jobs[i].first) << " seed "
                << jobs[i].second << ": "
                << (results[i].ok ? "ER " + percent(results[i].er) : "failed: " + results[i].error) << "\n";
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

std::vector<CellResult> load_cells(const Workspace& ws, rl::Mode mode) {
  std::vector<CellResult> out;
  for (auto a : ws.config().detectors) {
    for (auto s : ws.config().seeds) {
      const fs::path file = ws.cell_dir(mode, a, s) / "cell.json";
      if (fs::exists(file)) {
        out.push_back(CellResult::from_json(read_json(file)));
      } else {
        CellResult c;
        c.arch = a;
        c.seed = s;
        c.mode = mode;
        c.error = "missing: run rq" + std::string(mode == rl::Mode::Plain ? "1" : "4") + " first";
        out.push_back(c);
      }
    }
  }
  return out;
}

json run_rq1(Workspace& ws) {
  auto report = make_report(ws, "rq1", run_cells(ws, rl::Mode::Plain), {"er", "dr"});
  write_report(ws, report);
  return report;
}

json run_rq2(Workspace& ws) {
  ws.prepare();
  auto report = make_report(ws, "rq2", load_cells(ws, rl::Mode::Plain), {"rr_e"});
  write_report(ws, report);
  return report;
}

json run_rq3(Workspace& ws) {
  ws.prepare();
  auto report = make_report(ws, "rq3", load_cells(ws, rl::Mode::Plain), {"rr_v", "or_v"});
  report["baseline"] = {{"oov_rate", ws.artifacts().data_summary.at("baseline_oov_rate")},
                        {"ruin_rate", ws.artifacts().data_summary.at("baseline_ruin_rate")},
                        {"ruin_rate_preprocessed", ws.artifacts().data_summary.at("baseline_ruin_rate_preprocessed")}};
  write_report(ws, report);
  return report;
}

json run_rq4(Workspace& ws) {
  auto report = make_report(ws, "rq4", run_cells(ws, rl::Mode::Oracle), {"er", "dr", "rr_e", "rr_v", "or_v"});
  write_report(ws, report);
  return report;
}

json detector_report(Workspace& ws) {
  ws.train_detectors();
  json rows = json::object();
  for (auto a : ws.config().detectors) {
    json row = ws.artifacts().evals.at(a).to_json();
    row["epochs_run"] = ws.artifacts().models.at(a).meta.epochs_run;
    row["best_val_loss"] = ws.artifacts().models.at(a).meta.best_val_loss;
    rows[std::string(detectors::to_string(a))] = row;
  }
  json report = {{"name", "detectors"},
                 {"detectors", rows},
                 {"manifest",
                  {{"config_sha256", ws.config().hash()},
                   {"dataset_sha256", ws.artifacts().dataset_hash},
                   {"template_sha256", oracle::template_sha256()}}}};
  write_report(ws, report);
  return report;
}

}  // namespace xsslab::harness
