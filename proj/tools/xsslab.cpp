// xsslab command line front end.
#include <CLI11.hpp>
#include <iostream>

#include "xsslab/harness.hpp"
#include "xsslab/mutations.hpp"
#include "xsslab/oracle.hpp"
#include "xsslab/preprocess.hpp"

#include <httplib.h>  // after Eigen: it leaks macros

using namespace xsslab;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  bool fast = false;
  std::string out = "xsslab-out";
  std::string dataset;
  std::string detector;
  std::string mode = "plain";
  std::uint64_t seed = 1;
  bool has_seed = false;
  int workers = -1;
};

harness::ExperimentConfig load_config(const Options& o) {
  harness::ExperimentConfig c = o.config.empty() ? harness::ExperimentConfig{} : harness::ExperimentConfig::load(o.config);
  if (o.fast) {
    const auto f = harness::ExperimentConfig::fast();
    c.seeds = f.seeds;
    c.budget = f.budget;
  }
  if (!o.dataset.empty()) c.dataset.path = o.dataset;
  if (o.workers >= 0) c.workers = static_cast<std::size_t>(o.workers);
  if (!o.detector.empty()) c.detectors = {detectors::architecture_from_string(o.detector)};
  return c;
}

void print_report(const json& report) { std::cout << harness::render_table(report); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"XSS detector evasion lab: corpus, detectors, RL agents, oracle"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_flag("--fast", o.fast, "3 seeds, 100k steps");
    sub->add_option("--out", o.out, "workspace directory");
    sub->add_option("--dataset", o.dataset, "payload CSV (default: synthetic corpus)");
    sub->add_option("--workers", o.workers, "parallel cells (0: hardware threads)");
  };
  auto cell_flags = [&](CLI::App* sub) {
    sub->add_option("--detector", o.detector, "mlp|cnn|lstm")->required();
    sub->add_option("--seed", o.seed, "agent seed")->required();
    sub->add_option("--mode", o.mode, "plain|oracle");
  };

  auto* prepare = app.add_subcommand("prepare", "ingest, prefilter, split, vocabulary, embeddings");
  common(prepare);
  auto* train_det = app.add_subcommand("train-detector", "train and evaluate detectors");
  common(train_det);
  train_det->add_option("--detector", o.detector, "mlp|cnn|lstm (default: all)");
  auto* train_agent = app.add_subcommand("train-agent", "train one agent");
  common(train_agent);
  cell_flags(train_agent);
  auto* attack = app.add_subcommand("attack", "evaluate a trained agent on the agent test split");
  common(attack);
  cell_flags(attack);
  auto* report = app.add_subcommand("report", "print the tables already in the workspace");
  common(report);
  std::vector<CLI::App*> rqs;
  for (const char* name : {"rq1", "rq2", "rq3", "rq4"}) {
    auto* sub = app.add_subcommand(name, std::string("run ") + name);
    common(sub);
    sub->add_option("--detector", o.detector, "restrict to one detector");
    rqs.push_back(sub);
  }

  std::string text, action_spec;
  auto* oracle_cmd = app.add_subcommand("oracle", "classify a payload with the DOM oracle");
  oracle_cmd->add_option("--text", text, "payload")->required();
  auto* pre_cmd = app.add_subcommand("preprocess", "print tokens, one per line");
  pre_cmd->add_option("--text", text, "payload")->required();
  auto* mutate_cmd = app.add_subcommand("mutate", "apply one action");
  mutate_cmd->add_option("--action", action_spec, "A1..A27")->required();
  mutate_cmd->add_option("--text", text, "payload")->required();
  auto* actions_cmd = app.add_subcommand("actions", "dump the action registry as JSON");
  std::string synth_out = "corpus.csv";
  std::uint64_t synth_seed = corpus::SynthConfig{}.seed;
  auto* synth_cmd = app.add_subcommand("synth-corpus", "write the synthetic payload CSV");
  synth_cmd->add_option("--out", synth_out, "output file");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "POST /classify {payload} -> {verdict, distance}");
  serve_cmd->add_option("--port", port, "listen port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (oracle_cmd->parsed()) {
      const auto v = oracle::classify(text);
      std::cout << json{{"verdict", oracle::to_string(v.label)}, {"distance", v.distance}}.dump() << "\n";
      return 0;
    }
    if (pre_cmd->parsed()) {
      for (const auto& t : preprocess::preprocess(text).tokens) std::cout << t << "\n";
      return 0;
    }
    if (mutate_cmd->parsed()) {
      std::cout << mutations::apply_action(text, mutations::parse_action_id(action_spec)).payload << "\n";
      return 0;
    }
    if (actions_cmd->parsed()) {
      std::cout << mutations::registry_json().dump(2) << "\n";
      return 0;
    }
    if (synth_cmd->parsed()) {
      corpus::SynthConfig sc;
      sc.seed = synth_seed;
      write_file(synth_out, corpus::synthesize_csv(sc));
      return 0;
    }
    if (serve_cmd->parsed()) {
      httplib::Server server;
      server.Post("/classify", [](const httplib::Request& req, httplib::Response& res) {
        std::string payload;
        try {
          payload = json::parse(req.body).at("payload").get<std::string>();
        } catch (const std::exception&) {
          res.status = 400;
          res.set_content(R"({"error":"expected {\"payload\": string}"})", "application/json");
          return;
        }
        const auto v = oracle::classify(payload);
        res.set_content(json{{"verdict", oracle::to_string(v.label)}, {"distance", v.distance}}.dump(), "application/json");
      });
      std::cerr << "listening on 127.0.0.1:" << port << "\n";
      return server.listen("127.0.0.1", port) ? 0 : 1;
    }

    harness::Workspace ws(load_config(o), o.out);
    if (prepare->parsed()) {
      ws.prepare();
      std::cout << ws.artifacts().data_summary.dump(2) << "\n";
    } else if (train_det->parsed()) {
      print_report(harness::detector_report(ws));
    } else if (train_agent->parsed() || attack->parsed()) {
      const auto arch = detectors::architecture_from_string(o.detector);
      const auto mode = rl::mode_from_string(o.mode);
      if (train_agent->parsed()) {
        harness::train_cell_agent(ws, mode, arch, o.seed);
        std::cout << ws.cell_dir(mode, arch, o.seed).string() << "\n";
      } else {
        std::cout << harness::attack_cell(ws, mode, arch, o.seed).to_json().dump(2) << "\n";
      }
    } else if (report->parsed()) {
      const fs::path dir = ws.root() / "reports";
      bool any = false;
      for (const char* name : {"detectors", "rq1", "rq2", "rq3", "rq4"}) {
        if (!fs::exists(dir / (std::string(name) + ".json"))) continue;
        print_report(read_json(dir / (std::string(name) + ".json")));
        std::cout << "\n";
        any = true;
      }
      if (!any) std::cerr << "no reports in " << dir.string() << "\n";
    } else {
      json (*runners[])(harness::Workspace&) = {harness::run_rq1, harness::run_rq2, harness::run_rq3, harness::run_rq4};
      for (std::size_t i = 0; i < rqs.size(); ++i) {
        if (rqs[i]->parsed()) print_report(runners[i](ws));
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
