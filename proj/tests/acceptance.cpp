// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--out DIR] [--fresh]
//
// Fast profile (3 seeds, 100k steps) on the synthetic corpus unless
// XSSLAB_DATASET names a payload CSV; XSSLAB_PROFILE=full runs 10 seeds.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "checks.hpp"
#include "xsslab/harness.hpp"
#include "xsslab/oracle.hpp"

using namespace xsslab;
namespace fs = std::filesystem;
using detectors::Architecture;

namespace {

struct Line {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Line> lines;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  lines.push_back({id, name, pass, detail});
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << name << "\n      " << detail << std::endl;
}

std::string pct(double v) { return percent(v); }

double mean_of(const json& report, const std::string& arch, const std::string& metric, bool& present) {
  const auto& s = report.at("detectors").at(arch).at("summary").at(metric);
  present = !s.is_null();
  return present ? s.at("mean").get<double>() : 0.0;
}

void criterion1(harness::Workspace& ws) {
  // max(99.0%, published value - 0.7 pt) per metric.
  const std::map<std::string, double> floor = {
      {"precision", 0.990}, {"recall", 0.993}, {"accuracy", 0.9913}, {"f1", 0.9913}};
  bool pass = true;
  std::ostringstream d;
  for (auto a : ws.config().detectors) {
    const auto e = ws.artifacts().evals.at(a).to_json();
    d << detectors::to_string(a) << " P/R/A/F1 " << pct(e.at("precision")) << "/" << pct(e.at("recall")) << "/"
      << pct(e.at("accuracy")) << "/" << pct(e.at("f1")) << "; ";
    for (const auto& [k, v] : floor) pass = pass && e.at(k).get<double>() >= v;
  }
  report(1, "detector quality (P>=99.0, R>=99.3, A>=99.13, F1>=99.13)", pass, d.str());
}

void criterion2(const json& rq1) {
  bool pass = true;
  std::ostringstream d;
  for (const auto& [arch, block] : rq1.at("detectors").items()) {
    bool present = false;
    const double er = mean_of(rq1, arch, "er", present);
    pass = pass && present && er >= 0.90;
    d << arch << " ER " << (present ? pct(er) : "N/A") << "; ";
  }
  report(2, "RQ1 mean ER >= 90% per detector", pass, d.str());
}

void criterion3(const json& rq3, const json& summary) {
  bool pass = true;
  std::ostringstream d;
  for (const auto& [arch, block] : rq3.at("detectors").items()) {
    bool p1 = false, p2 = false;
    const double rr = mean_of(rq3, arch, "rr_v", p1), orv = mean_of(rq3, arch, "or_v", p2);
    pass = pass && p1 && p2 && rr >= 0.85 && orv >= 0.35;
    d << arch << " RR(V) " << (p1 ? pct(rr) : "N/A") << " OR(V) " << (p2 ? pct(orv) : "N/A") << "; ";
  }
  const double base = summary.at("baseline_oov_rate").get<double>();
  pass = pass && base >= 0.03 && base <= 0.10;
  d << "baseline OOV " << pct(base);
  report(3, "RQ3 RR(V) >= 85%, OR(V) >= 35%, baseline OOV in [3%, 10%]", pass, d.str());
}

void criterion4(const json& rq2) {
  bool pass = true, nonzero = false;
  std::ostringstream d;
  for (const auto& [arch, block] : rq2.at("detectors").items()) {
    bool present = false;
    const double rr = mean_of(rq2, arch, "rr_e", present);
    pass = pass && present && rr <= 0.15;
    for (const auto& cell : block.at("cells")) {
      if (!cell.at("rr_e").is_null() && cell.at("rr_e").get<double>() > 0.0) nonzero = true;
    }
    d << arch << " RR(E) " << (present ? pct(rr) : "N/A") << "; ";
  }
  d << (nonzero ? "nonzero in some cell" : "zero in every cell");
  report(4, "RQ2 mean RR(E) <= 15%, nonzero in at least one cell", pass && nonzero, d.str());
}

void criterion5(const json& rq4) {
  bool pass = true;
  std::ostringstream d;
  for (const auto& [arch, block] : rq4.at("detectors").items()) {
    bool pe = false, pr = false, po = false;
    const double er = mean_of(rq4, arch, "er", pe), rr = mean_of(rq4, arch, "rr_v", pr),
                 orv = mean_of(rq4, arch, "or_v", po);
    // With no escapes, RR(V) and OR(V) are undefined, and ER fails anyway.
    pass = pass && pe && er >= 0.90 && (!pr || rr <= 0.02) && (!po || orv <= 0.05);
    d << arch << " ER " << (pe ? pct(er) : "N/A") << " RR(V) " << (pr ? pct(rr) : "N/A") << " OR(V) "
      << (po ? pct(orv) : "N/A") << "; ";
  }
  report(5, "RQ4 mean ER >= 90%, RR(V) <= 2%, OR(V) <= 5%", pass, d.str());
}

void criterion6() {
  const auto suite = checks::read_lines(checks::fixture_dir() / "mutation_suite.txt");
  auto sample = checks::corpus_sample(1000);
  std::vector<std::pair<std::string, checks::Result>> parts;
  parts.emplace_back("token rule fixtures", checks::tokenizer_rule_fixtures());
  parts.emplace_back("token rules vs std::regex", checks::tokenizer_differential(3000, 42));
  parts.emplace_back("span round trip", checks::span_round_trip(sample));
  auto det_payloads = suite;
  det_payloads.insert(det_payloads.end(), sample.begin(), sample.begin() + 300);
  parts.emplace_back("mutation determinism", checks::mutation_determinism(det_payloads));
  parts.emplace_back("mutation preservation", checks::mutation_preservation(suite, 0.90));
  parts.emplace_back("mutation idempotence", checks::mutation_idempotence(det_payloads));
  parts.emplace_back("TED vs brute force", checks::ted_brute_force());
  parts.emplace_back("TED metric axioms", checks::ted_metric_axioms());
  parts.emplace_back("oracle fixture", checks::oracle_fixture(checks::fixture_dir() / "oracle_fixture.json"));
  parts.emplace_back("MLP gradients", checks::detector_gradient(Architecture::MLP, 1e-4));
  parts.emplace_back("CNN gradients", checks::detector_gradient(Architecture::CNN, 1e-4));
  parts.emplace_back("LSTM gradients", checks::detector_gradient(Architecture::LSTM, 1e-4));
  parts.emplace_back("surrogate gradient", checks::surrogate_gradient(3, 1e-4));
  parts.emplace_back("policy network gradient", checks::policy_network_gradient(1e-4));
  parts.emplace_back("PPO stub task", checks::ppo_stub_task(50'000, false));
  bool pass = true;
  std::ostringstream d;
  for (const auto& [name, r] : parts) {
    pass = pass && r.pass;
    d << "\n        " << (r.pass ? "ok   " : "FAIL ") << name << ": " << r.detail;
    if (!r.pass) {
      for (std::size_t i = 0; i < r.failures.size() && i < 3; ++i) d << "\n          " << r.failures[i];
    }
  }
  report(6, "property suites", pass, d.str());
}

void criterion7(harness::Workspace& ws, const json& rq1, const json& rq3, const fs::path& out) {
  // Post-processing reruns on the same workspace.
  const auto rq3_again = harness::run_rq3(ws);
  bool pass = rq3_again.dump() == rq3.dump();
  std::ostringstream d;
  d << "rq3 recomputed " << (pass ? "identical" : "DIFFERENT") << "; ";
  // A from-scratch rerun of one cell: prepare, train detector, train agent, attack.
  const auto arch = ws.config().detectors.front();
  const auto seed = ws.config().seeds.front();
  auto cfg = ws.config();
  cfg.detectors = {arch};
  cfg.seeds = {seed};
  const fs::path root = out / "rerun";
  fs::remove_all(root);
  harness::Workspace fresh(cfg, root);
  const auto cell = harness::run_cell(fresh, rl::Mode::Plain, arch, seed);
  const auto original = rq1.at("detectors").at(std::string(detectors::to_string(arch))).at("cells").at(0);
  const bool same_cell = cell.ok && cell.to_json().at("er") == original.at("er") &&
                         cell.to_json().at("escaped") == original.at("escaped");
  const bool same_detector = fresh.artifacts().evals.at(arch).to_json() == ws.artifacts().evals.at(arch).to_json();
  const bool same_data = fresh.artifacts().dataset_hash == ws.artifacts().dataset_hash &&
                         read_file(root / "data" / "summary.json") == read_file(ws.root() / "data" / "summary.json");
  d << "fresh rerun of " << detectors::to_string(arch) << " seed " << seed << ": data "
    << (same_data ? "identical" : "DIFFERENT") << ", detector " << (same_detector ? "identical" : "DIFFERENT")
    << ", ER " << (same_cell ? "identical" : "DIFFERENT");
  report(7, "determinism", pass && same_cell && same_detector && same_data, d.str());
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance-work";
  bool fresh = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else if (a == "--fresh") {
      fresh = true;
    } else {
      std::cerr << "usage: acceptance [--out DIR] [--fresh]\n";
      return 2;
    }
  }
  if (fresh) fs::remove_all(out);
  const auto t0 = std::chrono::steady_clock::now();

  const char* profile = std::getenv("XSSLAB_PROFILE");
  harness::ExperimentConfig cfg =
      profile && std::string(profile) == "full" ? harness::ExperimentConfig{} : harness::ExperimentConfig::fast();
  if (const char* dataset = std::getenv("XSSLAB_DATASET")) cfg.dataset.path = dataset;
  std::cout << "profile " << (profile ? profile : "fast") << ", " << cfg.seeds.size() << " seeds, " << cfg.budget
            << " steps, dataset " << (cfg.dataset.path.empty() ? "synthetic" : cfg.dataset.path) << ", config "
            << cfg.hash().substr(0, 12) << std::endl;

  criterion6();
  try {
    harness::Workspace ws(cfg, out / "main");
    ws.train_detectors();
    criterion1(ws);
    const auto rq1 = harness::run_rq1(ws);
    const auto rq2 = harness::run_rq2(ws);
    const auto rq3 = harness::run_rq3(ws);
    criterion2(rq1);
    criterion3(rq3, ws.artifacts().data_summary);
    criterion4(rq2);
    const auto rq4 = harness::run_rq4(ws);
    criterion5(rq4);
    criterion7(ws, rq1, rq3, out);
    for (const auto* r : {&rq1, &rq2, &rq3, &rq4}) std::cout << "\n" << harness::render_table(*r);
  } catch (const std::exception& e) {
    std::cout << "FAIL  pipeline aborted: " << e.what() << std::endl;
    return 1;
  }

  std::size_t failed = 0;
  json summary = json::array();
  for (const auto& l : lines) {
    failed += l.pass ? 0 : 1;
    summary.push_back({{"criterion", l.id}, {"name", l.name}, {"pass", l.pass}, {"detail", l.detail}});
  }
  write_json(out / "acceptance.json", summary);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "\n" << lines.size() - failed << "/" << lines.size() << " criteria passed in " << secs << " s" << std::endl;
  return failed == 0 ? 0 : 1;
}
