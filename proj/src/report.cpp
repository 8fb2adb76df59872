#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "xsslab/harness.hpp"
#include "xsslab/oracle.hpp"

namespace xsslab::harness {
namespace {

const std::map<std::string, std::string> kTitles = {
    {"rq1", "Escape and detection rate of the trained agent, plain reward"},
    {"rq2", "Ruin rate of escaped payloads, raw text"},
    {"rq3", "Ruin rate and OOV rate of escaped payloads, detector view"},
    {"rq4", "Agent trained with the oracle in the loop"},
};

const std::map<std::string, std::string> kHeaders = {
    {"er", "ER"}, {"dr", "DR"}, {"rr_e", "RR(E)"}, {"rr_v", "RR(V)"}, {"or_v", "OR(V)"}};

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string cell_text(const json& summary) {
  if (summary.is_null()) return "N/A";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << summary.at("mean").get<double>() * 100.0 << "% +- "
      << summary.at("std").get<double>() * 100.0;
  return out.str();
}

}  // namespace

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.values = values;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

double metric_value(const CellResult& cell, const std::string& metric, bool& present) {
  present = cell.ok;
  if (!cell.ok) return 0.0;
  if (metric == "er") return cell.er;
  if (metric == "dr") return cell.dr;
  const std::optional<double>* v = nullptr;
  if (metric == "rr_e") v = &cell.rr_e;
  else if (metric == "rr_v") v = &cell.rr_v;
  else if (metric == "or_v") v = &cell.or_v;
  else throw ConfigError("unknown metric '" + metric + "'");
  present = v->has_value();
  return v->value_or(0.0);
}

json make_report(const Workspace& ws, const std::string& name, const std::vector<CellResult>& cells,
                 const std::vector<std::string>& metrics) {
  json per_detector = json::object();
  std::size_t failed = 0;
  for (auto arch : ws.config().detectors) {
    json rows = json::array();
    std::map<std::string, std::vector<double>> columns;
    for (const auto& c : cells) {
      if (c.arch != arch) continue;
      json row = {{"seed", c.seed}, {"ok", c.ok}};
      if (!c.ok) {
        row["error"] = c.error;
        ++failed;
      }
      for (const auto& m : metrics) {
        bool present = false;
        const double v = metric_value(c, m, present);
        row[m] = present ? json(v) : json(nullptr);
        if (present) columns[m].push_back(v);
      }
      if (c.ok) {
        row["escaped"] = c.escaped;
        row["total"] = c.total;
      }
      rows.push_back(row);
    }
    json summary = json::object();
    for (const auto& m : metrics) {
      const auto s = summarize(columns[m]);
      summary[m] = s.available() ? json{{"mean", s.mean}, {"std", s.stddev}, {"n", s.values.size()}} : json(nullptr);
    }
    per_detector[std::string(detectors::to_string(arch))] = {{"cells", rows}, {"summary", summary}};
  }
  const auto title = kTitles.find(name);
  return {{"name", name},
          {"title", title == kTitles.end() ? name : title->second},
          {"metrics", metrics},
          {"seeds", ws.config().seeds},
          {"failed_cells", failed},
          {"detectors", per_detector},
          {"manifest",
           {{"config_sha256", ws.config().hash()},
            {"dataset_sha256", ws.artifacts().dataset_hash},
            {"template_sha256", oracle::template_sha256()}}}};
}

std::string render_table(const json& report) {
  std::ostringstream out;
  const std::string name = report.at("name");
  out << name << ": " << report.value("title", name) << "\n";
  if (name == "detectors") {
    out << pad("Detector", 10) << pad("Precision", 12) << pad("Recall", 12) << pad("Accuracy", 12) << "F1\n";
    for (const auto& [arch, row] : report.at("detectors").items()) {
      out << pad(arch, 10) << pad(percent(row.at("precision")), 12) << pad(percent(row.at("recall")), 12)
          << pad(percent(row.at("accuracy")), 12) << percent(row.at("f1")) << "\n";
    }
    return out.str();
  }
  const auto metrics = report.at("metrics").get<std::vector<std::string>>();
  constexpr std::size_t kWidth = 20;
  out << pad("Detector", 10);
  for (const auto& m : metrics) out << pad(kHeaders.count(m) ? kHeaders.at(m) : m, kWidth);
  out << "\n";
  for (const auto& [arch, block] : report.at("detectors").items()) {
    std::string upper = arch;
    std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
    out << pad(upper, 10);
    for (const auto& m : metrics) out << pad(cell_text(block.at("summary").at(m)), kWidth);
    out << "\n";
  }
  out << "mean +- sample std over " << report.at("seeds").size() << " seeds";
  if (report.value("failed_cells", 0) > 0) out << "; " << report.at("failed_cells").get<std::size_t>() << " failed cells";
  out << "\n";
  if (report.contains("baseline")) {
    const auto& b = report.at("baseline");
    out << "unmutated agent test payloads: OOV " << percent(b.at("oov_rate")) << ", RR " << percent(b.at("ruin_rate"))
        << ", RR after preprocessing " << percent(b.at("ruin_rate_preprocessed")) << "\n";
  }
  return out.str();
}

void write_report(const Workspace& ws, const json& report) {
  const fs::path dir = ws.root() / "reports";
  const std::string name = report.at("name");
  write_json(dir / (name + ".json"), report);
  write_file(dir / (name + ".txt"), render_table(report));
}

}  // namespace xsslab::harness
