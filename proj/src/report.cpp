// Copyright 2026 The mortnas Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <sstream>

#include "mortnas/pipeline.hpp"
#include "mortnas/text.hpp"
#include "pipeline_io.hpp"

namespace mortnas {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pipeline_io;

namespace {

constexpr const char* kMissing = "—";

std::string fixed(const json& v, int digits = 3) {
  if (!v.is_number()) return kMissing;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v.get<double>());
  return buf;
}

std::optional<json> read_optional(const fs::path& p, std::string_view what) {
  if (!fs::exists(p)) {
    warn("report: " + std::string(what) + " not found (" + p.string() + "); cells rendered as " +
         kMissing);
    return std::nullopt;
  }
  return read_json(p);
}

// Compact summary assembled from the workspace; every table is rendered from it.
json collect(const Workspace& ws) {
  const json metrics = read_json(ws.metrics() / "metrics.json");
  const auto boot = read_optional(ws.metrics() / "bootstrap.json", "bootstrap intervals");
  const auto cal = read_optional(ws.metrics() / "calibration.json", "calibration summary");
  const auto audit = read_optional(ws.metrics() / "audit.json", "subgroup audit");
  const auto shap = read_optional(ws.metrics() / "shap_ranking.json", "SHAP ranking");

  json s;
  s["splits"] = metrics.at("splits");
  s["models"] = json::array();
  for (const auto& m : metrics.at("models")) {
    const std::string key = m.at("model");
    json row = {{"model", key},
                {"label", m.at("label")},
                {"auroc", m.at("auroc")},
                {"ci_lower", nullptr},
                {"ci_upper", nullptr},
                {"brier_calibrated", m.at("brier_calibrated")},
                {"sensitivity_top10", m.at("sensitivity_top10")},
                {"f1", m.at("f1")}};
    if (boot && boot->contains(key)) {
      row["ci_lower"] = (*boot)[key]["auroc"]["lower"];
      row["ci_upper"] = (*boot)[key]["auroc"]["upper"];
    }
    if (m.contains("architecture")) row["architecture"] = m["architecture"];
    s["models"].push_back(std::move(row));
  }
  s["delong"] = metrics.at("delong");
  s["calibration"] = cal ? *cal : json::array();
  s["subgroups"] = audit ? (*audit)["subgroups"] : json::array();
  s["grouping"] = audit ? (*audit)["grouping"] : json("division");
  s["gradient_r"] = audit ? (*audit)["gradient_r"] : json(nullptr);
  s["shap"] = shap ? (*shap)["per_group"] : json::array();
  return s;
}

std::string render_md(const json& s) {
  std::ostringstream md;
  md << "# Under-five mortality prediction summary\n\n";
  const auto& sp = s["splits"];
  md << "Temporal splits: train n=" << sp["train"]["n"] << " (deaths " << sp["train"]["deaths"]
     << "), validation n=" << sp["validation"]["n"] << " (deaths " << sp["validation"]["deaths"]
     << "), test n=" << sp["test"]["n"] << " (deaths " << sp["test"]["deaths"] << ").\n\n";

  md << "## Model comparison (test split)\n\n";
  md << "| Model | AUROC | 95% CI | Brier (calibrated) | Sensitivity @ top 10% | F1 |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const auto& m : s["models"]) {
    const std::string ci = m["ci_lower"].is_number()
                               ? fixed(m["ci_lower"]) + " to " + fixed(m["ci_upper"])
                               : kMissing;
    md << "| " << m["label"].get<std::string>() << " | " << fixed(m["auroc"]) << " | " << ci
       << " | " << fixed(m["brier_calibrated"]) << " | " << fixed(m["sensitivity_top10"]) << " | "
       << fixed(m["f1"]) << " |\n";
  }
  for (const auto& m : s["models"])
    if (m.contains("architecture"))
      md << "\nSelected architecture: `" << m["architecture"].get<std::string>() << "`\n";
  if (!s["delong"].empty()) {
    md << "\nDeLong tests against the first model:\n\n| Comparator | z | p |\n|---|---|---|\n";
    for (const auto& d : s["delong"])
      md << "| " << d["comparator"].get<std::string>() << " | " << fixed(d["z"]) << " | "
         << fixed(d["p"], 4) << " |\n";
  }

  md << "\n## Regional performance (test split)\n\n";
  const bool by_division = s["grouping"] == "division";
  md << "| " << (by_division ? "Division" : "Residence")
     << " | N | Deaths | Rate (per 1000) | AUROC | Brier | Wealth score |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : s["subgroups"])
    md << "| " << r["group"].get<std::string>() << " | " << r["n"] << " | " << r["deaths"]
       << " | " << fixed(r["rate_per_1000"], 1) << " | " << fixed(r["auroc"]) << " | "
       << fixed(r["brier"], 4) << " | " << fixed(r["wealth_mean"], 0) << " |\n";
  md << "\nEquity gradient (Pearson r, wealth vs AUROC): " << fixed(s["gradient_r"], 2) << "\n";

  md << "\n## Calibration (Platt scaling fitted on validation)\n\n";
  md << "| Model | Brier before | Brier after | Slope | Intercept |\n|---|---|---|---|---|\n";
  for (const auto& c : s["calibration"])
    md << "| " << c["model"].get<std::string>() << " | " << fixed(c["test_brier_before"], 4)
       << " | " << fixed(c["test_brier_after"], 4) << " | " << fixed(c["slope"]) << " | "
       << fixed(c["intercept"]) << " |\n";

  md << "\n## Top predictors by mean |SHAP|\n\n| Rank | Feature group | Mean abs SHAP |\n|---|---|---|\n";
  int rank = 0;
  for (const auto& e : s["shap"]) {
    if (++rank > 10) break;
    md << "| " << rank << " | " << e["name"].get<std::string>() << " | "
       << fixed(e["mean_abs_shap"], 4) << " |\n";
  }
  return md.str();
}

std::string csv_cell(const json& v) { return v.is_number() ? format_real(v.get<double>()) : ""; }

}  // namespace

void cmd_report(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  ws.create();
  const json s = collect(ws);
  if (c.formats.count(ReportFormat::kMd)) write_text(ws.reports() / "summary.md", render_md(s));
  if (c.formats.count(ReportFormat::kJson)) write_json(ws.reports() / "summary.json", s);
  if (c.formats.count(ReportFormat::kCsv)) {
    std::ostringstream models;
    models << "model,auroc,ci_lower,ci_upper,brier_calibrated,sensitivity_top10,f1\n";
    for (const auto& m : s["models"])
      models << m["model"].get<std::string>() << ',' << csv_cell(m["auroc"]) << ','
             << csv_cell(m["ci_lower"]) << ',' << csv_cell(m["ci_upper"]) << ','
             << csv_cell(m["brier_calibrated"]) << ',' << csv_cell(m["sensitivity_top10"]) << ','
             << csv_cell(m["f1"]) << '\n';
    write_text(ws.reports() / "model_comparison.csv", models.str());
    std::ostringstream regional;
    regional << "group,n,deaths,rate_per_1000,auroc,brier,wealth_mean\n";
    for (const auto& r : s["subgroups"])
      regional << r["group"].get<std::string>() << ',' << r["n"] << ',' << r["deaths"] << ','
               << csv_cell(r["rate_per_1000"]) << ',' << csv_cell(r["auroc"]) << ','
               << csv_cell(r["brier"]) << ',' << csv_cell(r["wealth_mean"]) << '\n';
    write_text(ws.reports() / "regional.csv", regional.str());
  }
}

}  // namespace mortnas
