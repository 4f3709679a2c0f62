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

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>

#include "json.hpp"
#include "mortnas/audit.hpp"
#include "mortnas/dataset.hpp"
#include "mortnas/nas.hpp"
#include "mortnas/neural.hpp"

namespace mortnas {

struct BaselineOptions {
  bool logreg = true;
  bool gbdt = true;
  // Each baseline is tuned by its own genetic search.
  SearchConfig search{.population_size = 30, .generations = 15, .elite_count = 5};
};

struct AuditOptions {
  Grouping grouping = Grouping::kDivision;
  int bootstrap_replicates = 1000;
  int permutation_repeats = 10;
  int shap_budget = 512;
  int shap_background = 100;
  int shap_instances = 50;
};

enum class ReportFormat { kJson, kCsv, kMd };
/// ConfigError unless one of json, csv, md.
ReportFormat parse_report_format(std::string_view s);

/// Seeds of every stage derive from `seed`:
///   synthetic data   seed (unless synthetic.seed is set explicitly)
///   NAS search       derive_seed(seed, {2})
///   final MLP fit    derive_seed(seed, {3})
///   logreg search    derive_seed(seed, {4})
///   GBDT search      derive_seed(seed, {5}), final fit derive_seed(seed, {6})
///   bootstrap        derive_seed(seed, {7}), one stream per model index
///   permutation      derive_seed(seed, {8})
///   SHAP             derive_seed(seed, {9})
struct PipelineConfig {
  std::filesystem::path data;  // empty: generate synthetic records
  std::filesystem::path workspace = "mortnas_workspace";
  std::uint64_t seed = 7;
  int threads = 0;
  bool strict = true;
  bool complete_case = false;
  bool skip_nas = false;
  std::set<ReportFormat> formats = {ReportFormat::kJson, ReportFormat::kCsv, ReportFormat::kMd};

  SyntheticConfig synthetic = SyntheticConfig::table_defaults();
  bool synthetic_seed_explicit = false;
  SearchConfig search;
  TrainConfig train;
  BaselineOptions baselines;
  AuditOptions audit;

  void validate() const;
};

/// Reads a JSON document; absent keys keep their defaults. Unknown keys and
/// ill-typed values are ConfigError.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json pipeline_config_to_json(const PipelineConfig& c);

/// Fixed workspace layout.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path metrics() const { return root / "metrics"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path stale_marker() const { return root / "STALE"; }
  void create() const;
};

inline constexpr std::array<std::string_view, 11> kStages = {
    "generate", "split", "featurize", "search", "train-baselines", "calibrate",
    "evaluate", "audit", "explain", "report", "run"};

/// Runs one named stage (or "run" for all of them in order). A failing
/// stage writes STALE naming itself and rethrows with the stage prefixed.
void run_stage(std::string_view stage, const PipelineConfig& config);

// Individual stages, each reading its inputs from the workspace.
void cmd_generate(const PipelineConfig& c);
void cmd_split(const PipelineConfig& c);
void cmd_featurize(const PipelineConfig& c);
void cmd_search(const PipelineConfig& c);
void cmd_train_baselines(const PipelineConfig& c);
void cmd_calibrate(const PipelineConfig& c);
void cmd_evaluate(const PipelineConfig& c);
void cmd_audit(const PipelineConfig& c);
void cmd_explain(const PipelineConfig& c);
void cmd_report(const PipelineConfig& c);
void cmd_run(const PipelineConfig& c);

/// FNV-1a over the raw bytes of a featurized split, hex encoded. Recorded
/// per split so every model is shown to have seen identical inputs.
std::string table_checksum(const FeatureTable& t);

}  // namespace mortnas
