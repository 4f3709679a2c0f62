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
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mortnas/common.hpp"
#include "mortnas/features.hpp"
#include "mortnas/metrics.hpp"

namespace mortnas {

/// Any fitted model, seen as a batch function from feature rows to outputs.
using Predictor = std::function<VectorXd(const MatrixXd&)>;

// ---------------------------------------------------------------------------
// Subgroups.

enum class Grouping { kDivision, kUrban };

struct SubgroupRow {
  std::string group;
  std::size_t n = 0;
  std::size_t deaths = 0;
  double rate_per_mille = 0.0;
  std::optional<double> auroc;  // absent when the group has a single class
  double brier = 0.0;
  double wealth_mean = 0.0;
};

struct SubgroupReport {
  Grouping grouping = Grouping::kDivision;
  std::vector<SubgroupRow> rows;
  std::optional<double> gradient_r;
};

/// Metrics of one national model's calibrated probabilities, sliced by group.
/// Groups are those present in `data`, in division (or rural/urban) order.
SubgroupReport subgroup_eval(const VecRef& probs, const FeatureTable& data, Grouping grouping);

/// pearson_r(group wealth means, group AUROCs) over groups with an AUROC.
/// DataError with fewer than 3 such groups or zero variance.
double equity_gradient(const SubgroupReport& report);

void write_subgroup_csv(std::ostream& out, const SubgroupReport& report);

// ---------------------------------------------------------------------------
// Design-aware bootstrap.

enum class BootstrapMetric { kAuroc, kWeightedAuroc, kBrier };
std::string_view bootstrap_metric_name(BootstrapMetric m);

struct SurveyDesign {
  std::vector<std::int64_t> psu_id;
  std::vector<std::int64_t> stratum_id;
  VectorXd weight;  // used by kWeightedAuroc only

  static SurveyDesign from(const FeatureTable& t);
};

struct BootstrapCI {
  BootstrapMetric metric = BootstrapMetric::kAuroc;
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int replicates = 1000;
  std::uint64_t seed = 0;
  int skipped = 0;          // single-class replicates
  bool degenerate = false;  // one PSU overall, so every replicate is identical
};

/// Resamples PSUs with replacement inside each stratum (same PSU count as
/// observed), recomputes the metric, and takes the 2.5/97.5 percentiles.
/// Replicate b draws from derive_seed(seed, {b}).
BootstrapCI design_bootstrap(const VecRef& scores, const VecRef& labels, const SurveyDesign& design,
                             BootstrapMetric metric, int replicates, std::uint64_t seed,
                             int threads = 0);

// ---------------------------------------------------------------------------
// Permutation importance.

/// Mean AUROC drop when the given columns are shuffled together (one row
/// permutation per repeat, shared across the block).
double permutation_importance(const Predictor& model, const MatrixXd& x, const VecRef& y,
                              const std::vector<int>& columns, int repeats, std::uint64_t seed);

struct ImportanceEntry {
  std::string name;
  double mean_drop = 0.0;
};

/// One entry per feature group, sorted by drop descending.
std::vector<ImportanceEntry> permutation_importance_groups(const Predictor& model,
                                                           const MatrixXd& x, const VecRef& y,
                                                           int repeats, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Kernel SHAP.

struct ShapExplanation {
  VectorXd attributions;
  double base_value = 0.0;    // mean output over the background
  double model_output = 0.0;  // f(instance)
  int coalitions = 0;         // distinct coalitions evaluated
  bool exhaustive = false;
};

/// Shapley-kernel weighted least squares with the efficiency constraint
/// sum(phi) = f(x) - base imposed exactly. All 2^d - 2 coalitions are used
/// when they fit in `budget`; otherwise coalition sizes are enumerated from
/// the outside in while they fit and the rest is filled with size-paired
/// samples.
ShapExplanation kernel_shap(const Predictor& model, const VecRef& instance,
                            const MatrixXd& background, int budget, std::uint64_t seed);

/// `n` distinct rows drawn without replacement (all rows when n >= rows).
MatrixXd sample_rows(const MatrixXd& x, int n, std::uint64_t seed);

struct ShapRankEntry {
  std::string name;
  double mean_abs = 0.0;
};

struct ShapRanking {
  std::vector<ShapRankEntry> per_feature;  // descending
  std::vector<ShapRankEntry> per_group;    // |sum over the group's levels|, descending
  std::vector<ShapExplanation> explanations;
};

/// Explanation i uses derive_seed(seed, {i}).
ShapRanking shap_ranking(const Predictor& model, const MatrixXd& instances,
                         const MatrixXd& background, int budget, std::uint64_t seed,
                         int threads = 0);

/// Long format: instance_id, feature, value, attribution.
void write_shap_csv(std::ostream& out, const MatrixXd& instances, const ShapRanking& ranking);

}  // namespace mortnas
