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
#include <vector>

#include "mortnas/common.hpp"

// Evaluation statistics. Scores and labels are dense vectors; labels are 0/1
// stored as doubles so a FeatureTable's `y` can be passed directly. Any
// Eigen expression binds to the Ref parameters.
namespace mortnas {

using VecRef = Eigen::Ref<const VectorXd>;

/// Probability that a random positive outranks a random negative, ties ½.
/// Rank (Mann-Whitney) formulation with mid-ranks. Throws DataError if a
/// class is absent.
double auroc(const VecRef& scores, const VecRef& labels);

/// Pairwise AUROC with each (positive, negative) pair weighted w_i * w_j.
double weighted_auroc(const VecRef& scores, const VecRef& labels, const VecRef& weights);

double brier(const VecRef& probs, const VecRef& labels);

enum class TieBreak { kStableInputOrder, kRandom };

/// Recall among positives when the ceil(fraction * n) highest scores are
/// flagged. Ties at the cut go to earlier rows, or to a seeded shuffle.
double sensitivity_at_fraction(const VecRef& scores, const VecRef& labels, double fraction,
                               TieBreak tie_break = TieBreak::kStableInputOrder,
                               std::uint64_t seed = 0);

struct DeLongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double z = 0.0;
  double p = 1.0;
  double variance = 0.0;     // variance of auc_a - auc_b
  bool zero_variance = false;
};

/// Paired DeLong test for two score vectors over the same labelled cases,
/// computed from per-positive and per-negative placement values.
DeLongResult delong_test(const VecRef& scores_a, const VecRef& scores_b, const VecRef& labels);

/// Product-moment correlation. Throws DataError on zero variance.
double pearson_r(const VecRef& x, const VecRef& y);

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_predicted = 0.0;  // 0 when empty
  double observed_rate = 0.0;   // 0 when empty
  std::size_t count = 0;
};

/// Equal-width bins on [0, 1]; the last bin is closed on the right.
std::vector<ReliabilityBin> reliability_bins(const VecRef& probs, const VecRef& labels,
                                             int n_bins);
/// Largest |mean predicted - observed| over bins holding at least
/// `min_count` rows. Near-empty bins are dominated by sampling noise.
double max_calibration_gap(const std::vector<ReliabilityBin>& bins, std::size_t min_count = 1);

struct ThresholdResult {
  double threshold = 0.0;
  double f1 = 0.0;
};

/// F1 when rows with score >= threshold are predicted positive.
double f1_at_threshold(const VecRef& scores, const VecRef& labels, double threshold);

/// Scans the minimum score (everything positive) and every midpoint between
/// consecutive distinct scores; ties resolve to the lowest threshold.
ThresholdResult f1_optimal_threshold(const VecRef& scores, const VecRef& labels);

/// Standard normal CDF.
double normal_cdf(double z);

}  // namespace mortnas
