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

#include "mortnas/common.hpp"
#include "mortnas/metrics.hpp"

namespace mortnas {

/// p = sigmoid(slope * score + intercept), score being a log-odds.
struct PlattCalibrator {
  double slope = 1.0;
  double intercept = 0.0;
  // Set when the likelihood was unbounded and smoothed targets were used.
  bool smoothed_targets = false;
  int iterations = 0;

  double apply(double score) const;
  VectorXd apply(const VecRef& scores) const;

  friend bool operator==(const PlattCalibrator&, const PlattCalibrator&) = default;
};

/// Maximum-likelihood fit by Newton's method to a step tolerance of 1e-8.
/// Perfectly separable inputs fall back to Platt's smoothed targets
/// (N+ + 1)/(N+ + 2) and 1/(N- + 2), with a warning.
PlattCalibrator fit_platt(const VecRef& scores, const VecRef& labels);

inline double apply_platt(const PlattCalibrator& c, double score) { return c.apply(score); }

/// log(p / (1 - p)) with p clamped away from 0 and 1.
double logit(double p);
VectorXd logit(const VecRef& p);

}  // namespace mortnas
