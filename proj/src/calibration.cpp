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

#include "mortnas/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace mortnas {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Negative log-likelihood against soft targets t in [0, 1].
double nll(const VecRef& s, const VectorXd& t, double a, double b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double z = a * s(i) + b;
    // log(1 + e^z) - t z, stable on both sides
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    total += softplus - t(i) * z;
  }
  return total;
}

constexpr int kMaxIterations = 200;
constexpr double kParameterBound = 1e4;

std::optional<PlattCalibrator> newton(const VecRef& s, const VectorXd& t) {
  double a = 1.0, b = 0.0;
  double f = nll(s, t, a, b);
  for (int it = 1; it <= kMaxIterations; ++it) {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double p = sigmoid(a * s(i) + b);
      const double r = p - t(i);
      const double w = std::max(p * (1.0 - p), 1e-12);
      g += r * Eigen::Vector2d(s(i), 1.0);
      h(0, 0) += w * s(i) * s(i);
      h(0, 1) += w * s(i);
      h(1, 1) += w;
    }
    h(1, 0) = h(0, 1);
    h.diagonal().array() += 1e-12;
    const Eigen::Vector2d step = h.ldlt().solve(g);
    // Backtracking keeps each accepted step a descent step.
    double scale = 1.0;
    double a_new = a, b_new = b, f_new = f;
    for (int k = 0; k < 40; ++k) {
      a_new = a - scale * step(0);
      b_new = b - scale * step(1);
      f_new = nll(s, t, a_new, b_new);
      if (f_new <= f + 1e-12 * std::abs(f)) break;
      scale *= 0.5;
    }
    const double moved = scale * step.norm();
    a = a_new;
    b = b_new;
    f = f_new;
    if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a) > kParameterBound ||
        std::abs(b) > kParameterBound)
      return std::nullopt;
    if (moved < 1e-8 * (1.0 + std::abs(a) + std::abs(b))) {
      PlattCalibrator c;
      c.slope = a;
      c.intercept = b;
      c.iterations = it;
      return c;
    }
  }
  return std::nullopt;
}

}  // namespace

double PlattCalibrator::apply(double score) const { return sigmoid(slope * score + intercept); }

VectorXd PlattCalibrator::apply(const VecRef& scores) const {
  return scores.unaryExpr([this](double s) { return apply(s); });
}

double logit(double p) {
  const double q = std::clamp(p, 1e-15, 1.0 - 1e-15);
  return std::log(q) - std::log1p(-q);
}

VectorXd logit(const VecRef& p) {
  return p.unaryExpr([](double v) { return logit(v); });
}

PlattCalibrator fit_platt(const VecRef& scores, const VecRef& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("fit_platt: length mismatch");
  double n_pos = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) n_pos += labels(i) > 0.5;
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0)
    throw DataError("fit_platt: single-class input; both outcomes are required");

  VectorXd targets = (labels.array() > 0.5).cast<double>();
  auto fitted = newton(scores, targets);
  if (!fitted) {
    warn("fit_platt: likelihood unbounded (separable scores); using smoothed targets");
    const double hi = (n_pos + 1.0) / (n_pos + 2.0);
    const double lo = 1.0 / (n_neg + 2.0);
    targets = (labels.array() > 0.5).select(VectorXd::Constant(labels.size(), hi),
                                             VectorXd::Constant(labels.size(), lo));
    fitted = newton(scores, targets);
    if (!fitted) throw RuntimeFailure("fit_platt: Newton iterations did not converge");
    fitted->smoothed_targets = true;
  }
  if (fitted->slope <= 0.0)
    warn("fit_platt: non-positive slope; calibrated scores reverse the ranking");
  return *fitted;
}

}  // namespace mortnas
