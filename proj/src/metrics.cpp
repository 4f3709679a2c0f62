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

#include "mortnas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mortnas {
namespace {

void require_same_length(const VecRef& a, const VecRef& b) {
  if (a.size() != b.size()) throw std::invalid_argument("length mismatch between inputs");
}

std::pair<Eigen::Index, Eigen::Index> class_counts(const VecRef& labels) {
  Eigen::Index pos = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) pos += labels(i) > 0.5;
  return {pos, labels.size() - pos};
}

void require_both_classes(const VecRef& labels) {
  auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw DataError("single-class input: both outcomes are required");
}

std::vector<Eigen::Index> argsort(const VecRef& v) {
  std::vector<Eigen::Index> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v(a) < v(b); });
  return idx;
}

// 1-based mid-ranks of v.
VectorXd midranks(const VecRef& v) {
  const auto idx = argsort(v);
  VectorXd r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v(idx[j + 1]) == v(idx[i])) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r(idx[k]) = rank;
    i = j + 1;
  }
  return r;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double auroc(const VecRef& scores, const VecRef& labels) {
  require_same_length(scores, labels);
  require_both_classes(labels);
  const VectorXd ranks = midranks(scores);
  auto [pos, neg] = class_counts(labels);
  double rank_sum = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (labels(i) > 0.5) rank_sum += ranks(i);
  const double np = static_cast<double>(pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(neg));
}

double weighted_auroc(const VecRef& scores, const VecRef& labels, const VecRef& weights) {
  require_same_length(scores, labels);
  require_same_length(scores, weights);
  require_both_classes(labels);
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (!(weights(i) > 0.0)) throw DataError("weighted_auroc: weights must be strictly positive");
  // Normalizing by the first weight makes equal weights exactly 1.
  const double scale = weights(0);
  const auto idx = argsort(scores);
  double neg_below = 0.0, pos_total = 0.0, neg_total = 0.0, numerator = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    double pos_w = 0.0, neg_w = 0.0;
    std::size_t j = i;
    for (; j < idx.size() && scores(idx[j]) == scores(idx[i]); ++j) {
      const double w = weights(idx[j]) / scale;
      (labels(idx[j]) > 0.5 ? pos_w : neg_w) += w;
    }
    numerator += pos_w * (neg_below + 0.5 * neg_w);
    neg_below += neg_w;
    pos_total += pos_w;
    neg_total += neg_w;
    i = j;
  }
  return numerator / (pos_total * neg_total);
}

double brier(const VecRef& probs, const VecRef& labels) {
  require_same_length(probs, labels);
  if (probs.size() == 0) throw DataError("brier: empty input");
  return (probs - labels).squaredNorm() / static_cast<double>(probs.size());
}

double sensitivity_at_fraction(const VecRef& scores, const VecRef& labels, double fraction,
                               TieBreak tie_break, std::uint64_t seed) {
  require_same_length(scores, labels);
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("sensitivity_at_fraction: fraction must be in (0, 1]");
  auto [pos, neg] = class_counts(labels);
  (void)neg;
  if (pos == 0) throw DataError("sensitivity_at_fraction: no positive cases");
  const auto n = scores.size();
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (tie_break == TieBreak::kRandom) {
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores(a) > scores(b); });
  const auto k = std::min<Eigen::Index>(
      n, static_cast<Eigen::Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < k; ++i) hits += labels(idx[i]) > 0.5;
  return static_cast<double>(hits) / static_cast<double>(pos);
}

DeLongResult delong_test(const VecRef& scores_a, const VecRef& scores_b, const VecRef& labels) {
  require_same_length(scores_a, labels);
  require_same_length(scores_b, labels);
  require_both_classes(labels);
  auto [m, n] = class_counts(labels);
  std::vector<Eigen::Index> pos_idx, neg_idx;
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    (labels(i) > 0.5 ? pos_idx : neg_idx).push_back(i);

  // Placement values: v10 per positive, v01 per negative, one column per model.
  MatrixXd v10(m, 2), v01(n, 2);
  Eigen::Vector2d auc;
  for (int k = 0; k < 2; ++k) {
    const VecRef& s = k == 0 ? scores_a : scores_b;
    VectorXd sp(m), sn(n);
    for (Eigen::Index i = 0; i < m; ++i) sp(i) = s(pos_idx[i]);
    for (Eigen::Index j = 0; j < n; ++j) sn(j) = s(neg_idx[j]);
    VectorXd all(m + n);
    all << sp, sn;
    const VectorXd r_all = midranks(all);
    const VectorXd r_pos = midranks(sp);
    const VectorXd r_neg = midranks(sn);
    for (Eigen::Index i = 0; i < m; ++i)
      v10(i, k) = (r_all(i) - r_pos(i)) / static_cast<double>(n);
    for (Eigen::Index j = 0; j < n; ++j)
      v01(j, k) = 1.0 - (r_all(m + j) - r_neg(j)) / static_cast<double>(m);
    auc(k) = v10.col(k).mean();
  }

  auto covariance = [](const MatrixXd& v) {
    const MatrixXd centred = v.rowwise() - v.colwise().mean();
    const double denom = v.rows() > 1 ? static_cast<double>(v.rows() - 1) : 1.0;
    return Eigen::Matrix2d((centred.transpose() * centred) / denom);
  };
  const Eigen::Matrix2d s =
      covariance(v10) / static_cast<double>(m) + covariance(v01) / static_cast<double>(n);
  const Eigen::Vector2d contrast(1.0, -1.0);
  const double var = contrast.dot(s * contrast);

  DeLongResult r;
  r.auc_a = auc(0);
  r.auc_b = auc(1);
  r.variance = var;
  const double diff = auc(0) - auc(1);
  if (!(var > 1e-300)) {
    r.zero_variance = true;
    r.z = 0.0;
    r.p = 1.0;
    return r;
  }
  r.z = diff / std::sqrt(var);
  r.p = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

double pearson_r(const VecRef& x, const VecRef& y) {
  require_same_length(x, y);
  if (x.size() < 2) throw DataError("pearson_r: need at least two points");
  // Constant input can leave rounding residue after centring, so test the range.
  if (x.maxCoeff() == x.minCoeff() || y.maxCoeff() == y.minCoeff())
    throw DataError("pearson_r: zero variance");
  const VectorXd xc = x.array() - x.mean();
  const VectorXd yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm(), syy = yc.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DataError("pearson_r: zero variance");
  return std::clamp(xc.dot(yc) / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<ReliabilityBin> reliability_bins(const VecRef& probs, const VecRef& labels,
                                             int n_bins) {
  require_same_length(probs, labels);
  if (n_bins < 2) throw std::invalid_argument("reliability_bins: n_bins must be >= 2");
  std::vector<ReliabilityBin> bins(n_bins);
  std::vector<double> sum_p(n_bins, 0.0), sum_y(n_bins, 0.0);
  for (int b = 0; b < n_bins; ++b) {
    bins[b].lower = static_cast<double>(b) / n_bins;
    bins[b].upper = static_cast<double>(b + 1) / n_bins;
  }
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const int b = std::clamp(static_cast<int>(std::floor(probs(i) * n_bins)), 0, n_bins - 1);
    sum_p[b] += probs(i);
    sum_y[b] += labels(i);
    ++bins[b].count;
  }
  for (int b = 0; b < n_bins; ++b) {
    if (bins[b].count == 0) continue;
    bins[b].mean_predicted = sum_p[b] / static_cast<double>(bins[b].count);
    bins[b].observed_rate = sum_y[b] / static_cast<double>(bins[b].count);
  }
  return bins;
}

double max_calibration_gap(const std::vector<ReliabilityBin>& bins, std::size_t min_count) {
  double gap = 0.0;
  for (const auto& b : bins)
    if (b.count > 0 && b.count >= min_count) gap = std::max(gap, std::abs(b.mean_predicted - b.observed_rate));
  return gap;
}

double f1_at_threshold(const VecRef& scores, const VecRef& labels, double threshold) {
  require_same_length(scores, labels);
  double tp = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const bool predicted = scores(i) >= threshold;
    const bool actual = labels(i) > 0.5;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
  }
  const double denom = 2 * tp + fp + fn;
  return denom > 0 ? 2 * tp / denom : 0.0;
}

ThresholdResult f1_optimal_threshold(const VecRef& scores, const VecRef& labels) {
  require_same_length(scores, labels);
  require_both_classes(labels);
  // Sweep thresholds from high to low so each step adds one tied block of
  // rows to the predicted-positive set.
  const auto idx = argsort(scores);
  std::vector<double> distinct;
  for (auto i : idx)
    if (distinct.empty() || scores(i) != distinct.back()) distinct.push_back(scores(i));

  auto [pos, neg] = class_counts(labels);
  (void)neg;
  // Per distinct value: positives and negatives with that score.
  std::vector<double> p_at(distinct.size(), 0.0), n_at(distinct.size(), 0.0);
  {
    std::size_t d = 0;
    for (auto i : idx) {
      while (scores(i) != distinct[d]) ++d;
      (labels(i) > 0.5 ? p_at[d] : n_at[d]) += 1.0;
    }
  }
  // Candidate k predicts positive for distinct[k..]: threshold is the
  // midpoint below distinct[k] (or distinct[0] itself for k = 0).
  ThresholdResult best{distinct.front(), -1.0};
  double tp = 0, fp = 0;
  std::vector<double> f1(distinct.size());
  for (std::size_t k = distinct.size(); k-- > 0;) {
    tp += p_at[k];
    fp += n_at[k];
    const double fn = static_cast<double>(pos) - tp;
    f1[k] = 2 * tp / (2 * tp + fp + fn);
  }
  for (std::size_t k = 0; k < distinct.size(); ++k) {
    if (f1[k] > best.f1) {
      best.f1 = f1[k];
      best.threshold = k == 0 ? distinct[0] : 0.5 * (distinct[k - 1] + distinct[k]);
    }
  }
  return best;
}

}  // namespace mortnas
