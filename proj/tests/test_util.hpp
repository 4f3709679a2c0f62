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

// Independent reference implementations used as test oracles, plus small
// fixtures. Nothing here is shared with the library code paths under test.

#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#include "mortnas/common.hpp"

namespace mortnas::testing {

/// O(n^2) pairwise AUROC: P(s+ > s-) + 0.5 P(s+ == s-).
inline double pairwise_auroc(const VectorXd& s, const VectorXd& y) {
  double wins = 0.0, pairs = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (y(i) < 0.5) continue;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (y(j) > 0.5) continue;
      pairs += 1.0;
      wins += s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

/// O(n^2) weighted pairwise AUROC with pair weight w_i * w_j.
inline double pairwise_weighted_auroc(const VectorXd& s, const VectorXd& y, const VectorXd& w) {
  double wins = 0.0, pairs = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (y(i) < 0.5) continue;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (y(j) > 0.5) continue;
      const double pw = w(i) * w(j);
      pairs += pw;
      wins += pw * (s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0));
    }
  }
  return wins / pairs;
}

/// Shapley values by enumerating all 2^d coalitions, with the value of a
/// coalition being the mean model output over background rows whose
/// coalition columns are replaced by the instance's.
inline VectorXd exact_shapley(const std::function<VectorXd(const MatrixXd&)>& f,
                              const VectorXd& x, const MatrixXd& background) {
  const int d = static_cast<int>(x.size());
  const std::size_t total = std::size_t{1} << d;
  std::vector<double> v(total);
  for (std::size_t mask = 0; mask < total; ++mask) {
    MatrixXd b = background;
    for (int j = 0; j < d; ++j)
      if (mask >> j & 1U) b.col(j).setConstant(x(j));
    v[mask] = f(b).mean();
  }
  std::vector<double> fact(static_cast<std::size_t>(d) + 1, 1.0);
  for (int k = 1; k <= d; ++k) fact[static_cast<std::size_t>(k)] = fact[static_cast<std::size_t>(k - 1)] * k;
  VectorXd phi = VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    for (std::size_t mask = 0; mask < total; ++mask) {
      if (mask >> i & 1U) continue;
      const int s = __builtin_popcountll(mask);
      const double w = fact[static_cast<std::size_t>(s)] *
                       fact[static_cast<std::size_t>(d - s - 1)] / fact[static_cast<std::size_t>(d)];
      phi(i) += w * (v[mask | (std::size_t{1} << i)] - v[mask]);
    }
  }
  return phi;
}

/// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_sink(nullptr); }
  bool contains(std::string_view needle) const {
    for (const auto& m : messages)
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }
  std::vector<std::string> messages;
};

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("mortnas_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path path;
};

/// Labels drawn from a logistic model on the given score, at least one of each class.
inline VectorXd logistic_labels(const VectorXd& logit, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd y(logit.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = u(rng) < 1.0 / (1.0 + std::exp(-logit(i))) ? 1.0 : 0.0;
  if (y.sum() == 0.0) y(0) = 1.0;
  if (y.sum() == static_cast<double>(y.size())) y(0) = 0.0;
  return y;
}

}  // namespace mortnas::testing
