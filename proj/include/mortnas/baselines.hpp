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

#include <compare>
#include <cstdint>
#include <vector>

#include "mortnas/common.hpp"
#include "mortnas/features.hpp"
#include "mortnas/nas.hpp"
#include "mortnas/neural.hpp"

namespace mortnas {

// ---------------------------------------------------------------------------
// L2-regularized logistic regression.

struct LinearModel {
  VectorXd weights;
  double bias = 0.0;
  double l2 = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;

  VectorXd predict_logits(const MatrixXd& x) const;
};

struct LogRegConfig {
  int max_iterations = 100;
  double tolerance = 1e-6;  // on the gradient norm
  ClassWeighting weighting = ClassWeighting::kInverseFrequency;
};

/// Minimizes mean class-weighted cross-entropy + l2 * |w|^2 / 2 (bias not
/// penalized) with damped Newton steps. Warns and returns the best iterate if
/// the gradient tolerance is not reached.
LinearModel train_logreg(const MatrixXd& x, const VectorXd& y, double l2,
                         const LogRegConfig& config = {});

/// Gradient of the regularized objective at (weights, bias), bias last.
VectorXd logreg_gradient(const LinearModel& m, const MatrixXd& x, const VectorXd& y,
                         ClassWeights w);

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees on the logistic loss.

struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf value (logit increment before shrinkage)
  };
  std::vector<Node> nodes;

  template <typename Row>
  double predict(const Row& x) const {
    int i = 0;
    while (nodes[i].feature >= 0) i = x(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
  }
  int depth() const;
};

struct TreeEnsemble {
  double initial_logit = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  VectorXd predict_logits(const MatrixXd& x) const;
};

struct GbdtHyperparams {
  int n_estimators = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double subsample = 1.0;
  double l1_reg = 0.0;
  double l2_reg = 1.0;
  double min_child_weight = 1.0;  // minimum hessian sum per child

  /// Basic sanity (n >= 1, depth >= 1, rate >= 0, subsample in (0, 1]).
  void validate() const;
  /// Inside the tuning ranges (50..500 trees, depth 2..15, rate
  /// 0.001..0.3, subsample 0.5..1).
  bool in_search_space() const;

  friend auto operator<=>(const GbdtHyperparams&, const GbdtHyperparams&) = default;
};

/// Second-order boosting: each tree fits gradients/hessians of the
/// class-weighted logistic loss; leaf value -soft(G, l1) / (H + l2); splits
/// found by an exact scan over every distinct feature value.
TreeEnsemble train_gbdt(const MatrixXd& x, const VectorXd& y, const GbdtHyperparams& hp,
                        std::uint64_t seed,
                        ClassWeighting weighting = ClassWeighting::kInverseFrequency);

/// Mean class-weighted logistic loss of the ensemble truncated to its first
/// `n_trees` trees.
double gbdt_training_loss(const TreeEnsemble& model, const MatrixXd& x, const VectorXd& y,
                          ClassWeights w, std::size_t n_trees);

// ---------------------------------------------------------------------------
// Hyperparameter genomes for the shared genetic search.

template <>
struct GenomeTraits<GbdtHyperparams> {
  static GbdtHyperparams sample(Rng& rng);
  static GbdtHyperparams crossover(const GbdtHyperparams& a, const GbdtHyperparams& b, Rng& rng);
  static GbdtHyperparams mutate(const GbdtHyperparams& g, double rate, Rng& rng);
  static double complexity(const GbdtHyperparams& g);
  static GbdtHyperparams key(const GbdtHyperparams& g) { return g; }
  static std::vector<std::string> columns();
  static std::vector<std::string> values(const GbdtHyperparams& g);
};

/// Single-gene genome for the logistic-regression penalty, log10(l2) in [-6, 1].
struct L2Genome {
  double log10_l2 = -2.0;
  double l2() const;
  friend auto operator<=>(const L2Genome&, const L2Genome&) = default;
};

template <>
struct GenomeTraits<L2Genome> {
  static L2Genome sample(Rng& rng);
  static L2Genome crossover(const L2Genome& a, const L2Genome& b, Rng& rng);
  static L2Genome mutate(const L2Genome& g, double rate, Rng& rng);
  static double complexity(const L2Genome& g) { return -g.log10_l2; }
  static L2Genome key(const L2Genome& g) { return g; }
  static std::vector<std::string> columns() { return {"l2"}; }
  static std::vector<std::string> values(const L2Genome& g);
};

template <typename G>
struct TuneResult {
  G best;
  SearchResultT<G> search;
};

/// GA over GBDT hyperparameters, fitness = validation AUROC.
TuneResult<GbdtHyperparams> tune_gbdt(const FeatureTable& train, const FeatureTable& validation,
                                      const SearchConfig& budget);
/// GA over the logistic-regression penalty, fitness = validation AUROC.
TuneResult<L2Genome> tune_logreg(const FeatureTable& train, const FeatureTable& validation,
                                 const SearchConfig& budget, const LogRegConfig& config = {});

}  // namespace mortnas
