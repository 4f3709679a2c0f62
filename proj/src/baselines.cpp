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

#include "mortnas/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mortnas/metrics.hpp"

namespace mortnas {
namespace {

ClassWeights weights_for(const VectorXd& y, ClassWeighting w) {
  return w == ClassWeighting::kInverseFrequency ? inverse_frequency_weights(y) : ClassWeights{};
}

double row_weight(double label, ClassWeights w) { return label > 0.5 ? w.positive : w.negative; }

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Mean weighted cross-entropy of logits.
double mean_loss(const VectorXd& logits, const VectorXd& y, ClassWeights w) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    total += row_weight(y(i), w) * softplus(y(i) > 0.5 ? -logits(i) : logits(i));
  return total / static_cast<double>(y.size());
}

void check_inputs(const MatrixXd& x, const VectorXd& y, const char* who) {
  if (x.rows() != y.size()) throw std::invalid_argument(std::string(who) + ": row mismatch");
  if (x.rows() == 0) throw DataError(std::string(who) + ": empty training set");
  const double pos = (y.array() > 0.5).count();
  if (pos == 0 || pos == static_cast<double>(y.size()))
    throw DataError(std::string(who) + ": single-class training labels");
}

}  // namespace

// ---------------------------------------------------------------------------
// Logistic regression.

VectorXd LinearModel::predict_logits(const MatrixXd& x) const {
  return (x * weights).array() + bias;
}

VectorXd logreg_gradient(const LinearModel& m, const MatrixXd& x, const VectorXd& y,
                         ClassWeights w) {
  const auto n = static_cast<double>(x.rows());
  const VectorXd z = m.predict_logits(x);
  VectorXd r(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = row_weight(y(i), w) * (sigmoid(z(i)) - y(i));
  VectorXd g(x.cols() + 1);
  g.head(x.cols()) = x.transpose() * r / n + m.l2 * m.weights;
  g(x.cols()) = r.sum() / n;
  return g;
}

LinearModel train_logreg(const MatrixXd& x, const VectorXd& y, double l2,
                         const LogRegConfig& config) {
  check_inputs(x, y, "train_logreg");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("train_logreg: l2 must be >= 0");
  if (config.max_iterations < 1) throw ConfigError("train_logreg: max_iterations must be >= 1");
  const ClassWeights cw = weights_for(y, config.weighting);
  const Eigen::Index d = x.cols();
  const auto n = static_cast<double>(x.rows());

  auto objective = [&](const LinearModel& m) {
    return mean_loss(m.predict_logits(x), y, cw) + 0.5 * l2 * m.weights.squaredNorm();
  };

  LinearModel m;
  m.l2 = l2;
  m.weights = VectorXd::Zero(d);
  // Start at the weighted base rate so the bias-only optimum is exact at step 0.
  double wpos = 0.0, wneg = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) > 0.5 ? wpos : wneg) += row_weight(y(i), cw);
  m.bias = std::log(wpos / wneg);

  double f = objective(m);
  for (int it = 0; it < config.max_iterations; ++it) {
    const VectorXd g = logreg_gradient(m, x, y, cw);
    m.gradient_norm = g.norm();
    m.iterations = it;
    if (m.gradient_norm < config.tolerance) {
      m.converged = true;
      return m;
    }
    const VectorXd z = m.predict_logits(x);
    VectorXd h(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double p = sigmoid(z(i));
      h(i) = row_weight(y(i), cw) * std::max(p * (1.0 - p), 1e-12);
    }
    MatrixXd hess(d + 1, d + 1);
    hess.topLeftCorner(d, d) = x.transpose() * h.asDiagonal() * x / n;
    hess.topLeftCorner(d, d).diagonal().array() += l2;
    hess.block(0, d, d, 1) = x.transpose() * h / n;
    hess.block(d, 0, 1, d) = hess.block(0, d, d, 1).transpose();
    hess(d, d) = h.sum() / n;
    hess.diagonal().array() += 1e-10;
    const VectorXd step = hess.ldlt().solve(g);

    double scale = 1.0;
    LinearModel trial = m;
    bool accepted = false;
    for (int k = 0; k < 50; ++k) {
      trial.weights = m.weights - scale * step.head(d);
      trial.bias = m.bias - scale * step(d);
      const double ft = objective(trial);
      if (std::isfinite(ft) && ft <= f) {
        f = ft;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // no descent left at machine precision
    m.weights = trial.weights;
    m.bias = trial.bias;
  }
  const VectorXd g = logreg_gradient(m, x, y, cw);
  m.gradient_norm = g.norm();
  m.converged = m.gradient_norm < config.tolerance;
  if (!m.converged)
    warn("train_logreg: gradient norm " + format_real(m.gradient_norm) +
         " above tolerance; returning best iterate");
  return m;
}

// ---------------------------------------------------------------------------
// Trees.

int RegressionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return best;
}

VectorXd TreeEnsemble::predict_logits(const MatrixXd& x) const {
  VectorXd out = VectorXd::Constant(x.rows(), initial_logit);
  for (const auto& t : trees)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) += learning_rate * t.predict(x.row(i));
  return out;
}

void GbdtHyperparams::validate() const {
  if (n_estimators < 1) throw ConfigError("gbdt: n_estimators must be >= 1");
  if (max_depth < 1) throw ConfigError("gbdt: max_depth must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("gbdt: learning_rate must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("gbdt: subsample must be in (0, 1]");
  if (!(l1_reg >= 0.0) || !(l2_reg >= 0.0)) throw ConfigError("gbdt: regularization must be >= 0");
  if (!(min_child_weight >= 0.0)) throw ConfigError("gbdt: min_child_weight must be >= 0");
}

bool GbdtHyperparams::in_search_space() const {
  return n_estimators >= 50 && n_estimators <= 500 && max_depth >= 2 && max_depth <= 15 &&
         learning_rate >= 0.001 && learning_rate <= 0.3 && subsample >= 0.5 && subsample <= 1.0 &&
         l1_reg >= 0.0 && l1_reg <= 1.0 && l2_reg >= 0.0 && l2_reg <= 10.0;
}

namespace {

double soft_threshold(double g, double l1) {
  if (g > l1) return g - l1;
  if (g < -l1) return g + l1;
  return 0.0;
}

// Columns pre-sorted once: each value mapped to its rank among the column's
// distinct values, so a node's split scan is a histogram over ranks.
struct RankedColumns {
  std::vector<std::vector<double>> distinct;
  std::vector<std::vector<std::uint32_t>> rank;  // [feature][row]

  explicit RankedColumns(const MatrixXd& x) : distinct(x.cols()), rank(x.cols()) {
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      auto& vals = distinct[f];
      vals.assign(x.col(f).data(), x.col(f).data() + x.rows());
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      auto& r = rank[f];
      r.resize(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        r[i] = static_cast<std::uint32_t>(
            std::lower_bound(vals.begin(), vals.end(), x(i, f)) - vals.begin());
    }
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const RankedColumns& cols, const VectorXd& g, const VectorXd& h,
              const GbdtHyperparams& hp)
      : cols_(cols), g_(g), h_(h), hp_(hp) {}

  RegressionTree build(std::vector<Eigen::Index> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  double score(double g, double h) const {
    const double s = soft_threshold(g, hp_.l1_reg);
    return s * s / (h + hp_.l2_reg);
  }

  double leaf_value(double g, double h) const {
    const double denom = h + hp_.l2_reg;
    return denom > 0.0 ? -soft_threshold(g, hp_.l1_reg) / denom : 0.0;
  }

  int grow(std::vector<Eigen::Index> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double G = 0.0, H = 0.0;
    for (auto i : rows) {
      G += g_(i);
      H += h_(i);
    }
    tree_.nodes[id].value = leaf_value(G, H);
    if (depth >= hp_.max_depth || rows.size() < 2) return id;

    const double parent = score(G, H);
    double best_gain = 1e-12;
    int best_f = -1;
    std::uint32_t best_rank = 0;
    for (std::size_t f = 0; f < cols_.distinct.size(); ++f) {
      const auto nd = cols_.distinct[f].size();
      if (nd < 2) continue;
      hist_g_.assign(nd, 0.0);
      hist_h_.assign(nd, 0.0);
      const auto& r = cols_.rank[f];
      for (auto i : rows) {
        hist_g_[r[i]] += g_(i);
        hist_h_[r[i]] += h_(i);
      }
      double gl = 0.0, hl = 0.0;
      for (std::size_t k = 0; k + 1 < nd; ++k) {
        gl += hist_g_[k];
        hl += hist_h_[k];
        const double hr = H - hl;
        if (hl < hp_.min_child_weight || hr < hp_.min_child_weight) continue;
        const double gain = score(gl, hl) + score(G - gl, hr) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_rank = static_cast<std::uint32_t>(k);
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<Eigen::Index> left, right;
    const auto& r = cols_.rank[static_cast<std::size_t>(best_f)];
    for (auto i : rows) (r[i] <= best_rank ? left : right).push_back(i);
    if (left.empty() || right.empty()) return id;
    rows.clear();
    rows.shrink_to_fit();

    const auto& vals = cols_.distinct[static_cast<std::size_t>(best_f)];
    tree_.nodes[id].feature = best_f;
    tree_.nodes[id].threshold = 0.5 * (vals[best_rank] + vals[best_rank + 1]);
    const int l = grow(std::move(left), depth + 1);
    const int rr = grow(std::move(right), depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = rr;
    return id;
  }

  const RankedColumns& cols_;
  const VectorXd& g_;
  const VectorXd& h_;
  const GbdtHyperparams& hp_;
  RegressionTree tree_;
  std::vector<double> hist_g_, hist_h_;
};

}  // namespace

TreeEnsemble train_gbdt(const MatrixXd& x, const VectorXd& y, const GbdtHyperparams& hp,
                        std::uint64_t seed, ClassWeighting weighting) {
  check_inputs(x, y, "train_gbdt");
  hp.validate();
  const ClassWeights cw = weights_for(y, weighting);
  const Eigen::Index n = x.rows();

  TreeEnsemble model;
  model.learning_rate = hp.learning_rate;
  double wpos = 0.0, wneg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) (y(i) > 0.5 ? wpos : wneg) += row_weight(y(i), cw);
  model.initial_logit = std::log(wpos / wneg);

  const RankedColumns cols(x);
  VectorXd logits = VectorXd::Constant(n, model.initial_logit);
  VectorXd g(n), h(n);
  Rng rng(seed);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const auto n_sample = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(hp.subsample * static_cast<double>(n))));

  for (int t = 0; t < hp.n_estimators; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(logits(i));
      const double w = row_weight(y(i), cw);
      g(i) = w * (p - y(i));
      h(i) = w * p * (1.0 - p);
    }
    std::vector<Eigen::Index> rows;
    if (n_sample < all.size()) {
      // Partial Fisher-Yates: the first n_sample entries form the sample.
      for (std::size_t k = 0; k < n_sample; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, all.size() - 1);
        std::swap(all[k], all[pick(rng)]);
      }
      rows.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_sample));
      std::sort(rows.begin(), rows.end());
    } else {
      rows = all;
    }
    TreeBuilder builder(cols, g, h, hp);
    model.trees.push_back(builder.build(std::move(rows)));
    const auto& tree = model.trees.back();
    if (hp.learning_rate != 0.0)
      for (Eigen::Index i = 0; i < n; ++i) logits(i) += hp.learning_rate * tree.predict(x.row(i));
  }
  return model;
}

double gbdt_training_loss(const TreeEnsemble& model, const MatrixXd& x, const VectorXd& y,
                          ClassWeights w, std::size_t n_trees) {
  VectorXd logits = VectorXd::Constant(x.rows(), model.initial_logit);
  const std::size_t used = std::min(n_trees, model.trees.size());
  for (std::size_t t = 0; t < used; ++t)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      logits(i) += model.learning_rate * model.trees[t].predict(x.row(i));
  return mean_loss(logits, y, w);
}

// ---------------------------------------------------------------------------
// Genomes.

namespace {

int gene_estimators(Rng& rng) { return std::uniform_int_distribution<int>(50, 500)(rng); }
int gene_depth(Rng& rng) { return std::uniform_int_distribution<int>(2, 15)(rng); }
double gene_rate(Rng& rng) {
  return std::pow(10.0, std::uniform_real_distribution<double>(-3.0, std::log10(0.3))(rng));
}
double gene_subsample(Rng& rng) { return std::uniform_real_distribution<double>(0.5, 1.0)(rng); }
double gene_l1(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
double gene_l2(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 10.0)(rng); }
double gene_log_l2(Rng& rng) { return std::uniform_real_distribution<double>(-6.0, 1.0)(rng); }

template <typename T>
T pick(const T& a, const T& b, Rng& rng) {
  return std::bernoulli_distribution(0.5)(rng) ? a : b;
}

}  // namespace

GbdtHyperparams GenomeTraits<GbdtHyperparams>::sample(Rng& rng) {
  GbdtHyperparams g;
  g.n_estimators = gene_estimators(rng);
  g.max_depth = gene_depth(rng);
  g.learning_rate = gene_rate(rng);
  g.subsample = gene_subsample(rng);
  g.l1_reg = gene_l1(rng);
  g.l2_reg = gene_l2(rng);
  return g;
}

GbdtHyperparams GenomeTraits<GbdtHyperparams>::crossover(const GbdtHyperparams& a,
                                                         const GbdtHyperparams& b, Rng& rng) {
  GbdtHyperparams c = a;
  c.n_estimators = pick(a.n_estimators, b.n_estimators, rng);
  c.max_depth = pick(a.max_depth, b.max_depth, rng);
  c.learning_rate = pick(a.learning_rate, b.learning_rate, rng);
  c.subsample = pick(a.subsample, b.subsample, rng);
  c.l1_reg = pick(a.l1_reg, b.l1_reg, rng);
  c.l2_reg = pick(a.l2_reg, b.l2_reg, rng);
  return c;
}

GbdtHyperparams GenomeTraits<GbdtHyperparams>::mutate(const GbdtHyperparams& g, double rate,
                                                      Rng& rng) {
  std::bernoulli_distribution hit(rate);
  GbdtHyperparams m = g;
  if (hit(rng)) m.n_estimators = gene_estimators(rng);
  if (hit(rng)) m.max_depth = gene_depth(rng);
  if (hit(rng)) m.learning_rate = gene_rate(rng);
  if (hit(rng)) m.subsample = gene_subsample(rng);
  if (hit(rng)) m.l1_reg = gene_l1(rng);
  if (hit(rng)) m.l2_reg = gene_l2(rng);
  return m;
}

double GenomeTraits<GbdtHyperparams>::complexity(const GbdtHyperparams& g) {
  return static_cast<double>(g.n_estimators) * std::ldexp(1.0, g.max_depth);
}

std::vector<std::string> GenomeTraits<GbdtHyperparams>::columns() {
  return {"n_estimators", "max_depth", "learning_rate", "subsample", "l1_reg", "l2_reg"};
}

std::vector<std::string> GenomeTraits<GbdtHyperparams>::values(const GbdtHyperparams& g) {
  return {std::to_string(g.n_estimators), std::to_string(g.max_depth), format_real(g.learning_rate),
          format_real(g.subsample), format_real(g.l1_reg), format_real(g.l2_reg)};
}

double L2Genome::l2() const { return std::pow(10.0, log10_l2); }

L2Genome GenomeTraits<L2Genome>::sample(Rng& rng) { return {gene_log_l2(rng)}; }

L2Genome GenomeTraits<L2Genome>::crossover(const L2Genome& a, const L2Genome& b, Rng& rng) {
  return pick(a, b, rng);
}

L2Genome GenomeTraits<L2Genome>::mutate(const L2Genome& g, double rate, Rng& rng) {
  return std::bernoulli_distribution(rate)(rng) ? L2Genome{gene_log_l2(rng)} : g;
}

std::vector<std::string> GenomeTraits<L2Genome>::values(const L2Genome& g) {
  return {format_real(g.l2())};
}

TuneResult<GbdtHyperparams> tune_gbdt(const FeatureTable& train, const FeatureTable& validation,
                                      const SearchConfig& budget) {
  if (validation.rows() == 0) throw DataError("tune_gbdt: validation split is empty");
  FitnessFn<GbdtHyperparams> fitness = [&](const GbdtHyperparams& hp, std::uint64_t seed) {
    const TreeEnsemble m = train_gbdt(train.x, train.y, hp, seed);
    return auroc(m.predict_logits(validation.x), validation.y);
  };
  TuneResult<GbdtHyperparams> out;
  out.search = evolve<GbdtHyperparams>(budget, fitness);
  out.best = out.search.best;
  return out;
}

TuneResult<L2Genome> tune_logreg(const FeatureTable& train, const FeatureTable& validation,
                                 const SearchConfig& budget, const LogRegConfig& config) {
  if (validation.rows() == 0) throw DataError("tune_logreg: validation split is empty");
  FitnessFn<L2Genome> fitness = [&](const L2Genome& g, std::uint64_t) {
    const LinearModel m = train_logreg(train.x, train.y, g.l2(), config);
    return auroc(m.predict_logits(validation.x), validation.y);
  };
  TuneResult<L2Genome> out;
  out.search = evolve<L2Genome>(budget, fitness);
  out.best = out.search.best;
  return out;
}

}  // namespace mortnas
