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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mortnas/common.hpp"
#include "mortnas/metrics.hpp"

// Feed-forward binary classifier: Dense -> [BatchNorm] -> activation ->
// dropout per hidden layer, then a single logit. Forward and backward passes
// are written out by hand over Eigen matrices with rows as samples.
namespace mortnas {

enum class Activation { kReLU, kELU, kSELU, kTanh };

inline constexpr std::array<Activation, 4> kActivations = {
    Activation::kReLU, Activation::kELU, Activation::kSELU, Activation::kTanh};
inline constexpr std::array<int, 4> kAllowedWidths = {16, 32, 64, 128};
inline constexpr int kMaxDepth = 5;
inline constexpr double kMaxDropout = 0.5;

std::string_view activation_name(Activation a);
std::optional<Activation> parse_activation(std::string_view name);

struct ArchitectureSpec {
  std::vector<int> hidden_widths = {64};
  Activation activation = Activation::kELU;
  double dropout = 0.3;
  bool batch_norm = true;

  /// Throws ConfigError when outside the search space.
  void validate() const;
  /// Trainable parameters (weights, biases, batch-norm scale and shift).
  long parameter_count(int input_dim) const;
  std::string describe() const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
  friend auto operator<=>(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

// ---------------------------------------------------------------------------
// Activations.

namespace act {
inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kEluAlpha = 1.0;

template <typename Scalar>
Scalar apply(Activation a, Scalar x) {
  switch (a) {
    case Activation::kReLU:
      return x > 0 ? x : Scalar(0);
    case Activation::kELU:
      return x > 0 ? x : Scalar(kEluAlpha) * std::expm1(x);
    case Activation::kSELU:
      return Scalar(kSeluLambda) * (x > 0 ? x : Scalar(kSeluAlpha) * std::expm1(x));
    case Activation::kTanh:
      return std::tanh(x);
  }
  return x;
}

template <typename Scalar>
Scalar derivative(Activation a, Scalar x) {
  switch (a) {
    case Activation::kReLU:
      return x > 0 ? Scalar(1) : Scalar(0);
    case Activation::kELU:
      return x > 0 ? Scalar(1) : Scalar(kEluAlpha) * std::exp(x);
    case Activation::kSELU:
      return Scalar(kSeluLambda) * (x > 0 ? Scalar(1) : Scalar(kSeluAlpha) * std::exp(x));
    case Activation::kTanh: {
      const Scalar t = std::tanh(x);
      return Scalar(1) - t * t;
    }
  }
  return Scalar(1);
}
}  // namespace act

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// ---------------------------------------------------------------------------
// Model.

template <typename Scalar>
struct HiddenLayer {
  MatrixX<Scalar> weight;      // fan_in x width
  RowVectorX<Scalar> bias;     // 1 x width
  // Batch norm, empty when disabled.
  RowVectorX<Scalar> gamma;
  RowVectorX<Scalar> beta;
  RowVectorX<Scalar> running_mean;
  RowVectorX<Scalar> running_var;
};

template <typename Scalar>
struct BasicMlp {
  ArchitectureSpec spec;
  int input_dim = 0;
  std::vector<HiddenLayer<Scalar>> hidden;
  VectorX<Scalar> out_weight;  // width_last x 1
  VectorX<Scalar> out_bias;    // 1

  static constexpr Scalar kBatchNormEps = Scalar(1e-5);
  static constexpr Scalar kBatchNormMomentum = Scalar(0.1);
};

using Mlp = BasicMlp<double>;

/// Calls f(block_0, block_1, ...) on matching trainable parameter blocks of
/// several same-shaped models (model, gradient, optimizer moments).
template <typename F, typename Scalar, typename... Rest>
void zip_parameters(F&& f, BasicMlp<Scalar>& first, Rest&... rest) {
  for (std::size_t l = 0; l < first.hidden.size(); ++l) {
    f(first.hidden[l].weight, rest.hidden[l].weight...);
    f(first.hidden[l].bias, rest.hidden[l].bias...);
    if (first.spec.batch_norm) {
      f(first.hidden[l].gamma, rest.hidden[l].gamma...);
      f(first.hidden[l].beta, rest.hidden[l].beta...);
    }
  }
  f(first.out_weight, rest.out_weight...);
  f(first.out_bias, rest.out_bias...);
}

/// Fan-in variance scaling: He for ReLU/ELU, LeCun for SELU/Tanh and the
/// output layer. Biases zero; batch norm starts as the identity.
template <typename Scalar = double>
BasicMlp<Scalar> init_mlp(const ArchitectureSpec& spec, int input_dim, std::uint64_t seed) {
  spec.validate();
  if (input_dim < 1) throw ConfigError("init_mlp: input_dim must be >= 1");
  Rng rng(seed);
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  const bool he = spec.activation == Activation::kReLU || spec.activation == Activation::kELU;

  BasicMlp<Scalar> m;
  m.spec = spec;
  m.input_dim = input_dim;
  int fan_in = input_dim;
  for (int width : spec.hidden_widths) {
    HiddenLayer<Scalar> layer;
    const Scalar sd = std::sqrt(Scalar(he ? 2.0 : 1.0) / Scalar(fan_in));
    layer.weight = MatrixX<Scalar>::NullaryExpr(fan_in, width, [&] { return sd * normal(rng); });
    layer.bias = RowVectorX<Scalar>::Zero(width);
    if (spec.batch_norm) {
      layer.gamma = RowVectorX<Scalar>::Ones(width);
      layer.beta = RowVectorX<Scalar>::Zero(width);
      layer.running_mean = RowVectorX<Scalar>::Zero(width);
      layer.running_var = RowVectorX<Scalar>::Ones(width);
    }
    m.hidden.push_back(std::move(layer));
    fan_in = width;
  }
  const Scalar sd = std::sqrt(Scalar(1) / Scalar(fan_in));
  m.out_weight = VectorX<Scalar>::NullaryExpr(fan_in, [&] { return sd * normal(rng); });
  m.out_bias = VectorX<Scalar>::Zero(1);
  return m;
}

/// Same-shaped model with every parameter zeroed (gradient / moment buffer).
template <typename Scalar>
BasicMlp<Scalar> zeros_like(const BasicMlp<Scalar>& m) {
  BasicMlp<Scalar> z = m;
  zip_parameters([](auto& block) { block.setZero(); }, z);
  for (auto& l : z.hidden) {
    l.running_mean.setZero();
    l.running_var.setZero();
  }
  return z;
}

enum class Mode { kTrain, kInfer };

/// Intermediate values of a training-mode forward pass.
template <typename Scalar>
struct ForwardCache {
  struct Layer {
    MatrixX<Scalar> input;       // activations entering the layer
    MatrixX<Scalar> pre_norm;    // x W + b
    MatrixX<Scalar> normalized;  // (pre_norm - mean) * inv_std, BN only
    RowVectorX<Scalar> batch_mean;
    RowVectorX<Scalar> batch_var;  // biased
    RowVectorX<Scalar> inv_std;
    MatrixX<Scalar> pre_act;     // input to the activation
    MatrixX<Scalar> mask;        // inverted-dropout mask, empty if unused
  };
  std::vector<Layer> layers;
  MatrixX<Scalar> last_hidden;   // input to the output layer
};

/// Logits for a batch. In kTrain mode dropout masks come from `rng`, batch
/// norm uses batch statistics, and the cache (if given) is filled; running
/// statistics are not touched. kInfer is deterministic.
template <typename Scalar, typename Derived>
VectorX<Scalar> forward_logits(const BasicMlp<Scalar>& m, const Eigen::MatrixBase<Derived>& x,
                               Mode mode, Rng* rng = nullptr,
                               ForwardCache<Scalar>* cache = nullptr) {
  if (x.cols() != m.input_dim)
    throw std::invalid_argument("forward: expected " + std::to_string(m.input_dim) +
                                " columns, got " + std::to_string(x.cols()));
  const bool train = mode == Mode::kTrain;
  if (train && m.spec.dropout > 0 && rng == nullptr)
    throw std::invalid_argument("forward: training-mode dropout needs an rng");
  if (cache) cache->layers.assign(m.hidden.size(), {});
  const Scalar keep = Scalar(1) - Scalar(m.spec.dropout);
  std::uniform_real_distribution<Scalar> unif(Scalar(0), Scalar(1));

  MatrixX<Scalar> a = x.template cast<Scalar>();
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    const auto& layer = m.hidden[l];
    MatrixX<Scalar> z = (a * layer.weight).rowwise() + layer.bias;
    typename ForwardCache<Scalar>::Layer* c = cache ? &cache->layers[l] : nullptr;
    if (c) c->input = a;
    if (m.spec.batch_norm) {
      RowVectorX<Scalar> mean, var;
      if (train) {
        mean = z.colwise().mean();
        var = (z.rowwise() - mean).array().square().colwise().mean();
      } else {
        mean = layer.running_mean;
        var = layer.running_var;
      }
      const RowVectorX<Scalar> inv_std = (var.array() + BasicMlp<Scalar>::kBatchNormEps).rsqrt();
      MatrixX<Scalar> xhat = (z.rowwise() - mean).array().rowwise() * inv_std.array();
      if (c) {
        c->pre_norm = std::move(z);
        c->batch_mean = mean;
        c->batch_var = var;
        c->inv_std = inv_std;
        c->normalized = xhat;
      }
      z = (xhat.array().rowwise() * layer.gamma.array()).rowwise() + layer.beta.array();
    } else if (c) {
      c->pre_norm = z;
    }
    if (c) c->pre_act = z;
    const Activation fn = m.spec.activation;
    a = z.unaryExpr([fn](Scalar v) { return act::apply(fn, v); });
    if (train && m.spec.dropout > 0) {
      MatrixX<Scalar> mask = MatrixX<Scalar>::NullaryExpr(
          a.rows(), a.cols(), [&] { return unif(*rng) < keep ? Scalar(1) / keep : Scalar(0); });
      a.array() *= mask.array();
      if (c) c->mask = std::move(mask);
    }
  }
  if (cache) cache->last_hidden = a;
  return (a * m.out_weight).array() + m.out_bias(0);
}

/// Folds the batch statistics of a training pass into the running averages.
template <typename Scalar>
void update_running_stats(BasicMlp<Scalar>& m, const ForwardCache<Scalar>& cache, Eigen::Index n) {
  if (!m.spec.batch_norm) return;
  const Scalar mom = BasicMlp<Scalar>::kBatchNormMomentum;
  const Scalar unbias = n > 1 ? Scalar(n) / Scalar(n - 1) : Scalar(1);
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    auto& layer = m.hidden[l];
    layer.running_mean = (Scalar(1) - mom) * layer.running_mean + mom * cache.layers[l].batch_mean;
    layer.running_var =
        (Scalar(1) - mom) * layer.running_var + mom * unbias * cache.layers[l].batch_var;
  }
}

/// Probabilities for a batch. Training mode also updates running batch-norm
/// statistics, so the model is taken by non-const reference.
template <typename Scalar, typename Derived>
VectorX<Scalar> forward(BasicMlp<Scalar>& m, const Eigen::MatrixBase<Derived>& x, Mode mode,
                        Rng& rng) {
  ForwardCache<Scalar> cache;
  VectorX<Scalar> logits = forward_logits(m, x, mode, &rng, mode == Mode::kTrain ? &cache : nullptr);
  if (mode == Mode::kTrain) update_running_stats(m, cache, x.rows());
  return logits.unaryExpr([](Scalar v) { return sigmoid(v); });
}

/// Inference-mode logits, evaluated in row chunks to bound memory.
template <typename Scalar, typename Derived>
VectorX<Scalar> predict_logits(const BasicMlp<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  constexpr Eigen::Index kChunk = 8192;
  VectorX<Scalar> out(x.rows());
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - start);
    out.segment(start, len) = forward_logits(m, x.middleRows(start, len), Mode::kInfer);
  }
  return out;
}

template <typename Scalar, typename Derived>
VectorX<Scalar> predict_proba(const BasicMlp<Scalar>& m, const Eigen::MatrixBase<Derived>& x) {
  return predict_logits(m, x).unaryExpr([](Scalar v) { return sigmoid(v); });
}

/// Back-propagates d(loss)/d(logit) through a cached training pass.
/// Returns a same-shaped model holding parameter gradients.
template <typename Scalar>
BasicMlp<Scalar> backward(const BasicMlp<Scalar>& m, const ForwardCache<Scalar>& cache,
                          const VectorX<Scalar>& dlogits) {
  BasicMlp<Scalar> g = zeros_like(m);
  g.out_weight = cache.last_hidden.transpose() * dlogits;
  g.out_bias(0) = dlogits.sum();
  MatrixX<Scalar> da = dlogits * m.out_weight.transpose();
  const Scalar n = Scalar(dlogits.size());
  for (std::size_t l = m.hidden.size(); l-- > 0;) {
    const auto& layer = m.hidden[l];
    const auto& c = cache.layers[l];
    if (c.mask.size() > 0) da.array() *= c.mask.array();
    const Activation fn = m.spec.activation;
    MatrixX<Scalar> dz =
        da.array() * c.pre_act.unaryExpr([fn](Scalar v) { return act::derivative(fn, v); }).array();
    if (m.spec.batch_norm) {
      g.hidden[l].gamma = (dz.array() * c.normalized.array()).colwise().sum();
      g.hidden[l].beta = dz.colwise().sum();
      const MatrixX<Scalar> dxhat = dz.array().rowwise() * layer.gamma.array();
      const RowVectorX<Scalar> sum_dxhat = dxhat.colwise().sum();
      const RowVectorX<Scalar> sum_dxhat_xhat = (dxhat.array() * c.normalized.array()).colwise().sum();
      MatrixX<Scalar> centred = (n * dxhat).rowwise() - sum_dxhat;
      centred.array() -= c.normalized.array().rowwise() * sum_dxhat_xhat.array();
      dz = centred.array().rowwise() * (c.inv_std.array() / n);
    }
    g.hidden[l].weight = c.input.transpose() * dz;
    g.hidden[l].bias = dz.colwise().sum();
    if (l > 0) da = dz * layer.weight.transpose();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Loss.

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;
};

/// Inverse-frequency weights: positive = n_neg / n_pos, negative = 1.
ClassWeights inverse_frequency_weights(const VecRef& labels);

template <typename Scalar>
struct BceResult {
  Scalar loss = 0;              // mean of w(y) * cross-entropy
  VectorX<Scalar> grad_logits;  // w(y) * (p - y), not divided by n
};

/// Class-weighted binary cross-entropy of probabilities.
template <typename Scalar>
BceResult<Scalar> weighted_bce(const VectorX<Scalar>& probs, const VectorX<Scalar>& labels,
                               ClassWeights w) {
  if (probs.size() != labels.size()) throw std::invalid_argument("weighted_bce: length mismatch");
  BceResult<Scalar> r;
  r.grad_logits.resize(probs.size());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const bool pos = labels(i) > Scalar(0.5);
    const Scalar wi = Scalar(pos ? w.positive : w.negative);
    const Scalar p = probs(i);
    total += wi * (pos ? -std::log(p) : -std::log1p(-p));
    r.grad_logits(i) = wi * (p - labels(i));
  }
  r.loss = total / Scalar(probs.size());
  return r;
}

/// Same loss evaluated from logits without forming log(p) explicitly.
template <typename Scalar>
BceResult<Scalar> weighted_bce_logits(const VectorX<Scalar>& logits, const VectorX<Scalar>& labels,
                                      ClassWeights w) {
  if (logits.size() != labels.size())
    throw std::invalid_argument("weighted_bce: length mismatch");
  BceResult<Scalar> r;
  r.grad_logits.resize(logits.size());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const bool pos = labels(i) > Scalar(0.5);
    const Scalar wi = Scalar(pos ? w.positive : w.negative);
    const Scalar z = logits(i);
    // softplus(-z) for positives, softplus(z) for negatives
    const Scalar s = pos ? -z : z;
    const Scalar softplus = s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
    total += wi * softplus;
    r.grad_logits(i) = wi * (sigmoid(z) - labels(i));
  }
  r.loss = total / Scalar(logits.size());
  return r;
}

// ---------------------------------------------------------------------------
// Training.

enum class OptimizerKind { kAdam, kSgd };
enum class ClassWeighting { kInverseFrequency, kNone };

struct TrainConfig {
  int max_epochs = 50;
  int patience = 5;
  int batch_size = 256;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  ClassWeighting weighting = ClassWeighting::kInverseFrequency;
  bool early_stopping = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Tracks the best validation score; stop() once `patience` epochs pass
/// without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Records the score of the next epoch (1-based); true if it is a new best.
  bool update(double score) {
    ++epoch_;
    if (best_epoch_ == 0 || score > best_score_) {
      best_score_ = score;
      best_epoch_ = epoch_;
      return true;
    }
    return false;
  }
  bool should_stop() const { return best_epoch_ > 0 && epoch_ - best_epoch_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  double best_score_ = -std::numeric_limits<double>::infinity();
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_auroc;  // empty when no validation data
  int epochs_run = 0;
  int best_epoch = 0;
  bool stopped_early = false;
  ClassWeights class_weights;
};

template <typename Scalar>
struct TrainResult {
  BasicMlp<Scalar> model;
  TrainHistory history;
};

namespace detail {

template <typename Scalar>
class Adam {
 public:
  Adam(const BasicMlp<Scalar>& m, double lr) : m_(zeros_like(m)), v_(zeros_like(m)), lr_(lr) {}

  void step(BasicMlp<Scalar>& model, BasicMlp<Scalar>& grad) {
    ++t_;
    const Scalar b1 = Scalar(0.9), b2 = Scalar(0.999), eps = Scalar(1e-8);
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(t_));
    const Scalar lr = Scalar(lr_);
    zip_parameters(
        [&](auto& p, auto& g, auto& m, auto& v) {
          m = b1 * m + (Scalar(1) - b1) * g;
          v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
          p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        },
        model, grad, m_, v_);
  }

 private:
  BasicMlp<Scalar> m_, v_;
  double lr_;
  long t_ = 0;
};

}  // namespace detail

/// Mini-batch training with class-weighted cross-entropy. Validation AUROC is
/// tracked each epoch; with early stopping on, the best-epoch parameters are
/// restored. Bitwise deterministic for a given seed.
template <typename Scalar>
TrainResult<Scalar> train_mlp(BasicMlp<Scalar> model, const MatrixXd& x, const VectorXd& y,
                          const MatrixXd& x_val, const VectorXd& y_val, const TrainConfig& config) {
  config.validate();
  if (x.rows() == 0) throw DataError("train: empty training set");
  if (x.rows() != y.size()) throw std::invalid_argument("train: x/y length mismatch");
  const bool have_val = x_val.rows() > 0;

  TrainResult<Scalar> result;
  auto& hist = result.history;
  hist.class_weights = config.weighting == ClassWeighting::kInverseFrequency
                           ? inverse_frequency_weights(y)
                           : ClassWeights{};

  Rng rng(config.seed);
  detail::Adam<Scalar> adam(model, config.learning_rate);
  EarlyStopping stopper(config.patience);
  BasicMlp<Scalar> best = model;
  std::vector<Eigen::Index> order(x.rows());
  std::iota(order.begin(), order.end(), 0);

  const MatrixX<Scalar> xs = x.cast<Scalar>();
  const VectorX<Scalar> ys = y.cast<Scalar>();
  MatrixX<Scalar> xb;
  VectorX<Scalar> yb;
  ForwardCache<Scalar> cache;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < x.rows(); start += config.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(config.batch_size, x.rows() - start);
      xb.resize(len, xs.cols());
      yb.resize(len);
      for (Eigen::Index k = 0; k < len; ++k) {
        xb.row(k) = xs.row(order[start + k]);
        yb(k) = ys(order[start + k]);
      }
      const VectorX<Scalar> logits = forward_logits(model, xb, Mode::kTrain, &rng, &cache);
      auto bce = weighted_bce_logits(logits, yb, hist.class_weights);
      if (!std::isfinite(static_cast<double>(bce.loss)))
        throw RuntimeFailure("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch starting at row " + std::to_string(start) + " (" +
                             model.spec.describe() + ")");
      epoch_loss += static_cast<double>(bce.loss) * static_cast<double>(len);
      bce.grad_logits /= Scalar(len);
      BasicMlp<Scalar> grad = backward(model, cache, bce.grad_logits);
      if (config.optimizer == OptimizerKind::kAdam) {
        adam.step(model, grad);
      } else {
        const Scalar lr = Scalar(config.learning_rate);
        zip_parameters([&](auto& p, auto& g) { p -= lr * g; }, model, grad);
      }
      update_running_stats(model, cache, len);
    }
    hist.train_loss.push_back(epoch_loss / static_cast<double>(x.rows()));
    hist.epochs_run = epoch;

    if (have_val) {
      const VectorXd val_scores = predict_logits(model, x_val).template cast<double>();
      const double score = auroc(val_scores, y_val);
      hist.val_auroc.push_back(score);
      if (stopper.update(score)) best = model;
      if (config.early_stopping && stopper.should_stop()) {
        hist.stopped_early = true;
        break;
      }
    }
  }
  if (have_val && config.early_stopping) {
    result.model = std::move(best);
    hist.best_epoch = stopper.best_epoch();
  } else {
    result.model = std::move(model);
    hist.best_epoch = hist.epochs_run;
  }
  return result;
}

}  // namespace mortnas
