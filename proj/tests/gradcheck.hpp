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

// Central finite-difference check of back-propagated gradients. Runs in
// long double so truncation and rounding error sit far below the tolerance.

#pragma once

#include <cmath>
#include <random>
#include <string>

#include "mortnas/neural.hpp"

namespace mortnas::testing {

using LD = long double;

struct GradCheckResult {
  double max_rel_error = 0.0;
  long parameters = 0;
  std::string worst;  // location of the worst parameter
};

// Sum-form weighted loss of a training-mode pass. The dropout mask is
// reproduced by reseeding the rng identically on every call.
inline LD training_loss(const BasicMlp<LD>& m, const MatrixX<LD>& x, const VectorX<LD>& y,
                        ClassWeights w, std::uint64_t mask_seed,
                        ForwardCache<LD>* cache = nullptr) {
  Rng rng(mask_seed);
  const VectorX<LD> logits = forward_logits(m, x, Mode::kTrain, &rng, cache);
  return weighted_bce_logits(logits, y, w).loss * LD(y.size());
}

/// Random network and batch away from ReLU kinks, then every parameter's
/// analytic gradient against (L(p + h) - L(p - h)) / 2h.
inline GradCheckResult gradient_check(const ArchitectureSpec& spec, int input_dim, int batch,
                                      std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  BasicMlp<LD> m = init_mlp<LD>(spec, input_dim, seed);
  // Move batch norm off its identity initialization so gamma/beta matter.
  for (auto& l : m.hidden) {
    if (!spec.batch_norm) continue;
    for (Eigen::Index j = 0; j < l.gamma.size(); ++j) {
      l.gamma(j) = LD(1.0 + 0.3 * nd(rng));
      l.beta(j) = LD(0.2 * nd(rng));
    }
  }
  for (auto& l : m.hidden)
    for (Eigen::Index j = 0; j < l.bias.size(); ++j) l.bias(j) = LD(0.1 * nd(rng));
  m.out_bias(0) = LD(0.1 * nd(rng));

  const ClassWeights w{1.0, 3.0};
  const std::uint64_t mask_seed = seed ^ 0x9e3779b97f4a7c15ULL;
  MatrixX<LD> x(batch, input_dim);
  VectorX<LD> y(batch);
  ForwardCache<LD> cache;
  // Redraw the batch until no pre-activation sits within 1e-3 of the ReLU kink.
  for (int attempt = 0;; ++attempt) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = LD(nd(rng));
    for (int i = 0; i < batch; ++i) y(i) = i % 3 == 0 ? 1 : 0;
    training_loss(m, x, y, w, mask_seed, &cache);
    bool near_kink = false;
    if (spec.activation == Activation::kReLU)
      for (const auto& c : cache.layers) near_kink |= (c.pre_act.array().abs() < LD(1e-3)).any();
    if (!near_kink || attempt > 200) break;
  }

  Rng mask_rng(mask_seed);
  const VectorX<LD> logits = forward_logits(m, x, Mode::kTrain, &mask_rng, &cache);
  const VectorX<LD> dlogits = weighted_bce_logits(logits, y, w).grad_logits;
  BasicMlp<LD> grad = backward(m, cache, dlogits);

  GradCheckResult result;
  const LD h = 1e-7L;
  BasicMlp<LD> probe = m;
  int block = 0;
  zip_parameters(
      [&](auto& p, auto& g) {
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          const LD saved = p(i);
          p(i) = saved + h;
          const LD up = training_loss(probe, x, y, w, mask_seed);
          p(i) = saved - h;
          const LD down = training_loss(probe, x, y, w, mask_seed);
          p(i) = saved;
          const LD numeric = (up - down) / (2 * h);
          const LD analytic = g(i);
          const LD scale = std::max({std::abs(numeric), std::abs(analytic), LD(1e-6)});
          const double rel = static_cast<double>(std::abs(numeric - analytic) / scale);
          ++result.parameters;
          if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst = "block " + std::to_string(block) + " index " + std::to_string(i);
          }
        }
        ++block;
      },
      probe, grad);
  return result;
}

}  // namespace mortnas::testing
