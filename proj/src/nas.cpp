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

#include "mortnas/nas.hpp"

#include "mortnas/metrics.hpp"

namespace mortnas {
namespace {

int sample_width(Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kAllowedWidths.size() - 1);
  return kAllowedWidths[pick(rng)];
}

Activation sample_activation(Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kActivations.size() - 1);
  return kActivations[pick(rng)];
}

int sample_depth(Rng& rng) {
  std::uniform_int_distribution<int> pick(1, kMaxDepth);
  return pick(rng);
}

double sample_dropout(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, kMaxDropout);
  return u(rng);
}

bool sample_bool(Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  return coin(rng);
}

}  // namespace

void SearchConfig::validate() const {
  if (population_size < 2) throw ConfigError("search: population_size must be >= 2");
  if (generations < 1) throw ConfigError("search: generations must be >= 1");
  if (elite_count < 1 || elite_count >= population_size)
    throw ConfigError("search: elite_count must be in [1, population_size)");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0))
    throw ConfigError("search: mutation_rate must be in [0, 1]");
  if (candidate_epochs < 1) throw ConfigError("search: candidate_epochs must be >= 1");
}

ArchitectureSpec Genome::decode() const {
  ArchitectureSpec spec;
  spec.hidden_widths.assign(widths.begin(), widths.begin() + std::clamp(depth, 1, kMaxDepth));
  spec.activation = activation;
  spec.dropout = std::clamp(dropout, 0.0, kMaxDropout);
  spec.batch_norm = batch_norm;
  return spec;
}

Genome random_genome(Rng& rng) {
  Genome g;
  g.depth = sample_depth(rng);
  for (auto& w : g.widths) w = sample_width(rng);
  g.activation = sample_activation(rng);
  g.dropout = sample_dropout(rng);
  g.batch_norm = sample_bool(rng);
  return g;
}

Genome crossover(const Genome& a, const Genome& b, Rng& rng) {
  Genome c;
  c.depth = sample_bool(rng) ? a.depth : b.depth;
  for (int i = 0; i < kMaxDepth; ++i) c.widths[i] = sample_bool(rng) ? a.widths[i] : b.widths[i];
  c.activation = sample_bool(rng) ? a.activation : b.activation;
  c.dropout = sample_bool(rng) ? a.dropout : b.dropout;
  c.batch_norm = sample_bool(rng) ? a.batch_norm : b.batch_norm;
  return c;
}

Genome mutate(const Genome& g, double rate, Rng& rng) {
  std::bernoulli_distribution hit(rate);
  Genome m = g;
  if (hit(rng)) m.depth = sample_depth(rng);
  for (auto& w : m.widths)
    if (hit(rng)) w = sample_width(rng);
  if (hit(rng)) m.activation = sample_activation(rng);
  if (hit(rng)) m.dropout = sample_dropout(rng);
  if (hit(rng)) m.batch_norm = sample_bool(rng);
  return m;
}

std::vector<std::string> GenomeTraits<Genome>::columns() {
  return {"depth", "width_1", "width_2", "width_3", "width_4", "width_5",
          "activation", "dropout", "batch_norm", "parameters"};
}

std::vector<std::string> GenomeTraits<Genome>::values(const Genome& g) {
  std::vector<std::string> v{std::to_string(g.depth)};
  for (int i = 0; i < kMaxDepth; ++i) v.push_back(i < g.depth ? std::to_string(g.widths[i]) : "");
  v.emplace_back(activation_name(g.activation));
  v.push_back(format_real(g.dropout));
  v.push_back(g.batch_norm ? "1" : "0");
  v.push_back(std::to_string(g.decode().parameter_count(kNumFeatures)));
  return v;
}

double candidate_fitness(const ArchitectureSpec& spec, const FeatureTable& train,
                         const FeatureTable& validation, int epochs, const TrainConfig& base,
                         std::uint64_t seed) {
  TrainConfig cfg = base;
  cfg.max_epochs = epochs;
  cfg.early_stopping = false;
  cfg.patience = 1;
  cfg.seed = derive_seed(seed, {1});
  Mlp model = init_mlp(spec, static_cast<int>(train.x.cols()), derive_seed(seed, {0}));
  try {
    // Validation is scored once, after the last epoch.
    auto trained = train_mlp(std::move(model), train.x, train.y, MatrixXd(0, train.x.cols()),
                             VectorXd(0), cfg);
    const VectorXd scores = predict_logits(trained.model, validation.x);
    if (!scores.allFinite()) return std::numeric_limits<double>::quiet_NaN();
    return auroc(scores, validation.y);
  } catch (const RuntimeFailure& e) {
    warn(std::string("candidate ") + spec.describe() + " failed: " + e.what());
    return std::numeric_limits<double>::quiet_NaN();
  }
}

NasOutcome run_nas(const FeatureTable& train, const FeatureTable& validation,
                   const SearchConfig& search, const TrainConfig& train_config) {
  search.validate();
  train_config.validate();
  if (validation.rows() == 0) throw DataError("run_nas: validation split is empty");
  FitnessFn<Genome> fitness = [&](const Genome& g, std::uint64_t seed) {
    return candidate_fitness(g.decode(), train, validation, search.candidate_epochs,
                             train_config, seed);
  };
  NasOutcome out;
  out.search = evolve<Genome>(search, fitness);

  const ArchitectureSpec winner = out.search.best.decode();
  Mlp init = init_mlp(winner, static_cast<int>(train.x.cols()),
                      derive_seed(train_config.seed, {0xF1A1}));
  auto trained = train_mlp(std::move(init), train.x, train.y, validation.x, validation.y,
                       train_config);
  out.model = std::move(trained.model);
  out.history = std::move(trained.history);
  return out;
}

}  // namespace mortnas
