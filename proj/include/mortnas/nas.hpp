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
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "mortnas/common.hpp"
#include "mortnas/features.hpp"
#include "mortnas/neural.hpp"
#include "mortnas/text.hpp"

namespace mortnas {

struct SearchConfig {
  int population_size = 20;
  int generations = 15;
  int elite_count = 5;
  double mutation_rate = 0.1;
  int candidate_epochs = 30;
  // Reuse the fitness of a genome already evaluated earlier in the run.
  bool memoize = true;
  int threads = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Generic generational loop. A genome type G plugs in through
// GenomeTraits<G>, which must provide:
//   static G sample(Rng&);
//   static G crossover(const G&, const G&, Rng&);
//   static G mutate(const G&, double rate, Rng&);
//   static double complexity(const G&);       // tie-break, lower first
//   static auto key(const G&);                // memoization key, ordered
//   static std::vector<std::string> columns();
//   static std::vector<std::string> values(const G&);

template <typename G>
struct GenomeTraits;

template <typename G>
struct Candidate {
  G genome;
  double fitness = 0.0;
  bool cached = false;  // fitness reused (elite carry-over or memo hit)
  std::uint64_t eval_seed = 0;
};

template <typename G>
struct GenerationRecord {
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  std::vector<Candidate<G>> population;  // ranked, best first
};

template <typename G>
struct SearchResultT {
  G best{};
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::vector<GenerationRecord<G>> history;
  int evaluations = 0;  // fitness calls actually made
  int cache_hits = 0;
};

/// Fitness receives the genome and a seed derived from (search seed,
/// generation, slot) so results do not depend on evaluation order.
template <typename G>
using FitnessFn = std::function<double(const G&, std::uint64_t)>;

/// Evaluate, rank (fitness desc, then complexity asc, then slot), keep the
/// elites with their scores, and refill with mutate(crossover(p1, p2)) where
/// both parents are drawn uniformly from the elites.
template <typename G>
SearchResultT<G> evolve(const SearchConfig& config, const FitnessFn<G>& fitness) {
  using Traits = GenomeTraits<G>;
  config.validate();
  Rng rng(config.seed);
  const auto pop_size = static_cast<std::size_t>(config.population_size);
  const auto n_elite = static_cast<std::size_t>(config.elite_count);

  std::vector<Candidate<G>> population(pop_size);
  std::vector<bool> scored(pop_size, false);
  for (auto& c : population) c.genome = Traits::sample(rng);

  using Key = decltype(Traits::key(std::declval<const G&>()));
  std::map<Key, double> memo;
  SearchResultT<G> result;

  for (int gen = 0; gen < config.generations; ++gen) {
    // Decide which slots need a fresh evaluation, in slot order.
    std::vector<std::size_t> todo;
    std::map<Key, std::size_t> first_slot;
    for (std::size_t s = 0; s < pop_size; ++s) {
      auto& c = population[s];
      c.eval_seed = derive_seed(config.seed, {static_cast<std::uint64_t>(gen), s});
      if (scored[s]) continue;
      const Key k = Traits::key(c.genome);
      if (config.memoize) {
        if (auto it = memo.find(k); it != memo.end()) {
          c.fitness = it->second;
          c.cached = true;
          scored[s] = true;
          continue;
        }
        if (first_slot.count(k)) continue;  // filled after evaluation
        first_slot.emplace(k, s);
      }
      todo.push_back(s);
    }
    parallel_for(todo.size(), config.threads, [&](std::size_t i) {
      auto& c = population[todo[i]];
      double f = fitness(c.genome, c.eval_seed);
      if (std::isnan(f)) f = -std::numeric_limits<double>::infinity();
      c.fitness = f;
      c.cached = false;
    });
    result.evaluations += static_cast<int>(todo.size());
    for (std::size_t s : todo) {
      scored[s] = true;
      if (std::isinf(population[s].fitness) && population[s].fitness < 0)
        warn("evolve: candidate " + std::to_string(s) + " in generation " + std::to_string(gen) +
             " produced NaN fitness; assigned -inf");
      if (config.memoize) memo.emplace(Traits::key(population[s].genome), population[s].fitness);
    }
    for (std::size_t s = 0; s < pop_size; ++s) {
      if (scored[s]) continue;
      population[s].fitness = memo.at(Traits::key(population[s].genome));
      population[s].cached = true;
      scored[s] = true;
    }
    for (const auto& c : population) result.cache_hits += c.cached;

    std::vector<std::size_t> rank(pop_size);
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      const auto& ca = population[a];
      const auto& cb = population[b];
      if (ca.fitness != cb.fitness) return ca.fitness > cb.fitness;
      return Traits::complexity(ca.genome) < Traits::complexity(cb.genome);
    });

    GenerationRecord<G> record;
    double sum = 0.0;
    int finite = 0;
    for (std::size_t r : rank) {
      record.population.push_back(population[r]);
      if (std::isfinite(population[r].fitness)) {
        sum += population[r].fitness;
        ++finite;
      }
    }
    record.best_fitness = population[rank[0]].fitness;
    record.mean_fitness = finite > 0 ? sum / finite : -std::numeric_limits<double>::infinity();
    result.history.push_back(std::move(record));

    if (gen + 1 == config.generations) break;
    std::vector<Candidate<G>> next;
    next.reserve(pop_size);
    for (std::size_t e = 0; e < n_elite; ++e) {
      Candidate<G> elite = population[rank[e]];
      elite.cached = true;
      next.push_back(std::move(elite));
    }
    std::uniform_int_distribution<std::size_t> pick(0, n_elite - 1);
    while (next.size() < pop_size) {
      const G& p1 = next[pick(rng)].genome;
      const G& p2 = next[pick(rng)].genome;
      Candidate<G> child;
      child.genome = Traits::mutate(Traits::crossover(p1, p2, rng), config.mutation_rate, rng);
      next.push_back(std::move(child));
    }
    population = std::move(next);
    std::fill(scored.begin(), scored.end(), false);
    std::fill(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n_elite), true);
  }
  // Elites are carried forward, so the last generation's leader is the best
  // candidate of the whole run under the ranking order.
  result.best = result.history.back().population.front().genome;
  result.best_fitness = result.history.back().best_fitness;
  return result;
}

/// Long-format history: one row per candidate per generation.
template <typename G>
void write_history_csv(std::ostream& out, const SearchResultT<G>& result) {
  using Traits = GenomeTraits<G>;
  out << "generation,candidate_id";
  for (const auto& c : Traits::columns()) out << ',' << c;
  out << ",fitness,cached\n";
  for (std::size_t g = 0; g < result.history.size(); ++g) {
    const auto& pop = result.history[g].population;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      out << g << ',' << i;
      for (const auto& v : Traits::values(pop[i].genome)) out << ',' << v;
      out << ',' << format_real(pop[i].fitness) << ',' << (pop[i].cached ? 1 : 0) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Architecture genome.

struct Genome {
  int depth = 1;
  std::array<int, kMaxDepth> widths = {64, 64, 64, 64, 64};  // first `depth` active
  Activation activation = Activation::kELU;
  double dropout = 0.3;
  bool batch_norm = true;

  ArchitectureSpec decode() const;
  friend bool operator==(const Genome&, const Genome&) = default;
};

inline constexpr int kGenomeGenes = 9;  // depth, 5 widths, activation, dropout, bn

Genome random_genome(Rng& rng);
/// Uniform gene-wise crossover.
Genome crossover(const Genome& a, const Genome& b, Rng& rng);
/// Each gene independently resampled from its domain with probability rate.
Genome mutate(const Genome& g, double rate, Rng& rng);

template <>
struct GenomeTraits<Genome> {
  static Genome sample(Rng& rng) { return random_genome(rng); }
  static Genome crossover(const Genome& a, const Genome& b, Rng& rng) {
    return mortnas::crossover(a, b, rng);
  }
  static Genome mutate(const Genome& g, double rate, Rng& rng) {
    return mortnas::mutate(g, rate, rng);
  }
  static double complexity(const Genome& g) {
    return static_cast<double>(g.decode().parameter_count(kNumFeatures));
  }
  // Genomes differing only in inactive width genes build the same network.
  static ArchitectureSpec key(const Genome& g) { return g.decode(); }
  static std::vector<std::string> columns();
  static std::vector<std::string> values(const Genome& g);
};

using SearchResult = SearchResultT<Genome>;

struct NasOutcome {
  Mlp model;
  TrainHistory history;
  SearchResult search;
};

/// Candidate fitness is the validation AUROC after `candidate_epochs` of
/// training on the training split; the winner is retrained under
/// `train_config` with validation early stopping.
NasOutcome run_nas(const FeatureTable& train, const FeatureTable& validation,
                   const SearchConfig& search, const TrainConfig& train_config);

/// Validation AUROC of one architecture trained for `epochs` without early
/// stopping. NaN when training diverges.
double candidate_fitness(const ArchitectureSpec& spec, const FeatureTable& train,
                         const FeatureTable& validation, int epochs,
                         const TrainConfig& base, std::uint64_t seed);

}  // namespace mortnas
