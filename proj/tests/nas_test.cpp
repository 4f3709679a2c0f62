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

#include <gtest/gtest.h>

#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "mortnas/nas.hpp"
#include "test_util.hpp"

namespace mortnas {
namespace {

long params(const Genome& g) { return g.decode().parameter_count(kNumFeatures); }

SearchConfig small_search(std::uint64_t seed) {
  SearchConfig c;
  c.population_size = 12;
  c.generations = 6;
  c.elite_count = 3;
  c.seed = seed;
  c.threads = 1;
  return c;
}

// ---------------------------------------------------------------------------
// Operators

TEST(Genome, RandomGenesCoverTheirDomains) {
  Rng rng(1);
  const int n = 20000;
  std::map<int, int> width_freq, depth_freq;
  std::map<Activation, int> act_freq;
  double dropout_sum = 0.0;
  int bn = 0;
  for (int i = 0; i < n; ++i) {
    const Genome g = random_genome(rng);
    ++width_freq[g.widths[0]];
    ++depth_freq[g.depth];
    ++act_freq[g.activation];
    dropout_sum += g.dropout;
    bn += g.batch_norm;
    ASSERT_GE(g.dropout, 0.0);
    ASSERT_LE(g.dropout, 0.5);
  }
  ASSERT_EQ(width_freq.size(), 4U);
  for (auto [w, c] : width_freq) {
    EXPECT_GE(c / double(n), 0.2) << w;
    EXPECT_LE(c / double(n), 0.3) << w;
  }
  ASSERT_EQ(depth_freq.size(), 5U);
  for (auto [d, c] : depth_freq) EXPECT_NEAR(c / double(n), 0.2, 0.02) << d;
  ASSERT_EQ(act_freq.size(), 4U);
  EXPECT_NEAR(dropout_sum / n, 0.25, 0.01);
  EXPECT_NEAR(bn / double(n), 0.5, 0.02);
}

TEST(Genome, DecodedSpecsAreAlwaysValid) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    Genome g = random_genome(rng);
    g = mutate(crossover(g, random_genome(rng), rng), 0.5, rng);
    const auto spec = g.decode();
    EXPECT_NO_THROW(spec.validate());
    EXPECT_EQ(static_cast<int>(spec.hidden_widths.size()), g.depth);
  }
}

TEST(Genome, CrossoverOfIdenticalParentsIsIdentity) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Genome a = random_genome(rng);
    EXPECT_EQ(crossover(a, a, rng), a);
  }
}

TEST(Genome, CrossoverTakesEachGeneFromEitherParentEvenly) {
  Rng rng(4);
  Genome a, b;
  a.depth = 1;
  b.depth = 5;
  a.widths.fill(16);
  b.widths.fill(128);
  const int n = 10000;
  int from_a = 0;
  int width_from_a = 0;
  for (int i = 0; i < n; ++i) {
    const Genome c = crossover(a, b, rng);
    ASSERT_TRUE(c.depth == 1 || c.depth == 5);
    from_a += c.depth == 1;
    width_from_a += c.widths[2] == 16;
  }
  EXPECT_NEAR(from_a / double(n), 0.5, 0.02);
  EXPECT_NEAR(width_from_a / double(n), 0.5, 0.02);
}

TEST(Genome, ZeroRateMutationIsIdentity) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Genome g = random_genome(rng);
    EXPECT_EQ(mutate(g, 0.0, rng), g);
  }
}

TEST(Genome, MutationChangesGenesAtTheExpectedRate) {
  // A resample lands on the old value with probability 1/|domain|.
  Rng rng(6);
  const int n = 40000;
  int depth = 0, width = 0, act = 0, drop = 0, bn = 0;
  for (int i = 0; i < n; ++i) {
    const Genome g = random_genome(rng);
    const Genome m = mutate(g, 0.1, rng);
    depth += m.depth != g.depth;
    width += m.widths[0] != g.widths[0];
    act += m.activation != g.activation;
    drop += m.dropout != g.dropout;
    bn += m.batch_norm != g.batch_norm;
  }
  EXPECT_NEAR(depth / double(n), 0.1 * 4 / 5, 0.01);
  EXPECT_NEAR(width / double(n), 0.1 * 3 / 4, 0.01);
  EXPECT_NEAR(act / double(n), 0.1 * 3 / 4, 0.01);
  EXPECT_NEAR(drop / double(n), 0.1, 0.01);
  EXPECT_NEAR(bn / double(n), 0.1 / 2, 0.01);
}

TEST(Genome, InactiveWidthsShareAMemoKey) {
  Genome a;
  a.depth = 2;
  Genome b = a;
  b.widths[4] = 16;
  EXPECT_NE(a, b);
  EXPECT_EQ(GenomeTraits<Genome>::key(a), GenomeTraits<Genome>::key(b));
}

TEST(SearchConfig, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  c.elite_count = c.population_size;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.mutation_rate = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.generations = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.population_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Generational loop

TEST(Evolve, PopulationSizeAndHistoryShape) {
  const auto r = evolve<Genome>(small_search(1), [](const Genome& g, std::uint64_t) {
    return -double(params(g));
  });
  ASSERT_EQ(r.history.size(), 6U);
  for (const auto& gen : r.history) {
    EXPECT_EQ(gen.population.size(), 12U);
    for (std::size_t i = 1; i < gen.population.size(); ++i)
      EXPECT_GE(gen.population[i - 1].fitness, gen.population[i].fitness);
  }
}

TEST(Evolve, BestFitnessNeverDecreases) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = evolve<Genome>(small_search(seed), [](const Genome& g, std::uint64_t s) {
      // Noisy but bounded objective; elites keep their scores.
      return -double(params(g)) + double(s % 97);
    });
    for (std::size_t g = 1; g < r.history.size(); ++g)
      EXPECT_GE(r.history[g].best_fitness, r.history[g - 1].best_fitness);
    EXPECT_EQ(r.best_fitness, r.history.back().best_fitness);
  }
}

TEST(Evolve, MinimizingParametersFindsSmallestNetwork) {
  SearchConfig c;
  c.seed = 11;
  c.threads = 1;
  const auto r = evolve<Genome>(c, [](const Genome& g, std::uint64_t) { return -double(params(g)); });
  EXPECT_EQ(r.best.depth, 1);
  EXPECT_EQ(r.best.widths[0], 16);
  EXPECT_FALSE(r.best.batch_norm);
}

TEST(Evolve, ConstantFitnessPrefersLowerComplexity) {
  const auto r = evolve<Genome>(small_search(2), [](const Genome&, std::uint64_t) { return 0.7; });
  for (const auto& gen : r.history)
    for (std::size_t i = 1; i < gen.population.size(); ++i)
      EXPECT_LE(params(gen.population[i - 1].genome), params(gen.population[i].genome));
}

TEST(Evolve, NanFitnessBecomesNegativeInfinityWithWarning) {
  testing::WarningCapture warnings;
  const auto r = evolve<Genome>(small_search(3), [](const Genome& g, std::uint64_t) {
    return g.depth == 3 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
  });
  bool saw = false;
  for (const auto& gen : r.history)
    for (const auto& c : gen.population)
      if (c.genome.depth == 3) {
        EXPECT_EQ(c.fitness, -std::numeric_limits<double>::infinity());
        saw = true;
      }
  EXPECT_TRUE(saw);
  EXPECT_TRUE(warnings.contains("NaN"));
  EXPECT_NE(r.best.depth, 3);
}

TEST(Evolve, MemoizationEvaluatesEachArchitectureOnce) {
  std::map<ArchitectureSpec, int> calls;
  std::mutex mu;
  auto c = small_search(4);
  c.mutation_rate = 0.05;  // plenty of repeats
  const auto r = evolve<Genome>(c, [&](const Genome& g, std::uint64_t) {
    std::lock_guard lock(mu);
    ++calls[g.decode()];
    return -double(params(g));
  });
  int total = 0;
  for (const auto& [k, n] : calls) {
    EXPECT_EQ(n, 1) << k.describe();
    total += n;
  }
  EXPECT_EQ(total, r.evaluations);
  EXPECT_GT(r.cache_hits, 0);
}

TEST(Evolve, ElitesAreNotReevaluatedWithoutMemo) {
  auto c = small_search(5);
  c.memoize = false;
  int calls = 0;
  const auto r = evolve<Genome>(c, [&](const Genome& g, std::uint64_t) {
    ++calls;
    return -double(params(g));
  });
  EXPECT_EQ(calls, r.evaluations);
  EXPECT_EQ(calls, c.population_size + (c.generations - 1) * (c.population_size - c.elite_count));
  for (std::size_t g = 1; g < r.history.size(); ++g) {
    int cached = 0;
    for (const auto& cand : r.history[g].population) cached += cand.cached;
    EXPECT_EQ(cached, c.elite_count);
  }
}

TEST(Evolve, DeterministicAcrossThreadCounts) {
  auto fit = [](const Genome& g, std::uint64_t s) {
    return -double(params(g)) / 1000.0 + double(s % 1000) / 1e6;
  };
  auto c = small_search(6);
  const auto a = evolve<Genome>(c, fit);
  c.threads = 4;
  const auto b = evolve<Genome>(c, fit);
  std::ostringstream sa, sb;
  write_history_csv(sa, a);
  write_history_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.best, b.best);
}

TEST(Evolve, HistoryCsvLayout) {
  const auto r = evolve<Genome>(small_search(7), [](const Genome& g, std::uint64_t) {
    return -double(params(g));
  });
  std::ostringstream out;
  write_history_csv(out, r);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "generation,candidate_id,depth,width_1,width_2,width_3,width_4,width_5,activation,"
            "dropout,batch_norm,parameters,fitness,cached");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 13) << line;
  }
  EXPECT_EQ(rows, 6 * 12);
}

// ---------------------------------------------------------------------------
// Architecture search on generated data

struct Splits {
  FeatureTable train, validation;
};

const Splits& small_splits() {
  static const Splits s = [] {
    auto cfg = SyntheticConfig::table_defaults().scaled_to(6000);
    cfg.seed = 21;
    const auto split = temporal_split(generate_synthetic(cfg));
    const auto enc = Encoder::fit(split.train);
    return Splits{enc.featurize(split.train), enc.featurize(split.validation)};
  }();
  return s;
}

TEST(CandidateFitness, IsAValidationAuroc) {
  const auto& s = small_splits();
  ArchitectureSpec spec;
  spec.hidden_widths = {16};
  const double f = candidate_fitness(spec, s.train, s.validation, 2, TrainConfig{}, 9);
  EXPECT_GT(f, 0.5);
  EXPECT_LT(f, 1.0);
  EXPECT_EQ(f, candidate_fitness(spec, s.train, s.validation, 2, TrainConfig{}, 9));
}

TEST(RunNas, SmallSearchIsDeterministic) {
  const auto& s = small_splits();
  SearchConfig search;
  search.population_size = 4;
  search.generations = 2;
  search.elite_count = 2;
  search.candidate_epochs = 1;
  search.seed = 5;
  TrainConfig train;
  train.max_epochs = 3;
  train.patience = 2;
  train.seed = 6;
  const auto a = run_nas(s.train, s.validation, search, train);
  const auto b = run_nas(s.train, s.validation, search, train);
  EXPECT_EQ(a.search.best, b.search.best);
  EXPECT_EQ(a.search.best_fitness, b.search.best_fitness);
  EXPECT_EQ(a.model.spec, a.search.best.decode());
  EXPECT_TRUE((predict_logits(a.model, s.validation.x).array() ==
               predict_logits(b.model, s.validation.x).array())
                  .all());
  EXPECT_GE(a.history.epochs_run, 1);
}

TEST(RunNas, EmptyValidationRejected) {
  const auto& s = small_splits();
  EXPECT_THROW(run_nas(s.train, s.validation.subset({}), small_search(1), TrainConfig{}), DataError);
}

}  // namespace
}  // namespace mortnas
