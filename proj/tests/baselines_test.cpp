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

#include <fstream>

#include "mortnas/baselines.hpp"
#include "mortnas/metrics.hpp"
#include "mortnas/model_io.hpp"
#include "test_util.hpp"

namespace mortnas {
namespace {

struct Data {
  MatrixXd x;
  VectorXd y;
};

// Gaussian features, logistic labels on a fixed linear score.
Data linear_data(int n, int d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Data out;
  out.x = MatrixXd::NullaryExpr(n, d, [&] { return nd(rng); });
  VectorXd beta = VectorXd::LinSpaced(d, 1.0, -0.5) * scale;
  out.y = testing::logistic_labels((out.x * beta).array() - 1.0, rng);
  return out;
}

// Objective evaluated from scratch, used for finite differences.
double objective(const LinearModel& m, const MatrixXd& x, const VectorXd& y, ClassWeights w) {
  double total = 0.0;
  const VectorXd z = m.predict_logits(x);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z(i)));
    total -= (y(i) > 0.5 ? w.positive * std::log(p) : w.negative * std::log1p(-p));
  }
  return total / double(y.size()) + 0.5 * m.l2 * m.weights.squaredNorm();
}

// ---------------------------------------------------------------------------
// Logistic regression

TEST(LogReg, ConvergesToStationaryPoint) {
  const auto d = linear_data(2000, 4, 1);
  const auto m = train_logreg(d.x, d.y, 0.01);
  EXPECT_TRUE(m.converged);
  const auto w = inverse_frequency_weights(d.y);
  // Central differences of the independently computed objective.
  const double h = 1e-6;
  for (int j = 0; j <= 4; ++j) {
    LinearModel up = m, down = m;
    if (j < 4) {
      up.weights(j) += h;
      down.weights(j) -= h;
    } else {
      up.bias += h;
      down.bias -= h;
    }
    EXPECT_NEAR((objective(up, d.x, d.y, w) - objective(down, d.x, d.y, w)) / (2 * h), 0.0, 1e-6) << j;
  }
}

TEST(LogReg, AnalyticGradientMatchesFiniteDifferences) {
  const auto d = linear_data(300, 3, 2);
  LinearModel m;
  m.weights = (VectorXd(3) << 0.3, -0.2, 0.7).finished();
  m.bias = -0.4;
  m.l2 = 0.05;
  const ClassWeights w{0.6, 4.0};
  const VectorXd g = logreg_gradient(m, d.x, d.y, w);
  const double h = 1e-6;
  for (int j = 0; j < 4; ++j) {
    LinearModel up = m, down = m;
    (j < 3 ? up.weights(j) : up.bias) += h;
    (j < 3 ? down.weights(j) : down.bias) -= h;
    EXPECT_NEAR(g(j), (objective(up, d.x, d.y, w) - objective(down, d.x, d.y, w)) / (2 * h), 1e-7);
  }
}

TEST(LogReg, SeparableDataRanksPerfectly) {
  Data d;
  d.x = VectorXd::LinSpaced(40, -2, 2);
  d.y = (d.x.col(0).array() > 0).cast<double>();
  const auto m = train_logreg(d.x, d.y, 1e-3);
  EXPECT_GT(m.weights(0), 0.0);
  EXPECT_EQ(auroc(m.predict_logits(d.x), d.y), 1.0);
}

TEST(LogReg, HeavyPenaltyShrinksToBaseRate) {
  const auto d = linear_data(1000, 3, 3);
  LogRegConfig plain;
  plain.weighting = ClassWeighting::kNone;
  const auto m = train_logreg(d.x, d.y, 1e6, plain);
  EXPECT_LT(m.weights.norm(), 1e-5);
  const double rate = d.y.mean();
  EXPECT_NEAR(m.bias, std::log(rate / (1 - rate)), 1e-4);
  // Inverse-frequency weighting balances the classes, so the bias goes to 0.
  EXPECT_NEAR(train_logreg(d.x, d.y, 1e6).bias, 0.0, 1e-4);
}

TEST(LogReg, DuplicatedFeatureSharesWeight) {
  const auto d = linear_data(1500, 2, 4);
  MatrixXd x(d.x.rows(), 3);
  x << d.x, d.x.col(0);
  const auto m = train_logreg(x, d.y, 0.1);
  EXPECT_NEAR(m.weights(0), m.weights(2), 1e-8);
}

TEST(LogReg, InvalidInputs) {
  const auto d = linear_data(100, 2, 5);
  EXPECT_THROW(train_logreg(d.x, d.y, -1.0), ConfigError);
  EXPECT_THROW(train_logreg(d.x, VectorXd::Zero(100), 0.1), DataError);
  EXPECT_THROW(train_logreg(MatrixXd(0, 2), VectorXd(0), 0.1), DataError);
}

// ---------------------------------------------------------------------------
// Boosted trees

GbdtHyperparams hp(int trees, int depth, double lr) {
  GbdtHyperparams h;
  h.n_estimators = trees;
  h.max_depth = depth;
  h.learning_rate = lr;
  return h;
}

TEST(Gbdt, FirstStumpMatchesBruteForceSplit) {
  const auto d = linear_data(60, 3, 6, 2.0);
  const GbdtHyperparams h = hp(1, 1, 1.0);
  const auto model = train_gbdt(d.x, d.y, h, 1, ClassWeighting::kNone);
  const double p = d.y.mean();
  ASSERT_NEAR(model.initial_logit, std::log(p / (1 - p)), 1e-12);
  const double hess = p * (1 - p), lam = h.l2_reg;
  const double G = (p - d.y.array()).sum(), H = hess * 60;
  double best = -1;
  int bf = -1;
  double bt = 0, bl = 0, br = 0;
  for (int f = 0; f < 3; ++f) {
    std::vector<double> v(d.x.col(f).data(), d.x.col(f).data() + 60);
    std::sort(v.begin(), v.end());
    for (int k = 0; k + 1 < 60; ++k) {
      const double t = 0.5 * (v[k] + v[k + 1]);
      double gl = 0, hl = 0;
      for (int i = 0; i < 60; ++i)
        if (d.x(i, f) <= t) {
          gl += p - d.y(i);
          hl += hess;
        }
      const double gain = gl * gl / (hl + lam) + (G - gl) * (G - gl) / (H - hl + lam) - G * G / (H + lam);
      if (hl >= 1.0 && H - hl >= 1.0 && gain > best) {
        best = gain;
        bf = f;
        bt = t;
        bl = -gl / (hl + lam);
        br = -(G - gl) / (H - hl + lam);
      }
    }
  }
  const auto& root = model.trees.at(0).nodes.at(0);
  EXPECT_EQ(root.feature, bf);
  EXPECT_DOUBLE_EQ(root.threshold, bt);
  EXPECT_NEAR(model.trees[0].nodes[root.left].value, bl, 1e-12);
  EXPECT_NEAR(model.trees[0].nodes[root.right].value, br, 1e-12);
}

TEST(Gbdt, LearnsXor) {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  Data d;
  d.x = MatrixXd::NullaryExpr(600, 2, [&] { return u(rng); });
  d.y = ((d.x.col(0).array() > 0.5) != (d.x.col(1).array() > 0.5)).cast<double>();
  const auto m = train_gbdt(d.x, d.y, hp(60, 3, 0.3), 1);
  EXPECT_GT(auroc(m.predict_logits(d.x), d.y), 0.98);
  // A linear model cannot separate it.
  EXPECT_LT(auroc(train_logreg(d.x, d.y, 0.01).predict_logits(d.x), d.y), 0.65);
}

TEST(Gbdt, ZeroLearningRateKeepsInitialLogit) {
  const auto d = linear_data(200, 3, 8);
  const auto m = train_gbdt(d.x, d.y, hp(5, 2, 0.0), 1, ClassWeighting::kNone);
  const double p = d.y.mean();
  const VectorXd z = m.predict_logits(d.x);
  EXPECT_TRUE((z.array() == m.initial_logit).all());
  EXPECT_NEAR(m.initial_logit, std::log(p / (1 - p)), 1e-12);
}

TEST(Gbdt, TrainingLossNeverIncreases) {
  const auto d = linear_data(500, 4, 9);
  const auto m = train_gbdt(d.x, d.y, hp(40, 3, 0.1), 1);
  const auto w = inverse_frequency_weights(d.y);
  double prev = gbdt_training_loss(m, d.x, d.y, w, 0);
  for (std::size_t t = 1; t <= m.trees.size(); ++t) {
    const double cur = gbdt_training_loss(m, d.x, d.y, w, t);
    EXPECT_LE(cur, prev + 1e-12) << t;
    prev = cur;
  }
}

TEST(Gbdt, DepthRespected) {
  const auto d = linear_data(400, 5, 10);
  for (int depth : {1, 2, 4}) {
    const auto m = train_gbdt(d.x, d.y, hp(10, depth, 0.1), 1);
    int deepest = 0;
    for (const auto& t : m.trees) deepest = std::max(deepest, t.depth());
    EXPECT_LE(deepest, depth);
    EXPECT_EQ(deepest, depth);
  }
}

TEST(Gbdt, SubsamplingDeterministicPerSeed) {
  const auto d = linear_data(300, 3, 11);
  GbdtHyperparams h = hp(15, 3, 0.1);
  h.subsample = 0.6;
  const VectorXd a = train_gbdt(d.x, d.y, h, 5).predict_logits(d.x);
  const VectorXd b = train_gbdt(d.x, d.y, h, 5).predict_logits(d.x);
  const VectorXd c = train_gbdt(d.x, d.y, h, 6).predict_logits(d.x);
  EXPECT_TRUE((a.array() == b.array()).all());
  EXPECT_FALSE((a.array() == c.array()).all());
}

TEST(Gbdt, HyperparameterValidation) {
  const auto d = linear_data(50, 2, 12);
  EXPECT_THROW(train_gbdt(d.x, d.y, hp(0, 3, 0.1), 1), ConfigError);
  EXPECT_THROW(train_gbdt(d.x, d.y, hp(5, 0, 0.1), 1), ConfigError);
  GbdtHyperparams h = hp(5, 2, 0.1);
  h.subsample = 0.0;
  EXPECT_THROW(train_gbdt(d.x, d.y, h, 1), ConfigError);
  EXPECT_FALSE(hp(5, 2, 0.1).in_search_space());
  EXPECT_TRUE(hp(100, 3, 0.1).in_search_space());
}

// ---------------------------------------------------------------------------
// Hyperparameter search

TEST(GbdtGenome, SamplesStayInSearchSpace) {
  Rng rng(13);
  using T = GenomeTraits<GbdtHyperparams>;
  for (int i = 0; i < 2000; ++i) {
    const auto g = T::mutate(T::crossover(T::sample(rng), T::sample(rng), rng), 0.3, rng);
    EXPECT_TRUE(g.in_search_space());
    EXPECT_NO_THROW(g.validate());
  }
}

TEST(GbdtGenome, SearchDrivesLearningRateDown) {
  SearchConfig c;
  c.seed = 3;
  c.threads = 1;
  c.memoize = false;
  int calls = 0;
  const auto r = evolve<GbdtHyperparams>(c, [&](const GbdtHyperparams& g, std::uint64_t) {
    ++calls;
    return -g.learning_rate;
  });
  // Elites carry their scores: 20 initial, then 15 children per generation.
  EXPECT_EQ(calls, 20 + 14 * 15);
  EXPECT_EQ(r.evaluations, calls);
  EXPECT_LT(r.best.learning_rate, 0.003);
}

TEST(L2Genome, RangeAndMapping) {
  Rng rng(14);
  using T = GenomeTraits<L2Genome>;
  for (int i = 0; i < 1000; ++i) {
    const auto g = T::mutate(T::sample(rng), 0.5, rng);
    EXPECT_GE(g.log10_l2, -6.0);
    EXPECT_LE(g.log10_l2, 1.0);
  }
  EXPECT_DOUBLE_EQ(L2Genome{-2.0}.l2(), 0.01);
}

struct Tables {
  FeatureTable train, validation;
  Encoder encoder;
};

const Tables& tables() {
  static const Tables t = [] {
    auto cfg = SyntheticConfig::table_defaults().scaled_to(5000);
    cfg.seed = 31;
    const auto split = temporal_split(generate_synthetic(cfg));
    Tables out;
    out.encoder = Encoder::fit(split.train);
    out.train = out.encoder.featurize(split.train);
    out.validation = out.encoder.featurize(split.validation);
    return out;
  }();
  return t;
}

SearchConfig tiny_budget(std::uint64_t seed) {
  SearchConfig c;
  c.population_size = 4;
  c.generations = 2;
  c.elite_count = 2;
  c.seed = seed;
  return c;
}

TEST(Tune, LogRegIsDeterministicAndInRange) {
  const auto& t = tables();
  const auto a = tune_logreg(t.train, t.validation, tiny_budget(1));
  const auto b = tune_logreg(t.train, t.validation, tiny_budget(1));
  EXPECT_EQ(a.best, b.best);
  EXPECT_GE(a.best.log10_l2, -6.0);
  EXPECT_LE(a.best.log10_l2, 1.0);
  EXPECT_GT(a.search.best_fitness, 0.55);
}

TEST(Tune, GbdtReturnsSearchSpaceMember) {
  const auto& t = tables();
  const auto r = tune_gbdt(t.train, t.validation, tiny_budget(2));
  EXPECT_TRUE(r.best.in_search_space());
  EXPECT_EQ(r.search.history.size(), 2U);
  EXPECT_GT(r.search.best_fitness, 0.5);
}

TEST(Tune, EmptyValidationRejected) {
  const auto& t = tables();
  EXPECT_THROW(tune_gbdt(t.train, t.validation.subset({}), tiny_budget(1)), DataError);
  EXPECT_THROW(tune_logreg(t.train, t.validation.subset({}), tiny_budget(1)), DataError);
}

// ---------------------------------------------------------------------------
// Model files

std::vector<TrainedModel> fitted_models() {
  const auto& t = tables();
  std::vector<TrainedModel> out;
  TrainedModel lin;
  lin.model = train_logreg(t.train.x, t.train.y, 0.01);
  lin.encoder = t.encoder;
  lin.calibrator = PlattCalibrator{0.4, -0.3};
  out.push_back(lin);
  TrainedModel trees;
  trees.model = train_gbdt(t.train.x, t.train.y, hp(5, 3, 0.2), 1);
  trees.encoder = t.encoder;
  out.push_back(trees);
  ArchitectureSpec spec;
  spec.hidden_widths = {32, 16};
  spec.activation = Activation::kTanh;
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.early_stopping = false;
  tc.patience = 1;
  TrainedModel net;
  net.model = train_mlp(init_mlp(spec, kNumFeatures, 1), t.train.x, t.train.y, MatrixXd(0, kNumFeatures),
                        VectorXd(0), tc)
                  .model;
  net.encoder = t.encoder;
  out.push_back(net);
  return out;
}

TEST(ModelIo, JsonRoundTripIsExact) {
  const auto& t = tables();
  for (const auto& m : fitted_models()) {
    const auto j = model_to_json(m);
    const auto back = model_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.kind(), m.kind());
    EXPECT_EQ(back.encoder, m.encoder);
    EXPECT_EQ(back.calibrator.has_value(), m.calibrator.has_value());
    EXPECT_TRUE((back.predict_proba(t.validation.x).array() == m.predict_proba(t.validation.x).array()).all())
        << model_kind_name(m.kind());
  }
}

TEST(ModelIo, FileRoundTrip) {
  testing::TempDir dir("model_io");
  const auto models = fitted_models();
  save_model(models[0], dir.path / "m.json");
  const auto back = load_model(dir.path / "m.json");
  EXPECT_EQ(back.kind(), ModelKind::kLogReg);
  EXPECT_THROW(load_model(dir.path / "absent.json"), DataError);
  std::ofstream(dir.path / "junk.json") << "{not json";
  EXPECT_THROW(load_model(dir.path / "junk.json"), DataError);
}

TEST(ModelIo, RejectsForeignEnvelopes) {
  const auto good = model_to_json(fitted_models()[0]);
  auto j = good;
  j["format"] = "something-else";
  EXPECT_THROW(model_from_json(j), DataError);
  j = good;
  j["version"] = kModelFormatVersion + 1;
  EXPECT_THROW(model_from_json(j), DataError);
  j = good;
  j["feature_order_hash"] = "0000";
  EXPECT_THROW(model_from_json(j), DataError);
  j = good;
  j["kind"] = "forest";
  EXPECT_THROW(model_from_json(j), DataError);
  j = good;
  j.erase("model");
  EXPECT_THROW(model_from_json(j), DataError);
}

TEST(ModelIo, CalibratorChangesOnlyCalibratedOutput) {
  const auto& t = tables();
  auto m = fitted_models()[0];
  const VectorXd raw = m.predict_raw_proba(t.validation.x);
  const VectorXd cal = m.predict_proba(t.validation.x);
  EXPECT_FALSE(raw.isApprox(cal));
  EXPECT_EQ(auroc(raw, t.validation.y), auroc(cal, t.validation.y));
  m.calibrator.reset();
  EXPECT_TRUE((m.predict_proba(t.validation.x).array() == raw.array()).all());
}

}  // namespace
}  // namespace mortnas
