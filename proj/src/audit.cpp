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

#include "mortnas/audit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mortnas/dataset.hpp"
#include "mortnas/text.hpp"

namespace mortnas {

// ---------------------------------------------------------------------------
// Subgroups.

SubgroupReport subgroup_eval(const VecRef& probs, const FeatureTable& data, Grouping grouping) {
  const auto n = data.rows();
  if (probs.size() != n) throw std::invalid_argument("subgroup_eval: length mismatch");
  if (n == 0) throw DataError("subgroup_eval: empty evaluation set");

  std::map<int, std::vector<Eigen::Index>> members;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int key = grouping == Grouping::kDivision
                        ? static_cast<int>(data.division[static_cast<std::size_t>(i)])
                        : (data.urban[static_cast<std::size_t>(i)] ? 1 : 0);
    members[key].push_back(i);
  }

  SubgroupReport report;
  report.grouping = grouping;
  for (const auto& [key, idx] : members) {
    SubgroupRow row;
    row.group = grouping == Grouping::kDivision ? std::string(division_name(static_cast<Division>(key)))
                                                : (key ? "Urban" : "Rural");
    const auto m = static_cast<Eigen::Index>(idx.size());
    VectorXd p(m), y(m);
    double wealth = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      p(k) = probs(idx[k]);
      y(k) = data.y(idx[k]);
      wealth += data.wealth_score(idx[k]);
    }
    row.n = idx.size();
    row.deaths = static_cast<std::size_t>((y.array() > 0.5).count());
    row.rate_per_mille = 1000.0 * static_cast<double>(row.deaths) / static_cast<double>(row.n);
    if (row.deaths > 0 && row.deaths < row.n)
      row.auroc = auroc(p, y);
    else
      warn("subgroup_eval: group " + row.group + " has a single outcome class; AUROC omitted");
    row.brier = brier(p, y);
    row.wealth_mean = wealth / static_cast<double>(m);
    report.rows.push_back(std::move(row));
  }
  try {
    report.gradient_r = equity_gradient(report);
  } catch (const DataError& e) {
    warn(std::string("subgroup_eval: equity gradient unavailable: ") + e.what());
  }
  return report;
}

double equity_gradient(const SubgroupReport& report) {
  std::vector<double> wealth, disc;
  for (const auto& r : report.rows) {
    if (!r.auroc) continue;
    wealth.push_back(r.wealth_mean);
    disc.push_back(*r.auroc);
  }
  if (wealth.size() < 3) throw DataError("equity_gradient: need at least 3 groups with an AUROC");
  const auto k = static_cast<Eigen::Index>(wealth.size());
  return pearson_r(Eigen::Map<const VectorXd>(wealth.data(), k),
                   Eigen::Map<const VectorXd>(disc.data(), k));
}

void write_subgroup_csv(std::ostream& out, const SubgroupReport& report) {
  out << (report.grouping == Grouping::kDivision ? "division" : "residence")
      << ",n,deaths,rate_per_1000,auroc,brier,wealth_mean\n";
  for (const auto& r : report.rows) {
    out << r.group << ',' << r.n << ',' << r.deaths << ',' << format_real(r.rate_per_mille) << ','
        << (r.auroc ? format_real(*r.auroc) : "") << ',' << format_real(r.brier) << ','
        << format_real(r.wealth_mean) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Bootstrap.

std::string_view bootstrap_metric_name(BootstrapMetric m) {
  switch (m) {
    case BootstrapMetric::kAuroc: return "auroc";
    case BootstrapMetric::kWeightedAuroc: return "weighted_auroc";
    case BootstrapMetric::kBrier: return "brier";
  }
  return "?";
}

SurveyDesign SurveyDesign::from(const FeatureTable& t) {
  return {t.psu_id, t.stratum_id, t.sampling_weight};
}

namespace {

double evaluate_metric(BootstrapMetric metric, const VectorXd& s, const VectorXd& y,
                       const VectorXd& w) {
  switch (metric) {
    case BootstrapMetric::kAuroc: return auroc(s, y);
    case BootstrapMetric::kWeightedAuroc: return weighted_auroc(s, y, w);
    case BootstrapMetric::kBrier: return brier(s, y);
  }
  return 0.0;
}

bool needs_both_classes(BootstrapMetric m) { return m != BootstrapMetric::kBrier; }

// Linear-interpolation quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapCI design_bootstrap(const VecRef& scores, const VecRef& labels, const SurveyDesign& design,
                             BootstrapMetric metric, int replicates, std::uint64_t seed,
                             int threads) {
  const auto n = scores.size();
  if (labels.size() != n || static_cast<Eigen::Index>(design.psu_id.size()) != n ||
      static_cast<Eigen::Index>(design.stratum_id.size()) != n)
    throw std::invalid_argument("design_bootstrap: length mismatch");
  if (metric == BootstrapMetric::kWeightedAuroc && design.weight.size() != n)
    throw std::invalid_argument("design_bootstrap: weights required for weighted_auroc");
  if (replicates < 1) throw ConfigError("design_bootstrap: replicates must be >= 1");
  if (n == 0) throw DataError("design_bootstrap: empty input");

  // stratum -> psu -> rows, all in ascending id order
  std::map<std::int64_t, std::map<std::int64_t, std::vector<Eigen::Index>>> layout;
  for (Eigen::Index i = 0; i < n; ++i)
    layout[design.stratum_id[static_cast<std::size_t>(i)]][design.psu_id[static_cast<std::size_t>(i)]]
        .push_back(i);
  std::size_t total_psus = 0;
  for (const auto& [s, psus] : layout) total_psus += psus.size();
  const bool degenerate = total_psus == 1;
  if (!degenerate)
    for (const auto& [s, psus] : layout)
      if (psus.size() < 2)
        throw DataError("design_bootstrap: stratum " + std::to_string(s) +
                        " has a single PSU; variance is not estimable");

  std::vector<std::vector<std::vector<Eigen::Index>>> clusters;
  for (const auto& [s, psus] : layout) {
    auto& c = clusters.emplace_back();
    for (const auto& [p, rows] : psus) c.push_back(rows);
  }

  const VectorXd s_all = scores, y_all = labels;
  const VectorXd w_all = metric == BootstrapMetric::kWeightedAuroc ? VectorXd(design.weight)
                                                                   : VectorXd::Ones(n);

  BootstrapCI ci;
  ci.metric = metric;
  ci.replicates = replicates;
  ci.seed = seed;
  ci.degenerate = degenerate;
  ci.point = evaluate_metric(metric, s_all, y_all, w_all);

  std::vector<double> values(static_cast<std::size_t>(replicates), 0.0);
  std::vector<char> valid(static_cast<std::size_t>(replicates), 0);
  parallel_for(values.size(), threads, [&](std::size_t b) {
    Rng rng(derive_seed(seed, {b}));
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (const auto& psus : clusters) {
      std::uniform_int_distribution<std::size_t> pick(0, psus.size() - 1);
      for (std::size_t k = 0; k < psus.size(); ++k) {
        const auto& chosen = psus[pick(rng)];
        rows.insert(rows.end(), chosen.begin(), chosen.end());
      }
    }
    const auto m = static_cast<Eigen::Index>(rows.size());
    VectorXd s(m), y(m), w(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      s(k) = s_all(rows[k]);
      y(k) = y_all(rows[k]);
      w(k) = w_all(rows[k]);
    }
    if (needs_both_classes(metric)) {
      const auto pos = (y.array() > 0.5).count();
      if (pos == 0 || pos == m) return;
    }
    values[b] = evaluate_metric(metric, s, y, w);
    valid[b] = 1;
  });

  std::vector<double> kept;
  for (std::size_t b = 0; b < values.size(); ++b)
    if (valid[b]) kept.push_back(values[b]);
  ci.skipped = replicates - static_cast<int>(kept.size());
  if (kept.empty()) throw RuntimeFailure("design_bootstrap: every replicate was single-class");
  if (ci.skipped > 0.05 * replicates)
    warn("design_bootstrap: skipped " + std::to_string(ci.skipped) + " of " +
         std::to_string(replicates) + " single-class replicates");
  std::sort(kept.begin(), kept.end());
  ci.lower = quantile(kept, 0.025);
  ci.upper = quantile(kept, 0.975);
  if (degenerate) warn("design_bootstrap: a single PSU; the interval has zero width");
  if (ci.point < ci.lower || ci.point > ci.upper)
    warn("design_bootstrap: point estimate lies outside its percentile interval");
  return ci;
}

// ---------------------------------------------------------------------------
// Permutation importance.

double permutation_importance(const Predictor& model, const MatrixXd& x, const VecRef& y,
                              const std::vector<int>& columns, int repeats, std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("permutation_importance: repeats must be >= 1");
  const double base = auroc(model(x), y);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(x.rows()));
  double total = 0.0;
  MatrixXd shuffled = x;
  for (int r = 0; r < repeats; ++r) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int c : columns)
      for (Eigen::Index i = 0; i < x.rows(); ++i) shuffled(i, c) = x(perm[i], c);
    total += base - auroc(model(shuffled), y);
    for (int c : columns) shuffled.col(c) = x.col(c);
  }
  return total / repeats;
}

std::vector<ImportanceEntry> permutation_importance_groups(const Predictor& model,
                                                           const MatrixXd& x, const VecRef& y,
                                                           int repeats, std::uint64_t seed) {
  std::vector<ImportanceEntry> out;
  const auto groups = feature_groups();
  for (std::size_t g = 0; g < groups.size(); ++g)
    out.push_back({groups[g].name, permutation_importance(model, x, y, groups[g].columns, repeats,
                                                          derive_seed(seed, {g}))});
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.mean_drop > b.mean_drop; });
  return out;
}

// ---------------------------------------------------------------------------
// Kernel SHAP.

namespace {

using Mask = std::vector<char>;

// v(S) for each mask: mean output over background rows with the instance's
// values placed on S.
VectorXd coalition_values(const Predictor& model, const VecRef& instance,
                          const MatrixXd& background, const std::vector<Mask>& masks) {
  const Eigen::Index nb = background.rows();
  const Eigen::Index d = background.cols();
  const std::size_t chunk = std::max<std::size_t>(1, 65536 / static_cast<std::size_t>(nb));
  VectorXd v(static_cast<Eigen::Index>(masks.size()));
  for (std::size_t start = 0; start < masks.size(); start += chunk) {
    const std::size_t stop = std::min(masks.size(), start + chunk);
    MatrixXd batch(static_cast<Eigen::Index>(stop - start) * nb, d);
    for (std::size_t m = start; m < stop; ++m) {
      auto block = batch.middleRows(static_cast<Eigen::Index>(m - start) * nb, nb);
      block = background;
      for (Eigen::Index j = 0; j < d; ++j)
        if (masks[m][static_cast<std::size_t>(j)]) block.col(j).setConstant(instance(j));
    }
    const VectorXd out = model(batch);
    for (std::size_t m = start; m < stop; ++m)
      v(static_cast<Eigen::Index>(m)) =
          out.segment(static_cast<Eigen::Index>(m - start) * nb, nb).mean();
  }
  return v;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Visits every size-k subset of {0..d-1} in lexicographic order.
template <typename F>
void for_each_subset(int d, int k, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == d - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace

MatrixXd sample_rows(const MatrixXd& x, int n, std::uint64_t seed) {
  if (n <= 0) throw ConfigError("sample_rows: n must be positive");
  if (n >= x.rows()) return x;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  MatrixXd out(n, x.cols());
  for (int k = 0; k < n; ++k) out.row(k) = x.row(idx[static_cast<std::size_t>(k)]);
  return out;
}

ShapExplanation kernel_shap(const Predictor& model, const VecRef& instance,
                            const MatrixXd& background, int budget, std::uint64_t seed) {
  const auto d = static_cast<int>(background.cols());
  if (background.rows() == 0) throw ConfigError("kernel_shap: background is empty");
  if (instance.size() != d) throw std::invalid_argument("kernel_shap: dimension mismatch");
  if (budget < d + 2) throw ConfigError("kernel_shap: budget must be >= features + 2");

  ShapExplanation ex;
  {
    std::vector<Mask> ends{Mask(static_cast<std::size_t>(d), 0), Mask(static_cast<std::size_t>(d), 1)};
    const VectorXd v = coalition_values(model, instance, background, ends);
    ex.base_value = v(0);
    ex.model_output = v(1);
  }
  const double delta = ex.model_output - ex.base_value;
  if (d == 1) {
    ex.attributions = VectorXd::Constant(1, delta);
    ex.exhaustive = true;
    return ex;
  }

  // Total kernel mass per coalition size s (1..d-1) is proportional to
  // (d-1) / (s (d-s)); spread evenly over the C(d, s) coalitions of that size.
  std::vector<double> size_mass(static_cast<std::size_t>(d), 0.0);
  double mass_total = 0.0;
  for (int s = 1; s < d; ++s) mass_total += size_mass[static_cast<std::size_t>(s)] = (d - 1.0) / (s * (d - s));
  for (auto& m : size_mass) m /= mass_total;

  std::vector<Mask> masks;
  std::vector<double> weights;
  int remaining = budget;
  double mass_left = 1.0;
  int s = 1;
  for (; s <= d / 2; ++s) {
    const int t = d - s;
    const bool paired = s != t;
    const double count = binomial(d, s) * (paired ? 2.0 : 1.0);
    if (count > remaining) break;
    const double mass = size_mass[static_cast<std::size_t>(s)] + (paired ? size_mass[static_cast<std::size_t>(t)] : 0.0);
    const double w = mass / count;
    for_each_subset(d, s, [&](const std::vector<int>& idx) {
      Mask m(static_cast<std::size_t>(d), 0);
      for (int j : idx) m[static_cast<std::size_t>(j)] = 1;
      masks.push_back(m);
      weights.push_back(w);
      if (paired) {
        for (auto& c : m) c = !c;
        masks.push_back(std::move(m));
        weights.push_back(w);
      }
    });
    remaining -= static_cast<int>(count);
    mass_left -= mass;
  }
  ex.exhaustive = s > d / 2;

  if (!ex.exhaustive && remaining >= 2) {
    // Sample the unenumerated sizes in complementary pairs.
    std::vector<int> sizes;
    std::vector<double> probs;
    for (int k = s; k <= d / 2; ++k) {
      sizes.push_back(k);
      probs.push_back(size_mass[static_cast<std::size_t>(k)] +
                      (k != d - k ? size_mass[static_cast<std::size_t>(d - k)] : 0.0));
    }
    Rng rng(seed);
    std::discrete_distribution<std::size_t> pick_size(probs.begin(), probs.end());
    std::map<Mask, std::size_t> seen;
    const int pairs = remaining / 2;
    const double w = mass_left / (2.0 * pairs);
    std::vector<int> order(static_cast<std::size_t>(d));
    for (int p = 0; p < pairs; ++p) {
      const int k = sizes[pick_size(rng)];
      std::iota(order.begin(), order.end(), 0);
      for (int j = 0; j < k; ++j) {
        std::uniform_int_distribution<int> pick(j, d - 1);
        std::swap(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(pick(rng))]);
      }
      Mask m(static_cast<std::size_t>(d), 0);
      for (int j = 0; j < k; ++j) m[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = 1;
      Mask c = m;
      for (auto& b : c) b = !b;
      for (Mask* mm : {&m, &c}) {
        if (auto it = seen.find(*mm); it != seen.end()) {
          weights[it->second] += w;
        } else {
          seen.emplace(*mm, masks.size());
          masks.push_back(*mm);
          weights.push_back(w);
        }
      }
    }
  }
  ex.coalitions = static_cast<int>(masks.size());

  const VectorXd v = coalition_values(model, instance, background, masks);
  // Efficiency is imposed by eliminating the last attribution:
  //   v(S) - base - z_d * delta = sum_{j<d} (z_j - z_d) phi_j
  const auto rows = static_cast<Eigen::Index>(masks.size());
  MatrixXd a(rows, d - 1);
  VectorXd b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& m = masks[static_cast<std::size_t>(r)];
    const double zd = m[static_cast<std::size_t>(d - 1)];
    const double sw = std::sqrt(weights[static_cast<std::size_t>(r)]);
    for (int j = 0; j + 1 < d; ++j) a(r, j) = sw * (m[static_cast<std::size_t>(j)] - zd);
    b(r) = sw * (v(r) - ex.base_value - zd * delta);
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> solver(a);
  if (solver.rank() < d - 1)
    warn("kernel_shap: coalition system is rank deficient; using the minimum-norm solution "
         "(increase the budget)");
  const VectorXd head = solver.solve(b);
  ex.attributions.resize(d);
  ex.attributions.head(d - 1) = head;
  ex.attributions(d - 1) = delta - head.sum();
  return ex;
}

ShapRanking shap_ranking(const Predictor& model, const MatrixXd& instances,
                         const MatrixXd& background, int budget, std::uint64_t seed,
                         int threads) {
  if (instances.rows() == 0) throw ConfigError("shap_ranking: no instances to explain");
  const auto d = instances.cols();
  ShapRanking out;
  out.explanations.resize(static_cast<std::size_t>(instances.rows()));
  parallel_for(out.explanations.size(), threads, [&](std::size_t i) {
    out.explanations[i] = kernel_shap(model, instances.row(static_cast<Eigen::Index>(i)).transpose(),
                                      background, budget, derive_seed(seed, {i}));
  });

  std::vector<std::string> names;
  std::vector<FeatureGroup> groups;
  if (d == kNumFeatures) {
    for (const auto& f : feature_layout()) names.emplace_back(f.name);
    groups = feature_groups();
  } else {
    for (Eigen::Index j = 0; j < d; ++j) {
      names.push_back("x" + std::to_string(j));
      groups.push_back({names.back(), {static_cast<int>(j)}});
    }
  }

  const double count = static_cast<double>(instances.rows());
  VectorXd per_feature = VectorXd::Zero(d);
  VectorXd per_group = VectorXd::Zero(static_cast<Eigen::Index>(groups.size()));
  for (const auto& ex : out.explanations) {
    per_feature += ex.attributions.cwiseAbs();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double sum = 0.0;
      for (int c : groups[g].columns) sum += ex.attributions(c);
      per_group(static_cast<Eigen::Index>(g)) += std::abs(sum);
    }
  }
  for (Eigen::Index j = 0; j < d; ++j)
    out.per_feature.push_back({names[static_cast<std::size_t>(j)], per_feature(j) / count});
  for (std::size_t g = 0; g < groups.size(); ++g)
    out.per_group.push_back({groups[g].name, per_group(static_cast<Eigen::Index>(g)) / count});
  auto by_mean = [](const ShapRankEntry& a, const ShapRankEntry& b) { return a.mean_abs > b.mean_abs; };
  std::stable_sort(out.per_feature.begin(), out.per_feature.end(), by_mean);
  std::stable_sort(out.per_group.begin(), out.per_group.end(), by_mean);
  return out;
}

void write_shap_csv(std::ostream& out, const MatrixXd& instances, const ShapRanking& ranking) {
  const bool named = instances.cols() == kNumFeatures;
  out << "instance_id,feature,value,attribution\n";
  for (std::size_t i = 0; i < ranking.explanations.size(); ++i) {
    const auto& ex = ranking.explanations[i];
    for (Eigen::Index j = 0; j < instances.cols(); ++j) {
      out << i << ','
          << (named ? std::string(feature_layout()[static_cast<std::size_t>(j)].name)
                    : "x" + std::to_string(j))
          << ',' << format_real(instances(static_cast<Eigen::Index>(i), j)) << ','
          << format_real(ex.attributions(j)) << '\n';
    }
  }
}

}  // namespace mortnas
