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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mortnas/common.hpp"
#include "mortnas/dataset.hpp"

namespace mortnas {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Latent (unmasked) covariates; the outcome depends on these even when the
// survey row reports a field as missing.
struct Latent {
  int anc = 0;
  bool facility = false;
  bool skilled = false;
  int size = 3;
};

double structural_score(const BirthRecord& r, const Latent& l, const EffectSizes& e) {
  double s = 0.0;
  const int age = r.maternal_age_at_birth;
  if (age < 19) s += e.adolescent_mother;
  if (age > 35) s += e.advanced_maternal_age;
  if (r.preceding_interval_months && *r.preceding_interval_months < 18) s += e.short_interval;
  if (r.birth_order == 1) s += e.first_birth;
  if (r.birth_order >= 5) s += e.high_birth_order;
  s += e.education_step * r.maternal_education;
  s += e.wealth_step * (r.wealth_quintile - 1);
  if (l.anc < 4) s += e.anc_inadequate;
  if (!l.facility) s += e.home_delivery;
  if (!l.skilled) s += e.no_skilled_attendant;
  if (l.size <= 2) s += e.small_birth_size;
  if (l.size >= 4) s += e.large_birth_size;
  if (r.urban) s += e.urban;
  int risks = (age < 19) +
              (r.preceding_interval_months && *r.preceding_interval_months < 24) +
              (r.parity > 4);
  if (risks >= 2) s += e.multiple_risk;
  return s;
}

// Intercept such that the mean modelled risk equals `rate` exactly.
double solve_intercept(const std::vector<double>& offsets, double rate) {
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double o : offsets) mean += sigmoid(mid + o);
    mean /= static_cast<double>(offsets.size());
    (mean < rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SyntheticConfig SyntheticConfig::table_defaults() {
  SyntheticConfig c;
  c.counts = {1276, 1965, 1731, 1280, 1381, 1167, 1345, 1393};
  c.mortality_per_mille = {30.6, 29.5, 23.7, 22.7, 31.1, 24.0, 37.2, 45.2};
  c.wealth_mean = {-27111, 6121, 35518, 19832, -27417, 2580, -33335, -8308};
  const auto [lo, hi] = std::minmax_element(c.wealth_mean.begin(), c.wealth_mean.end());
  for (int d = 0; d < kNumDivisions; ++d)
    c.noise_ratio[d] = 0.1 + 0.7 * (c.wealth_mean[d] - *lo) / (*hi - *lo);
  return c;
}

SyntheticConfig SyntheticConfig::scaled_to(int total) const {
  SyntheticConfig c = *this;
  const double current = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (int d = 0; d < kNumDivisions; ++d)
    c.counts[d] = std::max(1, static_cast<int>(std::lround(counts[d] * total / current)));
  return c;
}

void validate(const SyntheticConfig& c) {
  for (int d = 0; d < kNumDivisions; ++d) {
    const std::string name(division_name(static_cast<Division>(d)));
    if (c.counts[d] < 1) throw ConfigError("synthetic: count for " + name + " must be >= 1");
    if (!(c.mortality_per_mille[d] > 0.0 && c.mortality_per_mille[d] < 1000.0))
      throw ConfigError("synthetic: mortality rate for " + name + " must be in (0, 1000)");
    if (!(c.noise_ratio[d] >= 0.0 && c.noise_ratio[d] <= 1.0))
      throw ConfigError("synthetic: noise ratio for " + name + " must be in [0, 1]");
    if (!std::isfinite(c.wealth_mean[d]))
      throw ConfigError("synthetic: wealth mean for " + name + " must be finite");
  }
  if (!(c.wealth_sd > 0.0)) throw ConfigError("synthetic: wealth_sd must be > 0");
  if (!(c.urban_fraction >= 0.0 && c.urban_fraction <= 1.0))
    throw ConfigError("synthetic: urban_fraction must be in [0, 1]");
  if (!(c.healthcare_missing_rate >= 0.0 && c.healthcare_missing_rate < 1.0) ||
      !(c.birth_size_missing_rate >= 0.0 && c.birth_size_missing_rate < 1.0))
    throw ConfigError("synthetic: missing rates must be in [0, 1)");
  if (!(c.logit_scale >= 0.0)) throw ConfigError("synthetic: logit_scale must be >= 0");
  if (c.psu_size < 1) throw ConfigError("synthetic: psu_size must be >= 1");
  double share = 0.0;
  for (double s : c.year_share) {
    if (s < 0.0) throw ConfigError("synthetic: year shares must be >= 0");
    share += s;
  }
  if (!(share > 0.0)) throw ConfigError("synthetic: year shares must not all be zero");
}

std::vector<BirthRecord> generate_synthetic(const SyntheticConfig& config) {
  validate(config);
  Rng rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::discrete_distribution<int> year_dist(config.year_share.begin(), config.year_share.end());
  std::discrete_distribution<int> size_dist({0.05, 0.12, 0.58, 0.17, 0.08});

  // Population-level wealth spread used for quintile cut points.
  const double mean_spread = 25000.0;
  const double wealth_sigma = std::hypot(config.wealth_sd, mean_spread);
  constexpr std::array<double, 4> kQuintileCuts = {-0.8416, -0.2533, 0.2533, 0.8416};

  std::vector<BirthRecord> out;
  out.reserve(std::accumulate(config.counts.begin(), config.counts.end(), std::size_t{0}));

  for (int d = 0; d < kNumDivisions; ++d) {
    const int n = config.counts[d];
    std::vector<BirthRecord> rows(n);
    std::vector<double> score(n), noise(n);
    for (int i = 0; i < n; ++i) {
      BirthRecord& r = rows[i];
      r.division = static_cast<Division>(d);
      r.survey_year = kSurveyYears[year_dist(rng)];
      r.wealth_score = std::round(config.wealth_mean[d] + config.wealth_sd * normal(rng));
      const double zw = r.wealth_score / wealth_sigma;
      r.wealth_quintile =
          1 + static_cast<int>(std::upper_bound(kQuintileCuts.begin(), kQuintileCuts.end(), zw) -
                               kQuintileCuts.begin());
      r.urban = unif(rng) < std::clamp(config.urban_fraction + 0.15 * zw, 0.02, 0.98);
      const double edu_latent = 0.9 * zw + normal(rng);
      r.maternal_education = edu_latent < -0.6 ? 0 : edu_latent < 0.5 ? 1 : edu_latent < 1.5 ? 2 : 3;
      r.maternal_age_at_birth =
          std::clamp(static_cast<int>(std::lround(24.5 + 6.0 * normal(rng))), 13, 49);
      const double lambda = std::max(0.1, (r.maternal_age_at_birth - 16) / 5.5) *
                            (1.0 - 0.12 * r.maternal_education);
      std::poisson_distribution<int> extra(lambda);
      r.parity = std::min(12, 1 + extra(rng));
      if (unif(rng) < 0.55) {
        r.birth_order = r.parity;
      } else {
        std::uniform_int_distribution<int> order(1, r.parity);
        r.birth_order = order(rng);
      }
      const double interval = std::exp(std::log(32.0) + 0.45 * normal(rng));
      if (r.birth_order > 1)
        r.preceding_interval_months = std::clamp(static_cast<int>(std::lround(interval)), 6, 200);

      Latent l;
      std::poisson_distribution<int> anc(std::max(
          0.2, 1.5 + 1.2 * r.maternal_education + 0.8 * std::max(zw, -1.0) + 0.8 * r.urban));
      l.anc = anc(rng);
      l.facility = unif(rng) < 1.0 / (1.0 + std::exp(-(-0.8 + 0.7 * zw +
                                                      0.45 * r.maternal_education +
                                                      0.6 * r.urban)));
      l.skilled = unif(rng) < (l.facility ? 0.95 : 0.15);
      l.size = 1 + size_dist(rng);
      const bool care_missing = unif(rng) < config.healthcare_missing_rate;
      const bool size_missing = unif(rng) < config.birth_size_missing_rate;
      if (!care_missing) {
        r.anc_visits = l.anc;
        r.facility_delivery = l.facility;
        r.skilled_attendant = l.skilled;
      }
      if (!size_missing) r.perceived_birth_size = l.size;

      score[i] = structural_score(r, l, config.effects);
      noise[i] = normal(rng);
    }

    // Standardize the structural score within the division, then mix it with
    // unexplained noise at the configured ratio.
    const double mean = std::accumulate(score.begin(), score.end(), 0.0) / n;
    double var = 0.0;
    for (double s : score) var += (s - mean) * (s - mean);
    const double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    const double rho = config.noise_ratio[d];
    std::vector<double> offset(n);
    for (int i = 0; i < n; ++i) {
      const double u = sd > 0.0 ? (score[i] - mean) / sd : 0.0;
      offset[i] = config.logit_scale * (std::sqrt(1.0 - rho) * u + std::sqrt(rho) * noise[i]);
    }
    const double intercept = solve_intercept(offset, config.mortality_per_mille[d] / 1000.0);
    for (int i = 0; i < n; ++i) rows[i].died_under5 = unif(rng) < sigmoid(intercept + offset[i]);

    std::move(rows.begin(), rows.end(), std::back_inserter(out));
  }

  // Survey design: one stratum per (year, division, residence); records are
  // chunked in generation order into PSUs of about psu_size, at least two
  // per stratum whenever the stratum has two or more records.
  std::map<std::int64_t, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& r = out[i];
    const auto year_idx =
        std::find(kSurveyYears.begin(), kSurveyYears.end(), r.survey_year) - kSurveyYears.begin();
    const std::int64_t stratum =
        1000 * (year_idx + 1) + 10 * (static_cast<int>(r.division) + 1) + (r.urban ? 1 : 2);
    strata[stratum].push_back(i);
  }
  std::int64_t next_psu = 1;
  for (auto& [stratum, members] : strata) {
    const std::size_t n = members.size();
    std::size_t n_psu = (n + config.psu_size - 1) / config.psu_size;
    if (n >= 2) n_psu = std::max<std::size_t>(n_psu, 2);
    const std::size_t chunk = (n + n_psu - 1) / n_psu;
    double base = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k % chunk == 0) {
        ++next_psu;
        base = (out[members[k]].urban ? 0.85 : 1.10) * std::exp(0.25 * normal(rng));
      }
      auto& r = out[members[k]];
      r.stratum_id = stratum;
      r.psu_id = next_psu - 1;
      r.sampling_weight = std::round(base * 1e6) / 1e6;
    }
  }
  return out;
}

}  // namespace mortnas
