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

#include "mortnas/features.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace mortnas {
namespace {

using K = FeatureKind;

constexpr std::array<FeatureDef, kNumFeatures> kLayout = {{
    {"age_adolescent", "maternal_age_at_birth", K::kOneHotLevel, "maternal_age"},
    {"age_advanced", "maternal_age_at_birth", K::kOneHotLevel, "maternal_age"},
    {"edu_primary", "maternal_education", K::kOneHotLevel, "maternal_education"},
    {"edu_secondary", "maternal_education", K::kOneHotLevel, "maternal_education"},
    {"edu_higher", "maternal_education", K::kOneHotLevel, "maternal_education"},
    {"wealth_q2", "wealth_quintile", K::kOneHotLevel, "wealth_quintile"},
    {"wealth_q3", "wealth_quintile", K::kOneHotLevel, "wealth_quintile"},
    {"wealth_q4", "wealth_quintile", K::kOneHotLevel, "wealth_quintile"},
    {"wealth_q5", "wealth_quintile", K::kOneHotLevel, "wealth_quintile"},
    {"div_chittagong", "division", K::kOneHotLevel, "division"},
    {"div_dhaka", "division", K::kOneHotLevel, "division"},
    {"div_khulna", "division", K::kOneHotLevel, "division"},
    {"div_mymensingh", "division", K::kOneHotLevel, "division"},
    {"div_rajshahi", "division", K::kOneHotLevel, "division"},
    {"div_rangpur", "division", K::kOneHotLevel, "division"},
    {"div_sylhet", "division", K::kOneHotLevel, "division"},
    {"interval_short", "preceding_interval_months", K::kOneHotLevel, "birth_interval"},
    {"interval_moderate", "preceding_interval_months", K::kOneHotLevel, "birth_interval"},
    {"first_birth", "preceding_interval_months", K::kOneHotLevel, "birth_interval"},
    {"size_small", "perceived_birth_size", K::kOneHotLevel, "birth_size"},
    {"size_large", "perceived_birth_size", K::kOneHotLevel, "birth_size"},
    {"urban", "urban", K::kBinaryFlag, "urban"},
    {"facility_delivery", "facility_delivery", K::kBinaryFlag, "facility_delivery"},
    {"skilled_attendant", "skilled_attendant", K::kBinaryFlag, "skilled_attendant"},
    {"anc_adequate", "anc_visits", K::kBinaryFlag, "anc_adequate"},
    {"anc_missing", "anc_visits", K::kMissingIndicator, "anc_missing"},
    {"delivery_care_missing", "facility_delivery|skilled_attendant", K::kMissingIndicator,
     "delivery_care_missing"},
    {"birth_size_missing", "perceived_birth_size", K::kMissingIndicator, "birth_size_missing"},
    {"birth_order", "birth_order", K::kStandardized, "birth_order"},
    {"parity", "parity", K::kStandardized, "parity"},
    {"high_risk_count", "derived", K::kStandardized, "high_risk_count"},
}};

enum Col : int {
  kAgeAdolescent = 0,
  kAgeAdvanced = 1,
  kEduFirst = 2,       // primary; +1 secondary, +2 higher
  kWealthFirst = 5,    // q2
  kDivisionFirst = 9,  // Chittagong
  kIntervalShort = 16,
  kIntervalModerate = 17,
  kFirstBirth = 18,
  kSizeSmall = 19,
  kSizeLarge = 20,
  kUrban = 21,
  kFacility = 22,
  kSkilled = 23,
  kAncAdequate = 24,
  kAncMissing = 25,
  kDeliveryMissing = 26,
  kSizeMissing = 27,
  kBirthOrder = 28,
  kParity = 29,
  kRiskCount = 30,
};

Encoder::Standardizer fit_standardizer(const std::vector<double>& v) {
  Encoder::Standardizer s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  s.sd = sd > 0.0 ? sd : 1.0;
  return s;
}

}  // namespace

MaternalAgeBand categorize_maternal_age(int years) {
  if (years < 10 || years > 49)
    throw DataError("maternal age " + std::to_string(years) + " outside 10..49");
  if (years < 19) return MaternalAgeBand::kAdolescent;
  if (years <= 35) return MaternalAgeBand::kOptimal;
  return MaternalAgeBand::kAdvanced;
}

BirthIntervalBand categorize_birth_interval(std::optional<int> months) {
  if (!months) return BirthIntervalBand::kFirstBirth;
  if (*months < 0) throw DataError("negative birth interval");
  if (*months < 18) return BirthIntervalBand::kHighRisk;
  if (*months <= 36) return BirthIntervalBand::kModerate;
  return BirthIntervalBand::kLowRisk;
}

AncStatus anc_adequate(std::optional<int> visits) {
  if (!visits) return AncStatus::kMissing;
  return *visits >= 4 ? AncStatus::kAdequate : AncStatus::kInadequate;
}

int high_risk_count(const BirthRecord& r) {
  return (r.maternal_age_at_birth < 19) +
         (r.preceding_interval_months.has_value() && *r.preceding_interval_months < 24) +
         (r.parity > 4);
}

const std::array<FeatureDef, kNumFeatures>& feature_layout() { return kLayout; }

std::vector<FeatureGroup> feature_groups() {
  std::vector<FeatureGroup> groups;
  for (int c = 0; c < kNumFeatures; ++c) {
    const auto g = kLayout[c].group;
    if (groups.empty() || groups.back().name != g)
      groups.push_back({std::string(g), {}});
    groups.back().columns.push_back(c);
  }
  return groups;
}

std::string feature_order_hash() {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : kLayout) {
    for (char ch : f.name) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
    h ^= ',';
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FeatureTable FeatureTable::subset(const std::vector<Eigen::Index>& idx) const {
  FeatureTable t;
  const auto n = static_cast<Eigen::Index>(idx.size());
  t.x.resize(n, x.cols());
  t.y.resize(n);
  t.wealth_score.resize(n);
  t.sampling_weight.resize(n);
  t.division.reserve(n);
  t.urban.reserve(n);
  t.psu_id.reserve(n);
  t.stratum_id.reserve(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = idx[k];
    t.x.row(k) = x.row(i);
    t.y(k) = y(i);
    t.wealth_score(k) = wealth_score(i);
    t.sampling_weight(k) = sampling_weight(i);
    t.division.push_back(division[i]);
    t.urban.push_back(urban[i]);
    t.psu_id.push_back(psu_id[i]);
    t.stratum_id.push_back(stratum_id[i]);
  }
  return t;
}

Encoder Encoder::fit(const std::vector<BirthRecord>& train) {
  if (train.empty()) throw DataError("cannot fit encoder on an empty training split");
  std::vector<double> order, parity, risk;
  std::set<int> sizes;
  bool saw_anc = false, saw_facility = false, saw_skilled = false;
  for (const auto& r : train) {
    order.push_back(r.birth_order);
    parity.push_back(r.parity);
    risk.push_back(high_risk_count(r));
    if (r.perceived_birth_size) sizes.insert(*r.perceived_birth_size);
    saw_anc |= r.anc_visits.has_value();
    saw_facility |= r.facility_delivery.has_value();
    saw_skilled |= r.skilled_attendant.has_value();
  }
  if (sizes.empty())
    throw DataError("perceived_birth_size has no observed level in the training split");
  if (!saw_anc) throw DataError("anc_visits has no observed level in the training split");
  if (!saw_facility)
    throw DataError("facility_delivery has no observed level in the training split");
  if (!saw_skilled)
    throw DataError("skilled_attendant has no observed level in the training split");

  Encoder e;
  e.birth_order_ = fit_standardizer(order);
  e.parity_ = fit_standardizer(parity);
  e.risk_count_ = fit_standardizer(risk);
  e.observed_sizes_.assign(sizes.begin(), sizes.end());
  return e;
}

Encoder Encoder::from_parts(Standardizer birth_order, Standardizer parity,
                            Standardizer risk_count, std::vector<int> observed_sizes) {
  Encoder e;
  e.birth_order_ = birth_order;
  e.parity_ = parity;
  e.risk_count_ = risk_count;
  e.observed_sizes_ = std::move(observed_sizes);
  return e;
}

FeatureVector Encoder::featurize(const BirthRecord& r) const {
  if (auto why = validate(r)) throw DataError("cannot featurize record: " + *why);
  FeatureVector f;
  auto& v = f.values;
  v.setZero();

  switch (categorize_maternal_age(r.maternal_age_at_birth)) {
    case MaternalAgeBand::kAdolescent: v(kAgeAdolescent) = 1; break;
    case MaternalAgeBand::kAdvanced: v(kAgeAdvanced) = 1; break;
    case MaternalAgeBand::kOptimal: break;
  }
  if (r.maternal_education > 0) v(kEduFirst + r.maternal_education - 1) = 1;
  if (r.wealth_quintile > 1) v(kWealthFirst + r.wealth_quintile - 2) = 1;
  if (r.division != Division::kBarisal) v(kDivisionFirst + static_cast<int>(r.division) - 1) = 1;
  switch (categorize_birth_interval(r.preceding_interval_months)) {
    case BirthIntervalBand::kHighRisk: v(kIntervalShort) = 1; break;
    case BirthIntervalBand::kModerate: v(kIntervalModerate) = 1; break;
    case BirthIntervalBand::kFirstBirth: v(kFirstBirth) = 1; break;
    case BirthIntervalBand::kLowRisk: break;
  }
  if (r.perceived_birth_size) {
    if (*r.perceived_birth_size <= 2) v(kSizeSmall) = 1;
    else if (*r.perceived_birth_size >= 4) v(kSizeLarge) = 1;
  } else {
    v(kSizeMissing) = 1;
  }
  v(kUrban) = r.urban ? 1 : 0;
  if (r.facility_delivery) v(kFacility) = *r.facility_delivery ? 1 : 0;
  if (r.skilled_attendant) v(kSkilled) = *r.skilled_attendant ? 1 : 0;
  if (!r.facility_delivery || !r.skilled_attendant) v(kDeliveryMissing) = 1;
  switch (anc_adequate(r.anc_visits)) {
    case AncStatus::kAdequate: v(kAncAdequate) = 1; break;
    case AncStatus::kMissing: v(kAncMissing) = 1; break;
    case AncStatus::kInadequate: break;
  }
  v(kBirthOrder) = (r.birth_order - birth_order_.mean) / birth_order_.sd;
  v(kParity) = (r.parity - parity_.mean) / parity_.sd;
  v(kRiskCount) = (high_risk_count(r) - risk_count_.mean) / risk_count_.sd;

  f.label = r.died_under5 ? 1 : 0;
  f.division = r.division;
  f.urban = r.urban;
  f.wealth_score = r.wealth_score;
  f.psu_id = r.psu_id;
  f.stratum_id = r.stratum_id;
  f.sampling_weight = r.sampling_weight;
  return f;
}

FeatureTable Encoder::featurize(const std::vector<BirthRecord>& records) const {
  FeatureTable t;
  const auto n = static_cast<Eigen::Index>(records.size());
  t.x.resize(n, kNumFeatures);
  t.y.resize(n);
  t.wealth_score.resize(n);
  t.sampling_weight.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const FeatureVector f = featurize(records[i]);
    t.x.row(i) = f.values.transpose();
    t.y(i) = f.label;
    t.wealth_score(i) = f.wealth_score;
    t.sampling_weight(i) = f.sampling_weight;
    t.division.push_back(f.division);
    t.urban.push_back(f.urban);
    t.psu_id.push_back(f.psu_id);
    t.stratum_id.push_back(f.stratum_id);
  }
  return t;
}

}  // namespace mortnas
