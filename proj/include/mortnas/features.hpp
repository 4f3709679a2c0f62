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

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mortnas/common.hpp"
#include "mortnas/dataset.hpp"

namespace mortnas {

enum class MaternalAgeBand { kAdolescent, kOptimal, kAdvanced };
enum class BirthIntervalBand { kHighRisk, kModerate, kLowRisk, kFirstBirth };
enum class AncStatus { kAdequate, kInadequate, kMissing };

/// <19 adolescent, 19..35 optimal, >35 advanced. Throws DataError outside 10..49.
MaternalAgeBand categorize_maternal_age(int years);
/// <18 high risk, 18..36 moderate, >36 low risk, absent first birth.
BirthIntervalBand categorize_birth_interval(std::optional<int> months);
/// WHO four-visit threshold.
AncStatus anc_adequate(std::optional<int> visits);
/// Count of {mother < 19, preceding interval < 24 months, parity > 4}.
int high_risk_count(const BirthRecord& r);

inline constexpr int kNumFeatures = 31;

enum class FeatureKind {
  kOneHotLevel,
  kBinaryFlag,
  kStandardized,
  kMissingIndicator,
};

struct FeatureDef {
  std::string_view name;
  std::string_view source;  // record field the feature derives from
  FeatureKind kind;
  std::string_view group;   // one-hot block or the feature's own name
};

/// Frozen column layout; FEATURES.md documents the same table.
const std::array<FeatureDef, kNumFeatures>& feature_layout();

/// A named block of columns that must be treated jointly (one-hot groups).
struct FeatureGroup {
  std::string name;
  std::vector<int> columns;
};
std::vector<FeatureGroup> feature_groups();

/// FNV-1a hash of the ordered feature names, hex encoded. Model files carry
/// it so a model is never applied to a differently ordered layout.
std::string feature_order_hash();

/// One featurized child plus the design metadata carried for auditing.
struct FeatureVector {
  Eigen::Matrix<double, kNumFeatures, 1> values;
  int label = 0;
  Division division = Division::kBarisal;
  bool urban = false;
  double wealth_score = 0.0;
  std::int64_t psu_id = 0;
  std::int64_t stratum_id = 0;
  double sampling_weight = 1.0;
};

/// Column-oriented batch of featurized rows.
struct FeatureTable {
  MatrixXd x;            // n x 31
  VectorXd y;            // 0/1
  std::vector<Division> division;
  std::vector<bool> urban;
  VectorXd wealth_score;
  std::vector<std::int64_t> psu_id;
  std::vector<std::int64_t> stratum_id;
  VectorXd sampling_weight;

  Eigen::Index rows() const { return x.rows(); }
  /// Rows selected by index, in the given order.
  FeatureTable subset(const std::vector<Eigen::Index>& idx) const;
};

/// Train-fitted transform from BirthRecord to the 31-column layout. Only the
/// standardized ordinals carry fitted statistics; the one-hot levels are
/// fixed by the schema, and the observed levels are recorded for reference.
class Encoder {
 public:
  struct Standardizer {
    double mean = 0.0;
    double sd = 1.0;
    friend bool operator==(const Standardizer&, const Standardizer&) = default;
  };

  Encoder() = default;

  /// Throws DataError on empty input or a categorical field with no
  /// observed level.
  static Encoder fit(const std::vector<BirthRecord>& train);

  FeatureVector featurize(const BirthRecord& r) const;
  FeatureTable featurize(const std::vector<BirthRecord>& records) const;

  const Standardizer& birth_order() const { return birth_order_; }
  const Standardizer& parity() const { return parity_; }
  const Standardizer& risk_count() const { return risk_count_; }
  const std::vector<int>& observed_birth_sizes() const { return observed_sizes_; }

  // Restores a serialized encoder.
  static Encoder from_parts(Standardizer birth_order, Standardizer parity,
                            Standardizer risk_count, std::vector<int> observed_sizes);

  friend bool operator==(const Encoder&, const Encoder&) = default;

 private:
  Standardizer birth_order_;
  Standardizer parity_;
  Standardizer risk_count_;
  std::vector<int> observed_sizes_;
};

}  // namespace mortnas
