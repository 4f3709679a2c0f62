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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mortnas {

enum class Division : int {
  kBarisal = 0,
  kChittagong,
  kDhaka,
  kKhulna,
  kMymensingh,
  kRajshahi,
  kRangpur,
  kSylhet,
};

inline constexpr int kNumDivisions = 8;
inline constexpr std::array<int, 4> kSurveyYears = {2011, 2014, 2017, 2022};

std::string_view division_name(Division d);
/// Accepts the division name (case-insensitive) or its 1-based id.
std::optional<Division> parse_division(std::string_view text);

/// One child's row from a birth-history survey.
struct BirthRecord {
  int survey_year = 2011;
  Division division = Division::kBarisal;
  bool urban = false;
  int wealth_quintile = 1;
  double wealth_score = 0.0;
  int maternal_age_at_birth = 25;
  int maternal_education = 0;  // 0 none, 1 primary, 2 secondary, 3 higher
  int parity = 1;
  int birth_order = 1;
  std::optional<int> preceding_interval_months;
  std::optional<int> anc_visits;
  std::optional<bool> facility_delivery;
  std::optional<bool> skilled_attendant;
  std::optional<int> perceived_birth_size;  // 1 very small .. 5 very large
  bool died_under5 = false;
  std::int64_t psu_id = 0;
  std::int64_t stratum_id = 0;
  double sampling_weight = 1.0;

  friend bool operator==(const BirthRecord&, const BirthRecord&) = default;
};

/// Returns a description of the first violated schema invariant, or nothing.
std::optional<std::string> validate(const BirthRecord& r);

/// Exact, ordered CSV header of the ingestion format.
inline constexpr std::string_view kCsvHeader =
    "survey_year,division,urban,wealth_quintile,wealth_score,"
    "maternal_age_at_birth,maternal_education,parity,birth_order,"
    "preceding_interval_months,anc_visits,facility_delivery,skilled_attendant,"
    "perceived_birth_size,died_under5,psu_id,stratum_id,sampling_weight";

struct LoadResult {
  std::vector<BirthRecord> records;
  std::size_t dropped = 0;           // lenient mode: rows failing validation
  std::size_t missing_outcome = 0;   // rows excluded for an empty outcome cell
  std::vector<std::string> drop_reasons;
};

/// Parses a CSV file in the documented format. Strict mode throws DataError on
/// the first bad row; lenient mode drops and counts it. Rows with an empty
/// died_under5 cell are excluded in both modes.
LoadResult load_records(const std::filesystem::path& path, bool strict = true);
LoadResult parse_records(std::istream& in, bool strict = true,
                         std::string_view source = "<stream>");

void write_records(std::ostream& out, const std::vector<BirthRecord>& records);
void write_records(const std::filesystem::path& path,
                   const std::vector<BirthRecord>& records);

struct SplitSet {
  std::vector<BirthRecord> train;       // 2011, 2014
  std::vector<BirthRecord> validation;  // 2017
  std::vector<BirthRecord> test;        // 2022
};

/// Partitions by survey year, keeping input order within each split.
SplitSet temporal_split(const std::vector<BirthRecord>& records);

/// Drops records with any missing healthcare or birth-size field.
std::vector<BirthRecord> complete_cases(const std::vector<BirthRecord>& records);

// ---------------------------------------------------------------------------
// Synthetic population generator.

/// Log-odds contributions of the engineered risk factors in the structural
/// part of the outcome model.
struct EffectSizes {
  double adolescent_mother = 0.55;
  double advanced_maternal_age = 0.30;
  double short_interval = 0.50;   // preceding interval < 18 months
  double first_birth = 0.40;
  double high_birth_order = 0.45;  // birth order >= 5
  double education_step = -0.25;  // per education level
  double wealth_step = -0.10;      // per quintile above the first
  double anc_inadequate = 0.20;
  double home_delivery = 0.15;
  double no_skilled_attendant = 0.15;
  double small_birth_size = 0.65;
  double large_birth_size = -0.10;
  double urban = -0.10;
  double multiple_risk = 0.30;    // two or more of the high-risk conditions
};

struct SyntheticConfig {
  std::array<int, kNumDivisions> counts{};
  std::array<double, kNumDivisions> mortality_per_mille{};
  std::array<double, kNumDivisions> wealth_mean{};
  std::array<double, kNumDivisions> noise_ratio{};
  double wealth_sd = 40000.0;
  double urban_fraction = 0.28;
  double healthcare_missing_rate = 0.55;
  double birth_size_missing_rate = 0.05;
  // Total standard deviation of the centred log-odds; the noise ratio sets
  // how it is shared between covariate signal and unexplained noise.
  double logit_scale = 1.6;
  std::array<double, 4> year_share = {7601, 6779, 8044, 11538};
  int psu_size = 25;
  EffectSizes effects{};
  std::uint64_t seed = 7;

  /// Regional marginals of the 2022 test survey: per-division counts,
  /// mortality rates and wealth means, with noise ratios rising from 0.1 in
  /// the poorest division to 0.8 in the wealthiest.
  static SyntheticConfig table_defaults();
  /// Same marginals with every division scaled to `total` records.
  SyntheticConfig scaled_to(int total) const;
};

/// Throws ConfigError on invalid fields.
void validate(const SyntheticConfig& config);

std::vector<BirthRecord> generate_synthetic(const SyntheticConfig& config);

}  // namespace mortnas
