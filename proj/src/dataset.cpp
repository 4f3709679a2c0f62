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

#include "mortnas/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mortnas/common.hpp"
#include "mortnas/text.hpp"

namespace mortnas {
namespace {

constexpr std::array<std::string_view, kNumDivisions> kDivisionNames = {
    "Barisal", "Chittagong", "Dhaka",   "Khulna",
    "Mymensingh", "Rajshahi", "Rangpur", "Sylhet"};

constexpr std::size_t kNumColumns = 18;

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

// Cell parsers throw std::invalid_argument with a column-scoped message; the
// row loop turns that into a DataError or a dropped row.
struct CellError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::int64_t parse_int(std::string_view cell, std::string_view column) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty())
    throw CellError("column '" + std::string(column) + "': expected integer, got '" +
                    std::string(cell) + "'");
  return value;
}

double parse_real(std::string_view cell, std::string_view column) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty())
    throw CellError("column '" + std::string(column) + "': expected number, got '" +
                    std::string(cell) + "'");
  return value;
}

bool parse_bool(std::string_view cell, std::string_view column) {
  if (cell == "0") return false;
  if (cell == "1") return true;
  throw CellError("column '" + std::string(column) + "': expected 0/1, got '" +
                  std::string(cell) + "'");
}

template <typename T, typename F>
std::optional<T> optional_cell(std::string_view cell, F&& parse) {
  if (cell.empty()) return std::nullopt;
  return static_cast<T>(parse(cell));
}

BirthRecord parse_row(const std::vector<std::string_view>& cells,
                      const std::vector<std::string_view>& names) {
  auto col = [&](std::size_t i) { return names[i]; };
  BirthRecord r;
  r.survey_year = static_cast<int>(parse_int(cells[0], col(0)));
  auto div = parse_division(cells[1]);
  if (!div) throw CellError("column 'division': unknown division '" + std::string(cells[1]) + "'");
  r.division = *div;
  r.urban = parse_bool(cells[2], col(2));
  r.wealth_quintile = static_cast<int>(parse_int(cells[3], col(3)));
  r.wealth_score = parse_real(cells[4], col(4));
  r.maternal_age_at_birth = static_cast<int>(parse_int(cells[5], col(5)));
  r.maternal_education = static_cast<int>(parse_int(cells[6], col(6)));
  r.parity = static_cast<int>(parse_int(cells[7], col(7)));
  r.birth_order = static_cast<int>(parse_int(cells[8], col(8)));
  r.preceding_interval_months =
      optional_cell<int>(cells[9], [&](auto c) { return parse_int(c, col(9)); });
  r.anc_visits = optional_cell<int>(cells[10], [&](auto c) { return parse_int(c, col(10)); });
  r.facility_delivery =
      optional_cell<bool>(cells[11], [&](auto c) { return parse_bool(c, col(11)); });
  r.skilled_attendant =
      optional_cell<bool>(cells[12], [&](auto c) { return parse_bool(c, col(12)); });
  r.perceived_birth_size =
      optional_cell<int>(cells[13], [&](auto c) { return parse_int(c, col(13)); });
  r.died_under5 = parse_bool(cells[14], col(14));
  r.psu_id = parse_int(cells[15], col(15));
  r.stratum_id = parse_int(cells[16], col(16));
  r.sampling_weight = parse_real(cells[17], col(17));
  return r;
}

void check_header(std::string_view line, std::string_view source) {
  auto names = split_csv_line(line);
  std::set<std::string_view> seen;
  for (auto n : names) {
    if (!seen.insert(n).second)
      throw DataError(std::string(source) + ": duplicate column '" + std::string(n) + "'");
  }
  if (line != kCsvHeader)
    throw DataError(std::string(source) +
                    ": malformed header; expected exactly: " + std::string(kCsvHeader));
}

}  // namespace

std::string_view division_name(Division d) {
  return kDivisionNames.at(static_cast<std::size_t>(d));
}

std::optional<Division> parse_division(std::string_view text) {
  for (std::size_t i = 0; i < kDivisionNames.size(); ++i) {
    if (iequals(text, kDivisionNames[i])) return static_cast<Division>(i);
  }
  int id = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
  if (ec == std::errc() && ptr == text.data() + text.size() && id >= 1 &&
      id <= kNumDivisions)
    return static_cast<Division>(id - 1);
  return std::nullopt;
}

std::optional<std::string> validate(const BirthRecord& r) {
  if (std::find(kSurveyYears.begin(), kSurveyYears.end(), r.survey_year) ==
      kSurveyYears.end())
    return "survey_year " + std::to_string(r.survey_year) + " not in {2011,2014,2017,2022}";
  if (r.wealth_quintile < 1 || r.wealth_quintile > 5)
    return "wealth_quintile must be in 1..5";
  if (!std::isfinite(r.wealth_score)) return "wealth_score must be finite";
  if (r.maternal_age_at_birth < 10 || r.maternal_age_at_birth > 49)
    return "maternal_age_at_birth must be in 10..49";
  if (r.maternal_education < 0 || r.maternal_education > 3)
    return "maternal_education must be in 0..3";
  if (r.parity < 1) return "parity must be >= 1";
  if (r.birth_order < 1) return "birth_order must be >= 1";
  if (r.birth_order > r.parity) return "birth_order <= parity violated";
  if (r.preceding_interval_months.has_value() == (r.birth_order == 1))
    return "preceding_interval_months must be absent iff birth_order = 1";
  if (r.preceding_interval_months && *r.preceding_interval_months < 0)
    return "preceding_interval_months must be >= 0";
  if (r.anc_visits && *r.anc_visits < 0) return "anc_visits must be >= 0";
  if (r.perceived_birth_size &&
      (*r.perceived_birth_size < 1 || *r.perceived_birth_size > 5))
    return "perceived_birth_size must be in 1..5";
  if (!(r.sampling_weight > 0.0) || !std::isfinite(r.sampling_weight))
    return "sampling_weight must be > 0";
  return std::nullopt;
}

LoadResult parse_records(std::istream& in, bool strict, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  check_header(line, source);
  const auto names = split_csv_line(kCsvHeader);

  LoadResult result;
  // psu -> stratum within a survey year
  std::map<std::pair<int, std::int64_t>, std::int64_t> psu_stratum;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto reject = [&](const std::string& why) {
      std::string msg = std::string(source) + " row " + std::to_string(row) + ": " + why;
      if (strict) throw DataError(msg);
      ++result.dropped;
      result.drop_reasons.push_back(std::move(msg));
    };
    auto cells = split_csv_line(line);
    if (cells.size() != kNumColumns) {
      reject("expected " + std::to_string(kNumColumns) + " cells, got " +
             std::to_string(cells.size()));
      continue;
    }
    if (cells[14].empty()) {
      ++result.missing_outcome;
      continue;
    }
    BirthRecord r;
    try {
      r = parse_row(cells, names);
    } catch (const CellError& e) {
      reject(e.what());
      continue;
    }
    if (auto why = validate(r)) {
      reject(*why);
      continue;
    }
    auto [it, inserted] = psu_stratum.try_emplace({r.survey_year, r.psu_id}, r.stratum_id);
    if (!inserted && it->second != r.stratum_id) {
      reject("psu_id " + std::to_string(r.psu_id) + " appears in strata " +
             std::to_string(it->second) + " and " + std::to_string(r.stratum_id));
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

LoadResult load_records(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file: " + path.string());
  return parse_records(in, strict, path.string());
}

void write_records(std::ostream& out, const std::vector<BirthRecord>& records) {
  out << kCsvHeader << '\n';
  auto opt = [](const auto& v) -> std::string {
    if (!v) return {};
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, bool>) return *v ? "1" : "0";
    else return std::to_string(*v);
  };
  for (const auto& r : records) {
    out << r.survey_year << ',' << division_name(r.division) << ',' << (r.urban ? 1 : 0)
        << ',' << r.wealth_quintile << ',' << format_real(r.wealth_score) << ','
        << r.maternal_age_at_birth << ',' << r.maternal_education << ',' << r.parity
        << ',' << r.birth_order << ',' << opt(r.preceding_interval_months) << ','
        << opt(r.anc_visits) << ',' << opt(r.facility_delivery) << ','
        << opt(r.skilled_attendant) << ',' << opt(r.perceived_birth_size) << ','
        << (r.died_under5 ? 1 : 0) << ',' << r.psu_id << ',' << r.stratum_id << ','
        << format_real(r.sampling_weight) << '\n';
  }
}

void write_records(const std::filesystem::path& path,
                   const std::vector<BirthRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  write_records(out, records);
  if (!out) throw RuntimeFailure("write failed: " + path.string());
}

SplitSet temporal_split(const std::vector<BirthRecord>& records) {
  SplitSet s;
  for (const auto& r : records) {
    switch (r.survey_year) {
      case 2011:
      case 2014:
        s.train.push_back(r);
        break;
      case 2017:
        s.validation.push_back(r);
        break;
      case 2022:
        s.test.push_back(r);
        break;
      default:
        throw DataError("unknown survey_year " + std::to_string(r.survey_year));
    }
  }
  return s;
}

std::vector<BirthRecord> complete_cases(const std::vector<BirthRecord>& records) {
  std::vector<BirthRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), [](const auto& r) {
    return r.anc_visits && r.facility_delivery && r.skilled_attendant &&
           r.perceived_birth_size;
  });
  return out;
}

}  // namespace mortnas
