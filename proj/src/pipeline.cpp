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

#include "mortnas/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "mortnas/baselines.hpp"
#include "mortnas/calibration.hpp"
#include "mortnas/metrics.hpp"
#include "mortnas/model_io.hpp"
#include "pipeline_io.hpp"
#include "mortnas/text.hpp"

namespace mortnas {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration.

namespace {

void reject_unknown(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read(const json& j, std::string_view key, T& out, std::string_view where) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + "." + std::string(key) + ": wrong type");
  }
}

template <std::size_t N>
void read_array(const json& j, std::string_view key, std::array<double, N>& out,
                std::string_view where) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) return;
  if (it->is_number()) {
    out.fill(it->get<double>());
    return;
  }
  std::vector<double> v;
  read(j, key, v, where);
  if (v.size() != N)
    throw ConfigError(std::string(where) + "." + std::string(key) + ": expected " +
                      std::to_string(N) + " values");
  std::copy(v.begin(), v.end(), out.begin());
}

SearchConfig read_search(const json& j, SearchConfig c, std::string_view where) {
  reject_unknown(j, where,
                 {"population_size", "generations", "elite_count", "mutation_rate",
                  "candidate_epochs", "memoize"});
  read(j, "population_size", c.population_size, where);
  read(j, "generations", c.generations, where);
  read(j, "elite_count", c.elite_count, where);
  read(j, "mutation_rate", c.mutation_rate, where);
  read(j, "candidate_epochs", c.candidate_epochs, where);
  read(j, "memoize", c.memoize, where);
  return c;
}

json search_json(const SearchConfig& c) {
  return {{"population_size", c.population_size}, {"generations", c.generations},
          {"elite_count", c.elite_count},         {"mutation_rate", c.mutation_rate},
          {"candidate_epochs", c.candidate_epochs}, {"memoize", c.memoize}};
}

std::string_view format_name(ReportFormat f) {
  switch (f) {
    case ReportFormat::kJson: return "json";
    case ReportFormat::kCsv: return "csv";
    case ReportFormat::kMd: return "md";
  }
  return "?";
}

}  // namespace

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "md") return ReportFormat::kMd;
  throw ConfigError("unknown report format '" + std::string(s) + "' (json, csv, md)");
}

void PipelineConfig::validate() const {
  search.validate();
  train.validate();
  baselines.search.validate();
  mortnas::validate(synthetic);
  if (audit.bootstrap_replicates < 1) throw ConfigError("audit.bootstrap_replicates must be >= 1");
  if (audit.permutation_repeats < 1) throw ConfigError("audit.permutation_repeats must be >= 1");
  if (audit.shap_budget < kNumFeatures + 2)
    throw ConfigError("audit.shap_budget must be >= " + std::to_string(kNumFeatures + 2));
  if (audit.shap_background < 1 || audit.shap_instances < 1)
    throw ConfigError("audit.shap_background and audit.shap_instances must be >= 1");
  if (workspace.empty()) throw ConfigError("workspace path must not be empty");
  if (formats.empty()) throw ConfigError("at least one report format is required");
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  reject_unknown(j, "config",
                 {"data", "workspace", "seed", "threads", "strict", "complete_case", "skip_nas",
                  "formats", "synthetic", "search", "train", "baselines", "audit"});
  std::string path;
  if (j.contains("data")) {
    read(j, "data", path, "config");
    c.data = path;
  }
  if (j.contains("workspace")) {
    read(j, "workspace", path, "config");
    c.workspace = path;
  }
  read(j, "seed", c.seed, "config");
  read(j, "threads", c.threads, "config");
  read(j, "strict", c.strict, "config");
  read(j, "complete_case", c.complete_case, "config");
  read(j, "skip_nas", c.skip_nas, "config");
  if (j.contains("formats")) {
    std::vector<std::string> f;
    read(j, "formats", f, "config");
    c.formats.clear();
    for (const auto& s : f) c.formats.insert(parse_report_format(s));
  }
  if (const auto it = j.find("synthetic"); it != j.end()) {
    const auto& s = *it;
    reject_unknown(s, "synthetic",
                   {"total", "counts", "mortality_per_mille", "wealth_mean", "noise_ratio",
                    "wealth_sd", "urban_fraction", "healthcare_missing_rate",
                    "birth_size_missing_rate", "logit_scale", "year_share", "psu_size", "seed"});
    if (s.contains("total")) {
      int total = 0;
      read(s, "total", total, "synthetic");
      if (total < kNumDivisions) throw ConfigError("synthetic.total must be >= 8");
      c.synthetic = c.synthetic.scaled_to(total);
    }
    if (s.contains("counts")) {
      std::vector<int> v;
      read(s, "counts", v, "synthetic");
      if (v.size() != kNumDivisions) throw ConfigError("synthetic.counts: expected 8 values");
      std::copy(v.begin(), v.end(), c.synthetic.counts.begin());
    }
    read_array(s, "mortality_per_mille", c.synthetic.mortality_per_mille, "synthetic");
    read_array(s, "wealth_mean", c.synthetic.wealth_mean, "synthetic");
    read_array(s, "noise_ratio", c.synthetic.noise_ratio, "synthetic");
    read_array(s, "year_share", c.synthetic.year_share, "synthetic");
    read(s, "wealth_sd", c.synthetic.wealth_sd, "synthetic");
    read(s, "urban_fraction", c.synthetic.urban_fraction, "synthetic");
    read(s, "healthcare_missing_rate", c.synthetic.healthcare_missing_rate, "synthetic");
    read(s, "birth_size_missing_rate", c.synthetic.birth_size_missing_rate, "synthetic");
    read(s, "logit_scale", c.synthetic.logit_scale, "synthetic");
    read(s, "psu_size", c.synthetic.psu_size, "synthetic");
    if (s.contains("seed")) {
      read(s, "seed", c.synthetic.seed, "synthetic");
      c.synthetic_seed_explicit = true;
    }
  }
  if (const auto it = j.find("search"); it != j.end()) c.search = read_search(*it, c.search, "search");
  if (const auto it = j.find("train"); it != j.end()) {
    const auto& t = *it;
    reject_unknown(t, "train",
                   {"max_epochs", "patience", "batch_size", "learning_rate", "early_stopping",
                    "optimizer", "class_weighting"});
    read(t, "max_epochs", c.train.max_epochs, "train");
    read(t, "patience", c.train.patience, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "early_stopping", c.train.early_stopping, "train");
    if (t.contains("optimizer")) {
      std::string o;
      read(t, "optimizer", o, "train");
      if (o == "adam") c.train.optimizer = OptimizerKind::kAdam;
      else if (o == "sgd") c.train.optimizer = OptimizerKind::kSgd;
      else throw ConfigError("train.optimizer must be adam or sgd");
    }
    if (t.contains("class_weighting")) {
      bool on = true;
      read(t, "class_weighting", on, "train");
      c.train.weighting = on ? ClassWeighting::kInverseFrequency : ClassWeighting::kNone;
    }
  }
  if (const auto it = j.find("baselines"); it != j.end()) {
    const auto& b = *it;
    reject_unknown(b, "baselines", {"logreg", "gbdt", "search"});
    read(b, "logreg", c.baselines.logreg, "baselines");
    read(b, "gbdt", c.baselines.gbdt, "baselines");
    if (const auto s = b.find("search"); s != b.end())
      c.baselines.search = read_search(*s, c.baselines.search, "baselines.search");
  }
  if (const auto it = j.find("audit"); it != j.end()) {
    const auto& a = *it;
    reject_unknown(a, "audit",
                   {"grouping", "bootstrap_replicates", "permutation_repeats", "shap_budget",
                    "shap_background", "shap_instances"});
    if (a.contains("grouping")) {
      std::string g;
      read(a, "grouping", g, "audit");
      if (g == "division") c.audit.grouping = Grouping::kDivision;
      else if (g == "urban") c.audit.grouping = Grouping::kUrban;
      else throw ConfigError("audit.grouping must be division or urban");
    }
    read(a, "bootstrap_replicates", c.audit.bootstrap_replicates, "audit");
    read(a, "permutation_repeats", c.audit.permutation_repeats, "audit");
    read(a, "shap_budget", c.audit.shap_budget, "audit");
    read(a, "shap_background", c.audit.shap_background, "audit");
    read(a, "shap_instances", c.audit.shap_instances, "audit");
  }
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

json pipeline_config_to_json(const PipelineConfig& c) {
  json formats = json::array();
  for (auto f : c.formats) formats.push_back(format_name(f));
  const auto& s = c.synthetic;
  return {
      {"data", c.data.string()},
      {"workspace", c.workspace.string()},
      {"seed", c.seed},
      {"threads", c.threads},
      {"strict", c.strict},
      {"complete_case", c.complete_case},
      {"skip_nas", c.skip_nas},
      {"formats", formats},
      {"synthetic",
       {{"counts", s.counts},
        {"mortality_per_mille", s.mortality_per_mille},
        {"wealth_mean", s.wealth_mean},
        {"noise_ratio", s.noise_ratio},
        {"wealth_sd", s.wealth_sd},
        {"urban_fraction", s.urban_fraction},
        {"healthcare_missing_rate", s.healthcare_missing_rate},
        {"birth_size_missing_rate", s.birth_size_missing_rate},
        {"logit_scale", s.logit_scale},
        {"year_share", s.year_share},
        {"psu_size", s.psu_size},
        {"seed", c.synthetic_seed_explicit ? s.seed : c.seed}}},
      {"search", search_json(c.search)},
      {"train",
       {{"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"early_stopping", c.train.early_stopping},
        {"optimizer", c.train.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
        {"class_weighting", c.train.weighting == ClassWeighting::kInverseFrequency}}},
      {"baselines",
       {{"logreg", c.baselines.logreg},
        {"gbdt", c.baselines.gbdt},
        {"search", search_json(c.baselines.search)}}},
      {"audit",
       {{"grouping", c.audit.grouping == Grouping::kDivision ? "division" : "urban"},
        {"bootstrap_replicates", c.audit.bootstrap_replicates},
        {"permutation_repeats", c.audit.permutation_repeats},
        {"shap_budget", c.audit.shap_budget},
        {"shap_background", c.audit.shap_background},
        {"shap_instances", c.audit.shap_instances}}},
  };
}

// ---------------------------------------------------------------------------
// Workspace helpers.

void Workspace::create() const {
  std::error_code ec;
  for (const auto& d : {data(), models(), metrics(), reports()}) {
    fs::create_directories(d, ec);
    if (ec) throw RuntimeFailure("cannot create " + d.string() + ": " + ec.message());
  }
}

std::string table_checksum(const FeatureTable& t) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  mix(t.x.data(), sizeof(double) * static_cast<std::size_t>(t.x.size()));
  mix(t.y.data(), sizeof(double) * static_cast<std::size_t>(t.y.size()));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace pipeline_io {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing artifact " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw DataError("malformed artifact " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeFailure("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<ModelEntry> present_models(const Workspace& ws) {
  std::vector<ModelEntry> out;
  for (const auto& [file, label] : std::initializer_list<std::pair<const char*, const char*>>{
           {"mlp", "NAS-MLP"}, {"logreg", "Logistic Regression (L2)"}, {"gbdt", "Gradient Boosting"}}) {
    const fs::path p = ws.models() / (std::string(file) + ".json");
    if (fs::exists(p)) out.push_back({file, label, p});
  }
  return out;
}

}  // namespace pipeline_io

using namespace pipeline_io;

namespace {

struct Featurized {
  Encoder encoder;
  FeatureTable train, validation, test;
};

void require_nonempty(const std::vector<BirthRecord>& r, const char* name) {
  if (r.empty()) throw DataError(std::string("the ") + name + " split is empty");
}

Featurized load_featurized(const Workspace& ws) {
  Featurized f;
  f.encoder = encoder_from_json(read_json(ws.data() / "encoder.json"));
  auto load = [&](const char* name) {
    const fs::path p = ws.data() / (std::string(name) + ".csv");
    if (!fs::exists(p)) throw DataError("missing artifact " + p.string());
    return f.encoder.featurize(load_records(p, true).records);
  };
  f.train = load("train");
  f.validation = load("validation");
  f.test = load("test");
  return f;
}

void write_feature_csv(const fs::path& path, const FeatureTable& t) {
  std::ostringstream out;
  for (const auto& d : feature_layout()) out << d.name << ',';
  out << "died_under5\n";
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.x.cols(); ++j) out << format_real(t.x(i, j)) << ',';
    out << (t.y(i) > 0.5 ? 1 : 0) << '\n';
  }
  write_text(path, out.str());
}

SearchConfig with_seed(SearchConfig s, std::uint64_t seed, int threads) {
  s.seed = seed;
  s.threads = threads;
  return s;
}

template <typename G>
void write_history(const fs::path& path, const SearchResultT<G>& r) {
  std::ostringstream out;
  write_history_csv(out, r);
  write_text(path, out.str());
}

json ci_json(const BootstrapCI& ci) {
  return {{"metric", bootstrap_metric_name(ci.metric)},
          {"point", ci.point},
          {"lower", ci.lower},
          {"upper", ci.upper},
          {"replicates", ci.replicates},
          {"seed", ci.seed},
          {"skipped", ci.skipped},
          {"degenerate", ci.degenerate}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages.

void cmd_generate(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  ws.create();
  SyntheticConfig s = c.synthetic;
  if (!c.synthetic_seed_explicit) s.seed = c.seed;
  write_records(ws.data() / "records.csv", generate_synthetic(s));
}

void cmd_split(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  ws.create();
  const fs::path source = c.data.empty() ? ws.data() / "records.csv" : c.data;
  if (!fs::exists(source)) throw DataError("input data not found: " + source.string());
  LoadResult loaded = load_records(source, c.strict);
  std::vector<BirthRecord> records = std::move(loaded.records);
  const std::size_t before = records.size();
  if (c.complete_case) records = complete_cases(records);
  const SplitSet split = temporal_split(records);
  require_nonempty(split.train, "training (2011, 2014)");
  require_nonempty(split.validation, "validation (2017)");
  require_nonempty(split.test, "test (2022)");
  write_records(ws.data() / "train.csv", split.train);
  write_records(ws.data() / "validation.csv", split.validation);
  write_records(ws.data() / "test.csv", split.test);
  write_json(ws.data() / "split.json",
             {{"source_rows", before + loaded.dropped + loaded.missing_outcome},
              {"dropped_invalid", loaded.dropped},
              {"excluded_missing_outcome", loaded.missing_outcome},
              {"excluded_incomplete", before - records.size()},
              {"train", split.train.size()},
              {"validation", split.validation.size()},
              {"test", split.test.size()}});
}

void cmd_featurize(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  ws.create();
  const fs::path train_path = ws.data() / "train.csv";
  if (!fs::exists(train_path)) throw DataError("missing artifact " + train_path.string());
  const Encoder enc = Encoder::fit(load_records(train_path, true).records);
  write_json(ws.data() / "encoder.json", encoder_to_json(enc));
  const Featurized f = load_featurized(ws);
  write_feature_csv(ws.data() / "features_train.csv", f.train);
  write_feature_csv(ws.data() / "features_validation.csv", f.validation);
  write_feature_csv(ws.data() / "features_test.csv", f.test);
  write_json(ws.data() / "features.json",
             {{"feature_order_hash", feature_order_hash()},
              {"train_checksum", table_checksum(f.train)},
              {"validation_checksum", table_checksum(f.validation)},
              {"test_checksum", table_checksum(f.test)}});
}

void cmd_search(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  if (c.skip_nas) {
    if (!fs::exists(ws.models() / "mlp.json"))
      throw DataError("--skip-nas needs a saved model at " + (ws.models() / "mlp.json").string());
    warn("search: skipped (--skip-nas); using the saved model");
    return;
  }
  const Featurized f = load_featurized(ws);
  TrainConfig train = c.train;
  train.seed = derive_seed(c.seed, {3});
  const NasOutcome nas =
      run_nas(f.train, f.validation, with_seed(c.search, derive_seed(c.seed, {2}), c.threads), train);
  save_model(TrainedModel{nas.model, f.encoder, std::nullopt}, ws.models() / "mlp.json");
  write_history(ws.metrics() / "nas_history.csv", nas.search);

  std::ostringstream hist;
  hist << "epoch,train_loss,val_auroc\n";
  for (std::size_t e = 0; e < nas.history.train_loss.size(); ++e)
    hist << e + 1 << ',' << format_real(nas.history.train_loss[e]) << ','
         << (e < nas.history.val_auroc.size() ? format_real(nas.history.val_auroc[e]) : "") << '\n';
  write_text(ws.metrics() / "mlp_training.csv", hist.str());
  write_json(ws.metrics() / "nas.json",
             {{"architecture", nas.model.spec.describe()},
              {"parameters", nas.model.spec.parameter_count(kNumFeatures)},
              {"search_fitness", nas.search.best_fitness},
              {"evaluations", nas.search.evaluations},
              {"cache_hits", nas.search.cache_hits},
              {"epochs_run", nas.history.epochs_run},
              {"best_epoch", nas.history.best_epoch},
              {"stopped_early", nas.history.stopped_early}});
}

void cmd_train_baselines(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  const Featurized f = load_featurized(ws);
  if (c.baselines.logreg && !(c.skip_nas && fs::exists(ws.models() / "logreg.json"))) {
    LogRegConfig lc;
    lc.weighting = c.train.weighting;
    const auto tuned = tune_logreg(
        f.train, f.validation, with_seed(c.baselines.search, derive_seed(c.seed, {4}), c.threads), lc);
    LinearModel m = train_logreg(f.train.x, f.train.y, tuned.best.l2(), lc);
    save_model(TrainedModel{std::move(m), f.encoder, std::nullopt}, ws.models() / "logreg.json");
    write_history(ws.metrics() / "logreg_search.csv", tuned.search);
  }
  if (c.baselines.gbdt && !(c.skip_nas && fs::exists(ws.models() / "gbdt.json"))) {
    const auto tuned = tune_gbdt(
        f.train, f.validation, with_seed(c.baselines.search, derive_seed(c.seed, {5}), c.threads));
    TreeEnsemble m = train_gbdt(f.train.x, f.train.y, tuned.best, derive_seed(c.seed, {6}),
                                c.train.weighting);
    save_model(TrainedModel{std::move(m), f.encoder, std::nullopt}, ws.models() / "gbdt.json");
    write_history(ws.metrics() / "gbdt_search.csv", tuned.search);
  }
}

void cmd_calibrate(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  const Featurized f = load_featurized(ws);
  const auto models = present_models(ws);
  if (models.empty()) throw DataError("calibrate: no trained models in " + ws.models().string());
  json out = json::array();
  for (const auto& entry : models) {
    TrainedModel m = load_model(entry.path);
    const VectorXd val_logit = m.predict_logit(f.validation.x);
    const VectorXd test_logit = m.predict_logit(f.test.x);
    const PlattCalibrator cal = fit_platt(val_logit, f.validation.y);
    m.calibrator = cal;
    save_model(m, entry.path);
    auto raw = [](const VectorXd& z) -> VectorXd { return z.unaryExpr([](double v) { return sigmoid(v); }); };
    out.push_back({{"model", entry.key},
                   {"slope", cal.slope},
                   {"intercept", cal.intercept},
                   {"smoothed_targets", cal.smoothed_targets},
                   {"validation_brier_before", brier(raw(val_logit), f.validation.y)},
                   {"validation_brier_after", brier(cal.apply(val_logit), f.validation.y)},
                   {"test_brier_before", brier(raw(test_logit), f.test.y)},
                   {"test_brier_after", brier(cal.apply(test_logit), f.test.y)}});
  }
  write_json(ws.metrics() / "calibration.json", out);
}

void cmd_evaluate(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  const Featurized f = load_featurized(ws);
  const auto models = present_models(ws);
  if (models.empty()) throw DataError("evaluate: no trained models in " + ws.models().string());

  json entries = json::array();
  std::ostringstream csv, rel;
  csv << "model,auroc,weighted_auroc,brier_uncalibrated,brier_calibrated,sensitivity_top10,"
         "f1,threshold,max_calibration_gap\n";
  rel << "model,bin_lower,bin_upper,count,mean_predicted,observed_rate\n";
  std::vector<VectorXd> logits;
  for (const auto& entry : models) {
    const TrainedModel m = load_model(entry.path);
    if (!m.calibrator) throw DataError("evaluate: " + entry.key + " is not calibrated; run calibrate");
    const VectorXd z = m.predict_logit(f.test.x);
    const VectorXd raw = m.predict_raw_proba(f.test.x);
    const VectorXd p = m.calibrator->apply(z);
    // The decision threshold is chosen on validation, then applied to test.
    const ThresholdResult thr = f1_optimal_threshold(m.predict_proba(f.validation.x), f.validation.y);
    const auto bins = reliability_bins(p, f.test.y, 10);
    json e = {{"model", entry.key},
              {"label", entry.label},
              {"auroc", auroc(z, f.test.y)},
              {"weighted_auroc", weighted_auroc(z, f.test.y, f.test.sampling_weight)},
              {"brier_uncalibrated", brier(raw, f.test.y)},
              {"brier_calibrated", brier(p, f.test.y)},
              {"sensitivity_top10", sensitivity_at_fraction(z, f.test.y, 0.10)},
              {"f1", f1_at_threshold(p, f.test.y, thr.threshold)},
              {"threshold", thr.threshold},
              {"max_calibration_gap", max_calibration_gap(bins)}};
    if (const auto* mlp = std::get_if<Mlp>(&m.model)) e["architecture"] = mlp->spec.describe();
    csv << entry.key;
    for (const char* k : {"auroc", "weighted_auroc", "brier_uncalibrated", "brier_calibrated",
                          "sensitivity_top10", "f1", "threshold", "max_calibration_gap"})
      csv << ',' << format_real(e[k].get<double>());
    csv << '\n';
    for (const auto& b : bins)
      rel << entry.key << ',' << format_real(b.lower) << ',' << format_real(b.upper) << ','
          << b.count << ',' << format_real(b.mean_predicted) << ',' << format_real(b.observed_rate)
          << '\n';
    entries.push_back(std::move(e));
    logits.push_back(z);
  }
  json delong = json::array();
  for (std::size_t k = 1; k < models.size(); ++k) {
    const DeLongResult d = delong_test(logits[0], logits[k], f.test.y);
    delong.push_back({{"reference", models[0].key},
                      {"comparator", models[k].key},
                      {"auc_reference", d.auc_a},
                      {"auc_comparator", d.auc_b},
                      {"z", d.z},
                      {"p", d.p},
                      {"zero_variance", d.zero_variance}});
  }
  const auto pos = [](const FeatureTable& t) { return (t.y.array() > 0.5).count(); };
  json metrics = {
      {"seed", c.seed},
      {"feature_order_hash", feature_order_hash()},
      {"splits",
       {{"train", {{"n", f.train.rows()}, {"deaths", pos(f.train)}, {"checksum", table_checksum(f.train)}}},
        {"validation",
         {{"n", f.validation.rows()}, {"deaths", pos(f.validation)}, {"checksum", table_checksum(f.validation)}}},
        {"test", {{"n", f.test.rows()}, {"deaths", pos(f.test)}, {"checksum", table_checksum(f.test)}}}}},
      {"models", entries},
      {"delong", delong}};
  write_json(ws.metrics() / "metrics.json", metrics);
  write_text(ws.metrics() / "metrics.csv", csv.str());
  write_text(ws.metrics() / "reliability.csv", rel.str());
}

void cmd_audit(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  const Featurized f = load_featurized(ws);
  const auto models = present_models(ws);
  if (models.empty()) throw DataError("audit: no trained models in " + ws.models().string());

  const TrainedModel primary = load_model(models[0].path);
  const SubgroupReport report = subgroup_eval(primary.predict_proba(f.test.x), f.test, c.audit.grouping);
  {
    std::ostringstream out;
    write_subgroup_csv(out, report);
    write_text(ws.metrics() / "subgroups.csv", out.str());
  }
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"group", r.group},
                    {"n", r.n},
                    {"deaths", r.deaths},
                    {"rate_per_1000", r.rate_per_mille},
                    {"auroc", r.auroc ? json(*r.auroc) : json(nullptr)},
                    {"brier", r.brier},
                    {"wealth_mean", r.wealth_mean}});

  const Predictor predictor = [&primary](const MatrixXd& x) { return primary.predict_logit(x); };
  const auto importance = permutation_importance_groups(predictor, f.test.x, f.test.y,
                                                        c.audit.permutation_repeats,
                                                        derive_seed(c.seed, {8}));
  json imp = json::array();
  std::ostringstream imp_csv;
  imp_csv << "feature_group,mean_auroc_drop\n";
  for (const auto& e : importance) {
    imp.push_back({{"group", e.name}, {"mean_auroc_drop", e.mean_drop}});
    imp_csv << e.name << ',' << format_real(e.mean_drop) << '\n';
  }
  write_text(ws.metrics() / "permutation_importance.csv", imp_csv.str());
  write_json(ws.metrics() / "audit.json",
             {{"model", models[0].key},
              {"grouping", c.audit.grouping == Grouping::kDivision ? "division" : "urban"},
              {"subgroups", rows},
              {"gradient_r", report.gradient_r ? json(*report.gradient_r) : json(nullptr)},
              {"permutation_importance", imp}});

  // Design-aware intervals for each model's test AUROC.
  json boot = json::object();
  const SurveyDesign design = SurveyDesign::from(f.test);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const TrainedModel m = k == 0 ? primary : load_model(models[k].path);
    const std::uint64_t seed = derive_seed(c.seed, {7, k});
    try {
      const VectorXd z = m.predict_logit(f.test.x);
      json e = {{"auroc", ci_json(design_bootstrap(z, f.test.y, design, BootstrapMetric::kAuroc,
                                                   c.audit.bootstrap_replicates, seed, c.threads))}};
      if (k == 0)
        e["brier"] = ci_json(design_bootstrap(m.predict_proba(f.test.x), f.test.y, design,
                                              BootstrapMetric::kBrier, c.audit.bootstrap_replicates,
                                              derive_seed(seed, {1}), c.threads));
      boot[models[k].key] = std::move(e);
    } catch (const DataError& e) {
      warn(std::string("audit: bootstrap unavailable for ") + models[k].key + ": " + e.what());
    }
  }
  write_json(ws.metrics() / "bootstrap.json", boot);
}

void cmd_explain(const PipelineConfig& c) {
  const Workspace ws{c.workspace};
  const Featurized f = load_featurized(ws);
  const auto models = present_models(ws);
  if (models.empty()) throw DataError("explain: no trained models in " + ws.models().string());
  const TrainedModel primary = load_model(models[0].path);
  const MatrixXd background = sample_rows(f.train.x, c.audit.shap_background, derive_seed(c.seed, {9, 0}));
  const MatrixXd instances = sample_rows(f.test.x, c.audit.shap_instances, derive_seed(c.seed, {9, 1}));
  // Attributions are on the probability scale of the uncalibrated model.
  const Predictor predictor = [&primary](const MatrixXd& x) { return primary.predict_raw_proba(x); };
  const ShapRanking ranking = shap_ranking(predictor, instances, background, c.audit.shap_budget,
                                           derive_seed(c.seed, {9, 2}), c.threads);
  std::ostringstream out;
  write_shap_csv(out, instances, ranking);
  write_text(ws.metrics() / "shap.csv", out.str());
  auto list = [](const std::vector<ShapRankEntry>& v) {
    json a = json::array();
    for (const auto& e : v) a.push_back({{"name", e.name}, {"mean_abs_shap", e.mean_abs}});
    return a;
  };
  write_json(ws.metrics() / "shap_ranking.json",
             {{"model", models[0].key},
              {"instances", instances.rows()},
              {"background", background.rows()},
              {"budget", c.audit.shap_budget},
              {"per_feature", list(ranking.per_feature)},
              {"per_group", list(ranking.per_group)}});
}

void cmd_run(const PipelineConfig& c) {
  if (c.data.empty()) cmd_generate(c);
  cmd_split(c);
  cmd_featurize(c);
  cmd_search(c);
  cmd_train_baselines(c);
  cmd_calibrate(c);
  cmd_evaluate(c);
  cmd_audit(c);
  cmd_explain(c);
  cmd_report(c);
}

void run_stage(std::string_view stage, const PipelineConfig& config) {
  config.validate();
  const Workspace ws{config.workspace};
  ws.create();
  static const std::map<std::string_view, void (*)(const PipelineConfig&)> kDispatch = {
      {"generate", cmd_generate}, {"split", cmd_split},
      {"featurize", cmd_featurize}, {"search", cmd_search},
      {"train-baselines", cmd_train_baselines}, {"calibrate", cmd_calibrate},
      {"evaluate", cmd_evaluate}, {"audit", cmd_audit},
      {"explain", cmd_explain}, {"report", cmd_report},
      {"run", cmd_run}};
  const auto it = kDispatch.find(stage);
  if (it == kDispatch.end()) throw ConfigError("unknown stage '" + std::string(stage) + "'");
  auto mark_stale = [&](const std::exception& e) {
    std::ofstream(ws.stale_marker()) << "stage " << stage << " failed: " << e.what() << '\n';
  };
  const std::string prefix = "stage " + std::string(stage) + ": ";
  try {
    it->second(config);
  } catch (const ConfigError& e) {
    mark_stale(e);
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    mark_stale(e);
    throw DataError(prefix + e.what());
  } catch (const std::exception& e) {
    mark_stale(e);
    throw RuntimeFailure(prefix + e.what());
  }
  if (stage == "run") {
    std::error_code ec;
    fs::remove(ws.stale_marker(), ec);
  }
}

}  // namespace mortnas
