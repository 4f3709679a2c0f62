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

#include <filesystem>
#include <optional>
#include <string_view>
#include <variant>

#include "json.hpp"
#include "mortnas/audit.hpp"
#include "mortnas/baselines.hpp"
#include "mortnas/calibration.hpp"
#include "mortnas/features.hpp"
#include "mortnas/neural.hpp"

namespace mortnas {

enum class ModelKind { kMlp, kLogReg, kGbdt };
std::string_view model_kind_name(ModelKind k);

/// A fitted model bundled with the encoder it was trained behind and an
/// optional calibration map. Outputs are log-odds before calibration.
struct TrainedModel {
  std::variant<Mlp, LinearModel, TreeEnsemble> model;
  Encoder encoder;
  std::optional<PlattCalibrator> calibrator;

  ModelKind kind() const;
  VectorXd predict_logit(const MatrixXd& x) const;
  /// Calibrated when a calibrator is attached, sigmoid(logit) otherwise.
  VectorXd predict_proba(const MatrixXd& x) const;
  /// sigmoid(logit), ignoring any calibrator.
  VectorXd predict_raw_proba(const MatrixXd& x) const;
};

inline constexpr std::string_view kModelFormat = "mortnas-model";
inline constexpr int kModelFormatVersion = 1;

/// Envelope: format, version, kind, feature_order_hash, encoder, model,
/// calibrator (null when absent).
nlohmann::json model_to_json(const TrainedModel& m);
/// DataError on a wrong format tag, version, or feature-order hash.
TrainedModel model_from_json(const nlohmann::json& j);

nlohmann::json encoder_to_json(const Encoder& e);
Encoder encoder_from_json(const nlohmann::json& j);

void save_model(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace mortnas
