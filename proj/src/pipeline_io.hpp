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

// Workspace file helpers shared by the pipeline stages and the report.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mortnas/pipeline.hpp"

namespace mortnas::pipeline_io {

/// DataError naming the path when the artifact is absent or malformed.
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct ModelEntry {
  std::string key;    // mlp, logreg, gbdt
  std::string label;  // table row name
  std::filesystem::path path;
};

/// Saved models in fixed order, the network first.
std::vector<ModelEntry> present_models(const Workspace& ws);

}  // namespace mortnas::pipeline_io
