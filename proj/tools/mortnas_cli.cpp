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

// mortnas: temporal-split mortality modelling pipeline.
//
//   mortnas run --config cfg.json --seed 7
//   mortnas report --config cfg.json --format md
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 runtime failure.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mortnas/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<bool> strict;
  bool complete_case = false;
  bool skip_nas = false;
  std::vector<std::string> formats;
  std::string workspace;
  std::string data;
};

mortnas::PipelineConfig build_config(const Overrides& o) {
  mortnas::PipelineConfig c =
      o.config.empty() ? mortnas::PipelineConfig{} : mortnas::load_pipeline_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.strict) c.strict = *o.strict;
  if (o.complete_case) c.complete_case = true;
  if (o.skip_nas) c.skip_nas = true;
  if (!o.formats.empty()) {
    c.formats.clear();
    for (const auto& f : o.formats) c.formats.insert(mortnas::parse_report_format(f));
  }
  if (!o.workspace.empty()) c.workspace = o.workspace;
  if (!o.data.empty()) c.data = o.data;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Under-five mortality prediction pipeline"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "JSON pipeline configuration");
  app.add_option("--seed", o.seed, "Global seed; every stage seed derives from it");
  app.add_option("--threads", o.threads, "Worker cap (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_flag("--strict{true},--lenient{false}", o.strict,
               "Reject (strict) or drop and count (lenient) invalid rows");
  app.add_flag("--complete-case", o.complete_case, "Drop records with missing healthcare or size fields");
  app.add_flag("--skip-nas", o.skip_nas, "Reuse saved models instead of searching and training");
  app.add_option("--format", o.formats, "Report formats to emit (repeatable)")
      ->check(CLI::IsMember({"json", "csv", "md"}));
  app.add_option("--workspace", o.workspace, "Workspace directory");
  app.add_option("--data", o.data, "Input CSV (synthetic data is generated when absent)");

  for (auto stage : mortnas::kStages) {
    auto* sub = app.add_subcommand(std::string(stage));
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    const mortnas::PipelineConfig config = build_config(o);
    if (config.threads > 0) mortnas::set_default_threads(config.threads);
    mortnas::run_stage(stage, config);
  } catch (const mortnas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mortnas::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
