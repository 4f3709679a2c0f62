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

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mortnas {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

using Rng = std::mt19937_64;

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mixes a base seed with a path of indices (generation, slot, replicate...)
/// into an independent stream seed. splitmix64 finalizer per component.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index runs
/// exactly once; callers must write results into index-addressed slots so
/// the outcome does not depend on scheduling.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body);

/// Global worker cap used when a caller passes threads <= 0.
int default_threads();
void set_default_threads(int threads);

// Warnings go through a replaceable sink so tests can capture or mute them.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace mortnas
