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

#include "mortnas/neural.hpp"

#include <sstream>

namespace mortnas {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kReLU: return "relu";
    case Activation::kELU: return "elu";
    case Activation::kSELU: return "selu";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

std::optional<Activation> parse_activation(std::string_view name) {
  for (Activation a : kActivations)
    if (activation_name(a) == name) return a;
  return std::nullopt;
}

void ArchitectureSpec::validate() const {
  if (hidden_widths.empty() || hidden_widths.size() > static_cast<std::size_t>(kMaxDepth))
    throw ConfigError("architecture: depth must be in 1..5");
  for (int w : hidden_widths)
    if (std::find(kAllowedWidths.begin(), kAllowedWidths.end(), w) == kAllowedWidths.end())
      throw ConfigError("architecture: width " + std::to_string(w) + " not in {16,32,64,128}");
  if (!(dropout >= 0.0 && dropout <= kMaxDropout))
    throw ConfigError("architecture: dropout must be in [0, 0.5]");
}

long ArchitectureSpec::parameter_count(int input_dim) const {
  long total = 0;
  long fan_in = input_dim;
  for (int w : hidden_widths) {
    total += fan_in * w + w;
    if (batch_norm) total += 2L * w;
    fan_in = w;
  }
  return total + fan_in + 1;
}

std::string ArchitectureSpec::describe() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) os << (i ? "," : "") << hidden_widths[i];
  os << "] " << activation_name(activation) << " dropout=" << dropout
     << " bn=" << (batch_norm ? "on" : "off");
  return os.str();
}

ClassWeights inverse_frequency_weights(const VecRef& labels) {
  double pos = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) pos += labels(i) > 0.5;
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) return {};
  return {1.0, neg / pos};
}

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (early_stopping && patience >= max_epochs)
    throw ConfigError("train: patience must be < max_epochs");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
}

}  // namespace mortnas
