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

#include "mortnas/model_io.hpp"

#include <fstream>

namespace mortnas {

using nlohmann::json;

namespace {

template <typename Derived>
json dense_to_json(const Eigen::DenseBase<Derived>& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  const auto r = static_cast<Eigen::Index>(j.size());
  const auto c = r == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != c) throw DataError("model file: ragged matrix");
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

json vec_to_json(const Eigen::Ref<const VectorXd>& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

RowVectorX<double> row_from_json(const json& j) { return vec_from_json(j).transpose(); }

json row_to_json(const RowVectorX<double>& v) { return vec_to_json(v.transpose()); }

json standardizer_to_json(const Encoder::Standardizer& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

Encoder::Standardizer standardizer_from_json(const json& j) {
  return {j.at("mean").get<double>(), j.at("sd").get<double>()};
}

json mlp_to_json(const Mlp& m) {
  json layers = json::array();
  for (const auto& l : m.hidden) {
    json lj = {{"weight", dense_to_json(l.weight)}, {"bias", row_to_json(l.bias)}};
    if (m.spec.batch_norm) {
      lj["gamma"] = row_to_json(l.gamma);
      lj["beta"] = row_to_json(l.beta);
      lj["running_mean"] = row_to_json(l.running_mean);
      lj["running_var"] = row_to_json(l.running_var);
    }
    layers.push_back(std::move(lj));
  }
  return {{"architecture",
           {{"hidden_widths", m.spec.hidden_widths},
            {"activation", std::string(activation_name(m.spec.activation))},
            {"dropout", m.spec.dropout},
            {"batch_norm", m.spec.batch_norm}}},
          {"input_dim", m.input_dim},
          {"hidden", std::move(layers)},
          {"out_weight", vec_to_json(m.out_weight)},
          {"out_bias", vec_to_json(m.out_bias)}};
}

Mlp mlp_from_json(const json& j) {
  Mlp m;
  const auto& a = j.at("architecture");
  m.spec.hidden_widths = a.at("hidden_widths").get<std::vector<int>>();
  const auto act = parse_activation(a.at("activation").get<std::string>());
  if (!act) throw DataError("model file: unknown activation");
  m.spec.activation = *act;
  m.spec.dropout = a.at("dropout").get<double>();
  m.spec.batch_norm = a.at("batch_norm").get<bool>();
  m.input_dim = j.at("input_dim").get<int>();
  for (const auto& lj : j.at("hidden")) {
    HiddenLayer<double> l;
    l.weight = matrix_from_json(lj.at("weight"));
    l.bias = row_from_json(lj.at("bias"));
    if (m.spec.batch_norm) {
      l.gamma = row_from_json(lj.at("gamma"));
      l.beta = row_from_json(lj.at("beta"));
      l.running_mean = row_from_json(lj.at("running_mean"));
      l.running_var = row_from_json(lj.at("running_var"));
    }
    m.hidden.push_back(std::move(l));
  }
  m.out_weight = vec_from_json(j.at("out_weight"));
  m.out_bias = vec_from_json(j.at("out_bias"));
  if (m.hidden.size() != m.spec.hidden_widths.size())
    throw DataError("model file: layer count does not match the architecture");
  return m;
}

json logreg_to_json(const LinearModel& m) {
  return {{"weights", vec_to_json(m.weights)}, {"bias", m.bias}, {"l2", m.l2}};
}

LinearModel logreg_from_json(const json& j) {
  LinearModel m;
  m.weights = vec_from_json(j.at("weights"));
  m.bias = j.at("bias").get<double>();
  m.l2 = j.at("l2").get<double>();
  m.converged = true;
  return m;
}

json gbdt_to_json(const TreeEnsemble& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  return {{"initial_logit", m.initial_logit},
          {"learning_rate", m.learning_rate},
          {"node_fields", {"feature", "threshold", "left", "right", "value"}},
          {"trees", std::move(trees)}};
}

TreeEnsemble gbdt_from_json(const json& j) {
  TreeEnsemble m;
  m.initial_logit = j.at("initial_logit").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  for (const auto& tj : j.at("trees")) {
    RegressionTree t;
    for (const auto& nj : tj) {
      RegressionTree::Node n;
      n.feature = nj.at(0).get<int>();
      n.threshold = nj.at(1).get<double>();
      n.left = nj.at(2).get<int>();
      n.right = nj.at(3).get<int>();
      n.value = nj.at(4).get<double>();
      t.nodes.push_back(n);
    }
    const auto size = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes)
      if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
        throw DataError("model file: tree child index out of range");
    if (t.nodes.empty()) throw DataError("model file: empty tree");
    m.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace

std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kLogReg: return "logreg";
    case ModelKind::kGbdt: return "gbdt";
  }
  return "?";
}

ModelKind TrainedModel::kind() const { return static_cast<ModelKind>(model.index()); }

VectorXd TrainedModel::predict_logit(const MatrixXd& x) const {
  return std::visit(
      [&](const auto& m) -> VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Mlp>)
          return predict_logits(m, x);
        else
          return m.predict_logits(x);
      },
      model);
}

VectorXd TrainedModel::predict_raw_proba(const MatrixXd& x) const {
  return predict_logit(x).unaryExpr([](double z) { return sigmoid(z); });
}

VectorXd TrainedModel::predict_proba(const MatrixXd& x) const {
  if (calibrator) return calibrator->apply(predict_logit(x));
  return predict_raw_proba(x);
}

json encoder_to_json(const Encoder& e) {
  return {{"birth_order", standardizer_to_json(e.birth_order())},
          {"parity", standardizer_to_json(e.parity())},
          {"high_risk_count", standardizer_to_json(e.risk_count())},
          {"observed_birth_sizes", e.observed_birth_sizes()}};
}

Encoder encoder_from_json(const json& e) {
  try {
    return Encoder::from_parts(standardizer_from_json(e.at("birth_order")),
                               standardizer_from_json(e.at("parity")),
                               standardizer_from_json(e.at("high_risk_count")),
                               e.at("observed_birth_sizes").get<std::vector<int>>());
  } catch (const json::exception& ex) {
    throw DataError(std::string("encoder: ") + ex.what());
  }
}

json model_to_json(const TrainedModel& m) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelFormatVersion;
  j["kind"] = model_kind_name(m.kind());
  j["feature_order_hash"] = feature_order_hash();
  j["encoder"] = encoder_to_json(m.encoder);
  j["model"] = std::visit(
      [](const auto& mm) -> json {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, Mlp>)
          return mlp_to_json(mm);
        else if constexpr (std::is_same_v<T, LinearModel>)
          return logreg_to_json(mm);
        else
          return gbdt_to_json(mm);
      },
      m.model);
  if (m.calibrator)
    j["calibrator"] = {{"slope", m.calibrator->slope},
                       {"intercept", m.calibrator->intercept},
                       {"smoothed_targets", m.calibrator->smoothed_targets}};
  else
    j["calibrator"] = nullptr;
  return j;
}

TrainedModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw DataError("model file: unrecognized format tag");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw DataError("model file: unsupported version");
    if (j.at("feature_order_hash").get<std::string>() != feature_order_hash())
      throw DataError("model file: feature order hash does not match this build's layout");
    TrainedModel m;
    m.encoder = encoder_from_json(j.at("encoder"));
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "mlp")
      m.model = mlp_from_json(j.at("model"));
    else if (kind == "logreg")
      m.model = logreg_from_json(j.at("model"));
    else if (kind == "gbdt")
      m.model = gbdt_from_json(j.at("model"));
    else
      throw DataError("model file: unknown kind '" + kind + "'");
    if (const auto& c = j.at("calibrator"); !c.is_null()) {
      PlattCalibrator p;
      p.slope = c.at("slope").get<double>();
      p.intercept = c.at("intercept").get<double>();
      p.smoothed_targets = c.at("smoothed_targets").get<bool>();
      m.calibrator = p;
    }
    return m;
  } catch (const json::exception& ex) {
    throw DataError(std::string("model file: ") + ex.what());
  }
}

void save_model(const TrainedModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write model file " + path.string());
  out << model_to_json(m).dump(1) << '\n';
  if (!out) throw RuntimeFailure("failed writing model file " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw DataError("model file " + path.string() + ": " + ex.what());
  }
  return model_from_json(j);
}

}  // namespace mortnas
