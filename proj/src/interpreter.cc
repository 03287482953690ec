// Copyright 2026 The Slowdown Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "slowdown/interpreter.h"

#include <cmath>
#include <numeric>
#include <string>

#include "slowdown/error.h"

namespace slowdown {

using nlohmann::json;

double ContributionBreakdown::additivity_error() const {
  const double total =
      std::accumulate(contributions.begin(), contributions.end(), bias);
  return std::abs(total - prediction);
}

namespace {

void accumulate_path(const RegressionTree& tree, std::span<const double> x,
                     std::vector<double>& contributions) {
  std::size_t i = 0;
  while (!tree.nodes[i].is_leaf()) {
    const TreeNode& parent = tree.nodes[i];
    const auto k = static_cast<std::size_t>(parent.feature);
    i = static_cast<std::size_t>(x[k] <= parent.threshold ? parent.left
                                                          : parent.right);
    contributions[k] += tree.nodes[i].mean - parent.mean;
  }
}

}  // namespace

TreeBreakdown decompose_tree(const RegressionTree& tree, std::span<const double> x) {
  for (const auto& n : tree.nodes) {
    if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= x.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "input has " + std::to_string(x.size()) +
                      " features but the tree splits on feature " +
                      std::to_string(n.feature));
    }
  }
  TreeBreakdown out;
  out.bias = tree.root().mean;
  out.contributions.assign(x.size(), 0.0);
  accumulate_path(tree, x, out.contributions);
  return out;
}

ContributionBreakdown decompose_forest(const ForestModel& model,
                                       std::span<const double> x) {
  if (x.size() != model.num_features) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(model.num_features) +
                    " features, got " + std::to_string(x.size()));
  }
  ContributionBreakdown out;
  out.contributions.assign(x.size(), 0.0);
  double bias_sum = 0.0;
  double prediction_sum = 0.0;
  for (const auto& tree : model.trees) {
    bias_sum += tree.root().mean;
    accumulate_path(tree, x, out.contributions);
    prediction_sum += tree.predict(x);
  }
  const double J = static_cast<double>(model.trees.size());
  out.bias = bias_sum / J;
  for (double& c : out.contributions) c /= J;
  out.prediction = prediction_sum / J;
  return out;
}

json to_json(const ContributionBreakdown& breakdown, const FeatureSchema& schema) {
  json contributions = json::array();
  for (std::size_t k = 0; k < breakdown.contributions.size(); ++k) {
    contributions.push_back(
        {{"feature", k < schema.size() ? schema[k].name : std::to_string(k)},
         {"value", breakdown.contributions[k]}});
  }
  return {{"bias", breakdown.bias},
          {"prediction", breakdown.prediction},
          {"contributions", std::move(contributions)}};
}

ContributionBreakdown breakdown_from_json(const json& doc,
                                          const FeatureSchema& schema) {
  ContributionBreakdown out;
  out.bias = doc.at("bias").get<double>();
  out.prediction = doc.at("prediction").get<double>();
  out.contributions.assign(schema.size(), 0.0);
  for (const auto& c : doc.at("contributions")) {
    const auto name = c.at("feature").get<std::string>();
    auto k = schema.index_of(name);
    if (!k) throw Error(ErrorCode::kSchemaMismatch, "unknown feature " + name);
    out.contributions[*k] = c.at("value").get<double>();
  }
  return out;
}

}  // namespace slowdown
