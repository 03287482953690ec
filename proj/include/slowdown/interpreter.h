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

// Additive decomposition of forest predictions.
//
// Along the decision path of a tree, each edge from a parent split on feature
// k to the child the input descends into moves the running estimate by
// (child mean - parent mean). Crediting that difference to k gives
//
//   leaf mean = root mean + sum_k contribution_k
//
// exactly, because the differences telescope. Averaging over the trees gives
// the forest version: prediction = bias + sum_k fc_k, where the bias is the
// mean of the root means and does not depend on the input.

#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "slowdown/forest.h"
#include "slowdown/telemetry.h"

namespace slowdown {

struct TreeBreakdown {
  double bias = 0.0;  // root mean of the tree
  std::vector<double> contributions;
};

struct ContributionBreakdown {
  double bias = 0.0;
  std::vector<double> contributions;  // one per feature, in schema order
  double prediction = 0.0;

  // |bias + sum(contributions) - prediction|.
  double additivity_error() const;
};

TreeBreakdown decompose_tree(const RegressionTree& tree, std::span<const double> x);

ContributionBreakdown decompose_forest(const ForestModel& model,
                                       std::span<const double> x);

// {"bias", "prediction", "contributions": [{"feature", "value"}]}
nlohmann::json to_json(const ContributionBreakdown& breakdown,
                       const FeatureSchema& schema);
ContributionBreakdown breakdown_from_json(const nlohmann::json& doc,
                                          const FeatureSchema& schema);

}  // namespace slowdown
