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

// CART regression trees, bagged random forests and the linear comparator.
//
// Every node keeps the mean target of the samples that reached it during
// training, not only leaves. The interpreter relies on this: a prediction is
// the root mean plus the sum of child-minus-parent mean differences along the
// decision path.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slowdown/telemetry.h"

namespace slowdown {

struct TreeNode {
  double mean = 0.0;         // mean target of the samples at this node
  std::int64_t count = 0;    // number of (bootstrap) samples at this node
  int feature = -1;          // split feature; -1 on leaves
  double threshold = 0.0;    // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Flat node storage; nodes[0] is the root, children always follow their parent.
struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::size_t index = 0;

  const TreeNode& root() const { return nodes.front(); }
  std::size_t leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const {
    return nodes[leaf_index(x)].mean;
  }
  std::size_t depth() const;

  bool operator==(const RegressionTree&) const = default;
};

struct Hyperparams {
  int num_trees = 100;
  std::optional<int> max_depth;           // unlimited when empty
  int min_samples_leaf = 5;
  std::optional<int> features_per_split;  // max(1, K/3) when empty
  bool bootstrap = true;
  std::uint64_t seed = 0;

  // Throws kInvalidArgument when a bound is violated for K features.
  void validate(std::size_t num_features) const;
  int resolved_features_per_split(std::size_t num_features) const;

  bool operator==(const Hyperparams&) const = default;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  Hyperparams hyperparams;  // features_per_split is always resolved
  std::size_t num_features = 0;
  // Features trees were allowed to split on (all of them unless filtered).
  std::vector<std::size_t> split_features;
  std::string schema_fingerprint;
  std::int64_t trained_at = 0;  // epoch seconds
  std::size_t training_row_count = 0;

  bool operator==(const ForestModel&) const = default;
};

struct TrainOptions {
  // Restricts the candidate split features; empty means all columns.
  std::vector<std::size_t> allowed_features;
  // Worker threads for tree growing; 0 picks the hardware concurrency. The
  // resulting forest does not depend on this value.
  unsigned threads = 0;
  std::string schema_fingerprint;
};

// Grows hp.num_trees trees, each on a bootstrap resample drawn from an RNG
// seeded with (hp.seed, tree index). Splits maximize variance reduction over
// features_per_split randomly ordered non-constant candidates; ties go to the
// lowest feature index, then the lowest threshold. Thresholds are midpoints
// between adjacent distinct values.
ForestModel train_forest(const Matrix& X, std::span<const double> y,
                         const Hyperparams& hp, const TrainOptions& options = {});

double predict(const ForestModel& model, std::span<const double> x);
std::vector<double> predict_per_tree(const ForestModel& model,
                                     std::span<const double> x);

struct LinearModel {
  double intercept = 0.0;
  std::vector<double> coefficients;

  double predict(std::span<const double> x) const;
};

// Ordinary least squares via the normal equations on standardized columns,
// with 1e-8 ridge jitter when the Gram matrix is singular.
LinearModel train_linear(const Matrix& X, std::span<const double> y);

nlohmann::json to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const ForestModel& model);
ForestModel forest_from_json(const nlohmann::json& doc);

}  // namespace slowdown
