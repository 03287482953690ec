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


// Offline training pass: encode, filter correlated features, grow the forest,
// compute baselines.

#pragma once

#include <vector>

#include "slowdown/baseline.h"
#include "slowdown/forest.h"
#include "slowdown/telemetry.h"

namespace slowdown {

struct PipelineOptions {
  double correlation_threshold = 0.95;
  unsigned threads = 0;
  BaselineOptions baseline;
};

struct TrainedPipeline {
  FeatureSchema schema;
  Encoding encoding;
  ForestModel model;
  BaselineStore baselines;
  // Features the correlation filter kept out of the split candidates.
  std::vector<RemovedPair> removed_features;
};

TrainedPipeline train_pipeline(const Dataset& dataset, const Hyperparams& hp,
                               const PipelineOptions& options = {});

// Same pass over an already encoded table.
TrainedPipeline train_pipeline(const EncodedTable& table, const FeatureSchema& schema,
                               const Hyperparams& hp,
                               const PipelineOptions& options = {});

}  // namespace slowdown
