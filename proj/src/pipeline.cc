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


#include "slowdown/pipeline.h"

namespace slowdown {

TrainedPipeline train_pipeline(const EncodedTable& table, const FeatureSchema& schema,
                               const Hyperparams& hp, const PipelineOptions& options) {
  auto filtered = filter_correlated(table.X, schema, options.correlation_threshold);

  TrainOptions train;
  train.allowed_features = filtered.kept;
  train.threads = options.threads;
  train.schema_fingerprint = schema.fingerprint();

  TrainedPipeline out;
  out.schema = schema;
  out.encoding = table.encoding;
  out.model = train_forest(table.X, table.y, hp, train);
  out.baselines = compute_all_baselines(table, schema, out.model, options.baseline);
  out.removed_features = std::move(filtered.removed);
  return out;
}

TrainedPipeline train_pipeline(const Dataset& dataset, const Hyperparams& hp,
                               const PipelineOptions& options) {
  return train_pipeline(impute_and_encode(dataset), dataset.schema, hp, options);
}

}  // namespace slowdown
