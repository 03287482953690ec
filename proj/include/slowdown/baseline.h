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


// Per-template expected runtime and expected feature vector, plus the model's
// breakdown at that vector.

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slowdown/forest.h"
#include "slowdown/interpreter.h"
#include "slowdown/telemetry.h"

namespace slowdown {

struct TemplateBaseline {
  std::string template_id;
  double baseline_runtime = 0.0;            // y^β
  std::vector<double> baseline_features;    // x^β
  double predicted_baseline = 0.0;          // y'^β
  ContributionBreakdown baseline_breakdown; // fc^β
  std::size_t support = 0;                  // jobs inside the band
  double baseline_gap = 0.0;                // |y'^β - y^β| / y^β
};

struct BaselineOptions {
  // Below this many jobs the band is ignored and every job is used.
  std::size_t min_jobs_for_band = 10;
  double lower_percentile = 45.0;
  double upper_percentile = 55.0;
  // Average the breakdowns of the band jobs instead of decomposing x^β once.
  bool average_breakdowns = false;
};

// Positions in `runtimes` inside the inclusive nearest-rank percentile band,
// or every position when there are too few runtimes or the band is empty.
std::vector<std::size_t> baseline_band(std::span<const double> runtimes,
                                       const BaselineOptions& options = {});

// Mean runtime over baseline_band(runtimes).
double band_mean(std::span<const double> runtimes, const BaselineOptions& options = {});

// Throws kUnknownTemplate when the table has no row for template_id.
TemplateBaseline compute_baseline(const EncodedTable& table,
                                  const FeatureSchema& schema,
                                  const std::string& template_id,
                                  const ForestModel& model,
                                  const BaselineOptions& options = {});

class BaselineStore {
 public:
  std::map<std::string, TemplateBaseline> baselines;
  // Per-feature population standard deviation over the training rows, with
  // 1.0 substituted for constant features.
  std::vector<double> feature_scales;

  const TemplateBaseline* find(const std::string& template_id) const;
  bool empty() const { return baselines.empty(); }
  double mean_gap() const;
};

BaselineStore compute_all_baselines(const EncodedTable& table,
                                    const FeatureSchema& schema,
                                    const ForestModel& model,
                                    const BaselineOptions& options = {});

std::vector<double> feature_scales(const Matrix& X);

// Baseline whose x^β is closest to x under per-feature scaling; ties go to the
// smallest template id. Throws kNoBaselines on an empty store.
const TemplateBaseline& nearest_baseline(const BaselineStore& store,
                                         std::span<const double> x);
const TemplateBaseline& nearest_baseline(
    const std::map<std::string, TemplateBaseline>& baselines,
    std::span<const double> x, std::span<const double> scales);

nlohmann::json to_json(const TemplateBaseline& baseline, const FeatureSchema& schema);
TemplateBaseline baseline_from_json(const nlohmann::json& doc,
                                    const FeatureSchema& schema);
nlohmann::json to_json(const BaselineStore& store, const FeatureSchema& schema);
BaselineStore baseline_store_from_json(const nlohmann::json& doc,
                                       const FeatureSchema& schema);

}  // namespace slowdown
