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


// Slowdown reports: delta contributions against the template baseline,
// ranked causes and a confidence grade.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "slowdown/baseline.h"
#include "slowdown/forest.h"
#include "slowdown/interpreter.h"
#include "slowdown/pipeline.h"
#include "slowdown/telemetry.h"

namespace slowdown {

struct ConfidenceParams {
  double p = 10.0;   // per-tree interval is [p, 100 - p] percentiles
  double t1 = 0.2;   // High below this error rate
  double t2 = 0.5;   // Medium below this error rate

  // Throws kInvalidArgument unless 0 < p < 50, 0 < t1 < 1 and t2 > t1.
  void validate() const;
};

enum class ConfidenceLevel { kHigh, kMedium, kLow };

std::string_view to_string(ConfidenceLevel level);
ConfidenceLevel confidence_level_from_string(std::string_view s);

struct ConfidenceResult {
  ConfidenceLevel level = ConfidenceLevel::kLow;
  double error_rate = 0.0;
  double prediction = 0.0;
  double interval_low = 0.0;
  double interval_high = 0.0;
};

struct RankedCause {
  std::string feature;
  double delta_fc = 0.0;  // seconds
  double share = 0.0;     // of the reported positive deltas
  std::vector<std::string> reasons;
};

struct SlowdownReport {
  std::string job_id;
  std::string template_id;
  // Template whose baseline was used; differs from template_id on fallback.
  std::string baseline_template_id;
  bool fallback = false;
  double actual_runtime = 0.0;
  double predicted_runtime = 0.0;
  double baseline_runtime = 0.0;
  double predicted_baseline = 0.0;
  double baseline_gap = 0.0;
  ConfidenceLevel confidence = ConfidenceLevel::kLow;
  double error_rate = 0.0;
  std::vector<RankedCause> causes;
  std::vector<double> raw_deltas;  // all K deltas, signs kept
};

// Element-wise job minus baseline contributions. Throws kModelMismatch when
// the widths differ or the biases differ by more than 1e-9 relative.
std::vector<double> delta_contributions(const ContributionBreakdown& job,
                                        const ContributionBreakdown& base);

// Strictly positive deltas, largest first, ties by feature name; at most top_t.
std::vector<RankedCause> rank_causes(std::span<const double> deltas,
                                     const FeatureSchema& schema, int top_t);

// Throws kNonPositiveRuntime when actual_runtime <= 0.
ConfidenceResult confidence(const ForestModel& model, std::span<const double> x,
                            double actual_runtime, const ConfidenceParams& params);

inline constexpr int kDefaultTopT = 5;

struct AnalyzeOptions {
  ConfidenceParams params;
  int top_t = kDefaultTopT;
};

// Encodes the job under the pipeline's encoding and explains it against its
// template baseline, or the nearest one when the template was never seen.
// Throws kSchemaMismatch when the model was trained under another schema or
// the record does not fit the schema; kNoBaselines when the store is empty.
SlowdownReport analyze(const JobRecord& job, const TrainedPipeline& pipeline,
                       const AnalyzeOptions& options = {});

// Same, for an already encoded feature vector.
SlowdownReport analyze_encoded(const std::string& job_id, const std::string& template_id,
                               std::span<const double> x, double actual_runtime,
                               const TrainedPipeline& pipeline,
                               const AnalyzeOptions& options = {});

nlohmann::json to_json(const SlowdownReport& report, const FeatureSchema& schema);
SlowdownReport report_from_json(const nlohmann::json& doc, const FeatureSchema& schema);

// Aligned plain-text rendering for terminals.
std::string render_report(const SlowdownReport& report);

}  // namespace slowdown
