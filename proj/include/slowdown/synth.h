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


// Synthetic recurring-job telemetry with a known runtime response and
// injected slowdown causes. The response function is documented in
// docs/synthetic_generator.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "slowdown/reasoner.h"
#include "slowdown/telemetry.h"

namespace slowdown {

struct SynthConfig {
  int num_templates = 22;
  int jobs_per_template = 1000;
  double slow_fraction = 0.05;
  // Multiplier applied to the injected feature. 1 makes slow jobs
  // indistinguishable from normal ones.
  double injection_factor = 4.0;
  double noise_cv = 0.05;
  std::uint64_t seed = 7;
  // Superlinear response to data and time skew. Off leaves a purely
  // multiplicative-affine response.
  bool nonlinear_skew = true;
  // Log-scale standard deviation of per-job feature jitter around the
  // template's nominal levels.
  double feature_spread = 0.1;
  std::int64_t start_time = 1700000000;

  // Throws kInvalidConfig on out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);
// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& doc);

// job_id -> injected feature name; normal jobs are absent.
struct GroundTruth {
  std::map<std::string, std::string> injected;

  std::size_t size() const { return injected.size(); }
  bool operator==(const GroundTruth&) const = default;
};

nlohmann::json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& doc);
void save_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth load_ground_truth(const std::filesystem::path& path);

struct SynthOutput {
  Dataset dataset;
  GroundTruth truth;
};

// Features whose values drive the synthetic runtime; injections pick one of
// these uniformly.
const std::vector<std::string>& causal_features();

// Throws kInvalidConfig when the config is out of range or the schema lacks
// a feature the generator needs.
SynthOutput generate(const FeatureSchema& schema, const SynthConfig& config);

std::string synth_template_id(int template_index);
std::string synth_job_id(int template_index, int job_index);

// Fraction of injected jobs whose feature appears among the report's first
// k causes. Throws kMissingReport when an injected job has no report; an
// empty truth gives 1.0.
double recovery_rate(const std::vector<SlowdownReport>& reports,
                     const GroundTruth& truth, int k);

}  // namespace slowdown
