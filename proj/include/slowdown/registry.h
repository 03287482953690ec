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


// Content-addressed filesystem registry of trained pipelines.
//
//   root/index.jsonl               one manifest per line, append-only
//   root/index.lock                writer lock
//   root/runs/<run_id>/model.json  forest + schema + encoding
//   root/runs/<run_id>/baselines.json
//   root/runs/<run_id>/manifest.json

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "slowdown/forest.h"
#include "slowdown/pipeline.h"

namespace slowdown {

struct ModelRun {
  std::string run_id;
  std::int64_t created_at = 0;  // microseconds since the epoch
  Hyperparams hyperparams;
  std::map<std::string, double> metrics;
  std::string artifact_path;  // relative to the registry root
  std::string schema_version;
  std::string schema_fingerprint;
  std::map<std::string, std::string> file_hashes;  // file name -> sha256

  bool operator==(const ModelRun&) const = default;
};

nlohmann::json to_json(const ModelRun& run);
ModelRun model_run_from_json(const nlohmann::json& doc);

struct LoadedRun {
  TrainedPipeline pipeline;
  ModelRun run;
};

// Serialized artifacts of a pipeline, exactly as written to disk.
std::string model_artifact(const TrainedPipeline& pipeline);
std::string baselines_artifact(const TrainedPipeline& pipeline);
TrainedPipeline pipeline_from_artifacts(const std::string& model_json,
                                        const std::string& baselines_json);

// Writes the run unless byte-identical artifacts are already registered, in
// which case the existing run is returned. Throws kStorageError.
ModelRun save_run(const std::filesystem::path& root, const TrainedPipeline& pipeline,
                  const std::map<std::string, double>& metrics);

// run_id may be "latest". Throws kUnknownRun and kCorruptArtifact.
LoadedRun load_model(const std::filesystem::path& root, const std::string& run_id);

// Newest first; an empty or missing root gives an empty list.
std::vector<ModelRun> list_runs(const std::filesystem::path& root);

}  // namespace slowdown
