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


// Error metric and experiment harnesses: model comparison, scalability,
// sample size, the tabular attribution demo and hyperparameter search.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slowdown/forest.h"
#include "slowdown/pipeline.h"
#include "slowdown/reasoner.h"
#include "slowdown/synth.h"
#include "slowdown/telemetry.h"

namespace slowdown {

// (1/n) sum |actual - predicted| / baseline. The denominator is the template
// baseline runtime, not the actual runtime. Throws kLengthMismatch and
// kNonPositiveBaseline.
double mare(std::span<const double> predicted, std::span<const double> actual,
            std::span<const double> baseline);

struct EvalReport {
  double mare = 0.0;
  std::size_t n = 0;
  std::map<std::string, double> per_template_mare;
};

EvalReport evaluate(std::span<const double> predicted, std::span<const double> actual,
                    std::span<const double> baseline,
                    std::span<const std::string> template_ids);

nlohmann::json to_json(const EvalReport& report);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per template, round(test_fraction * m) jobs go to the test side, clamped so
// that a template with at least two jobs keeps one on each side. Templates
// with a single job stay in training. Index lists are ascending.
Split stratified_split(std::span<const std::string> template_ids, double test_fraction,
                       std::uint64_t seed);

EncodedTable select_rows(const EncodedTable& table, std::span<const std::size_t> rows);

// Band-mean runtime per template over the given rows.
std::map<std::string, double> template_baselines(const EncodedTable& table,
                                                 std::span<const std::size_t> rows);

struct ComparisonOptions {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  double correlation_threshold = 0.95;
  unsigned threads = 0;
};

struct ComparisonResult {
  // mares[model][scope], model in {"LR", "RF"}, scope in {"global", "per_template"}.
  std::map<std::string, std::map<std::string, EvalReport>> reports;
  std::map<std::string, std::map<std::string, double>> training_seconds;

  double mare(const std::string& model, const std::string& scope) const;
};

// Throws kInsufficientData(template) when a template has fewer than two jobs.
ComparisonResult compare_models(const Dataset& dataset, const Hyperparams& hp,
                                const ComparisonOptions& options = {});
ComparisonResult compare_models(const EncodedTable& table, const FeatureSchema& schema,
                                const Hyperparams& hp,
                                const ComparisonOptions& options = {});

nlohmann::json to_json(const ComparisonResult& result);

struct ScalabilityConfig {
  std::vector<int> template_counts = {10, 50, 100};
  int jobs_per_template = 200;
  Hyperparams hp;
  int repeats = 1;
  int probes = 100;
  SynthConfig synth;  // num_templates and jobs_per_template are overridden
  ComparisonOptions split;
};

struct ScalabilityPoint {
  std::string scope;  // "global" or "per_template"
  int num_templates = 0;
  double training_time_seconds = 0.0;
  std::size_t model_size_bytes = 0;
  double mare = 0.0;
  double single_inference_seconds = 0.0;
  int repeats = 0;
};

std::vector<ScalabilityPoint> run_scalability(const FeatureSchema& schema,
                                              const ScalabilityConfig& config);

struct SampleSizeConfig {
  std::vector<int> n_values = {1, 10, 100, 1000, 10000};
  int num_templates = 22;
  Hyperparams hp;
  int repeats = 3;
  // Held-out jobs per template, drawn from the same generator.
  int test_per_template = 100;
  SynthConfig synth;
  unsigned threads = 0;
};

struct SampleSizePoint {
  int n = 0;
  double mare = 0.0;       // mean over repeats
  double mare_std = 0.0;   // population std over repeats
  double training_time_seconds = 0.0;
  std::vector<double> repeat_mares;
};

std::vector<SampleSizePoint> run_sample_size(const FeatureSchema& schema,
                                             const SampleSizeConfig& config);

nlohmann::json to_json(const ScalabilityPoint& point);
nlohmann::json to_json(const SampleSizePoint& point);

// One JSON object per line, appended.
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record);
void write_scalability_csv(std::ostream& out, const std::vector<ScalabilityPoint>& points);
void write_sample_size_csv(std::ostream& out, const std::vector<SampleSizePoint>& points);

// Attribution of one sample against its group's baseline on a generic table.
struct DemoRow {
  std::string feature;
  double sample = 0.0;
  double mean = 0.0;      // group mean over every group member
  double baseline = 0.0;  // x^β of the group
  double delta_fc = 0.0;  // signed
};

struct DemoTable {
  std::string group;
  std::string sample_id;
  double sample_target = 0.0;
  double sample_prediction = 0.0;
  double baseline_target = 0.0;
  double baseline_prediction = 0.0;
  std::vector<DemoRow> rows;  // delta_fc descending
};

struct DemoOptions {
  Hyperparams hp;
  // Adds the group label as an extra categorical feature.
  bool group_as_feature = false;
  unsigned threads = 0;
};

// Groups play the template role and the target plays runtime. Throws
// kUnknownGroup and kUnknownSample.
DemoTable tabular_demo(const Dataset& dataset, const std::string& group,
                       const std::string& sample_id, const DemoOptions& options = {});

std::string render_demo(const DemoTable& table);
nlohmann::json to_json(const DemoTable& table);

// Cylinders, Displacement, Horsepower, Weight, Acceleration, Year.
FeatureSchema auto_mpg_schema();

// Reads the whitespace-separated UCI layout (mpg cylinders displacement
// horsepower weight acceleration year origin "name", '?' for missing) or a
// CSV with a header naming those columns. Origin 1/2/3 become the groups
// American, European and Japanese; sample ids are the car names with a
// "#n" suffix on repeats.
Dataset load_auto_mpg(const std::filesystem::path& path);

struct GridSpace {
  std::vector<int> num_trees = {50, 100};
  std::vector<std::optional<int>> max_depth = {std::nullopt, 12};
  std::vector<int> min_samples_leaf = {1, 5, 10};
  std::vector<std::optional<int>> features_per_split = {std::nullopt};
};

struct GridSearchResult {
  Hyperparams best;
  double best_score = 0.0;
  std::vector<std::pair<Hyperparams, double>> scores;  // cross-validated MARE
};

// Random search over `samples` points of the grid, scored by k-fold MARE.
GridSearchResult grid_search(const EncodedTable& table, const GridSpace& space,
                             int samples, int folds, std::uint64_t seed,
                             unsigned threads = 0);

struct ConfidenceTuning {
  ConfidenceParams best;
  double high_precision = 0.0;  // top-3 agreement among High reports
  std::size_t high_count = 0;
};

// Sweeps p, t1 and t2 over injected jobs. Prefers the setting with the most
// High reports among those whose High top-3 agreement reaches target; falls
// back to the most precise setting.
ConfidenceTuning tune_confidence(const EncodedTable& table, const GroundTruth& truth,
                                 const TrainedPipeline& pipeline, double target = 0.95);

}  // namespace slowdown
