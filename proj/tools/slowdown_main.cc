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


// slowdown: train runtime models over job telemetry and explain slow jobs.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slowdown/baseline.h"
#include "slowdown/error.h"
#include "slowdown/evaluation.h"
#include "slowdown/forest.h"
#include "slowdown/pipeline.h"
#include "slowdown/reasoner.h"
#include "slowdown/registry.h"
#include "slowdown/service.h"
#include "slowdown/synth.h"
#include "slowdown/telemetry.h"

namespace {

using nlohmann::json;
using namespace slowdown;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

// Reads --config files shaped like {"registry": "...", "train": {"trees": 50}}.
// Nested objects address subcommands; arrays become repeated values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool,
                        std::string) const override {
    json doc = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& results = opt->results();
        doc[name] = results.size() == 1 ? json(results.front()) : json(results);
      } else if (default_also && !opt->get_default_str().empty()) {
        doc[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      json nested = json::parse(to_config(sub, default_also, false, ""));
      if (!nested.empty()) doc[sub->get_name()] = std::move(nested);
    }
    return doc.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    collect(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& doc, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        collect(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidConfig:
      return kExitUsage;
    default:
      return kExitData;
  }
}

struct Common {
  std::string registry = "slowdown-registry";
  std::string schema_path;
  bool json_output = false;
  std::string out;
  unsigned threads = 0;

  FeatureSchema schema() const {
    return schema_path.empty() ? default_schema() : load_schema(schema_path);
  }
};

struct HyperFlags {
  int trees = 100;
  int max_depth = 0;
  int min_leaf = 5;
  int features_per_split = 0;
  bool no_bootstrap = false;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--trees", trees, "Number of trees")->capture_default_str();
    app->add_option("--max-depth", max_depth, "Maximum tree depth (0 = unlimited)")
        ->capture_default_str();
    app->add_option("--min-leaf", min_leaf, "Minimum samples per leaf")->capture_default_str();
    app->add_option("--features-per-split", features_per_split,
                    "Candidate features per split (0 = max(1, K/3))")
        ->capture_default_str();
    app->add_flag("--no-bootstrap", no_bootstrap, "Grow every tree on the full data");
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
  }

  Hyperparams get() const {
    Hyperparams hp;
    hp.num_trees = trees;
    if (max_depth > 0) hp.max_depth = max_depth;
    hp.min_samples_leaf = min_leaf;
    if (features_per_split > 0) hp.features_per_split = features_per_split;
    hp.bootstrap = !no_bootstrap;
    hp.seed = seed;
    return hp;
  }
};

struct ConfidenceFlags {
  ConfidenceParams params;
  int top = kDefaultTopT;

  void add(CLI::App* app) {
    app->add_option("--p", params.p, "Per-tree interval percentile")->capture_default_str();
    app->add_option("--t1", params.t1, "High-confidence error threshold")->capture_default_str();
    app->add_option("--t2", params.t2, "Medium-confidence error threshold")->capture_default_str();
    app->add_option("--top", top, "Causes to report")->capture_default_str();
  }

  AnalyzeOptions get() const {
    params.validate();
    if (top < 1) throw Error(ErrorCode::kInvalidArgument, "--top must be >= 1");
    return {params, top};
  }
};

void emit(const Common& common, const json& doc, const std::string& human) {
  if (common.json_output) {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << human;
  }
  if (!common.out.empty()) {
    std::ofstream out(common.out);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + common.out);
    out << doc.dump(2) << "\n";
  }
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  ss << v;
  return ss.str();
}

// --- synth ---------------------------------------------------------------

struct SynthFlags {
  SynthConfig config;
  bool linear_skew = false;
  std::string truth;
};

int run_synth(const Common& common, SynthFlags& f) {
  f.config.nonlinear_skew = !f.linear_skew;
  if (common.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  const auto out = generate(common.schema(), f.config);
  save_dataset(common.out, out.dataset);
  const std::string truth_path = f.truth.empty() ? common.out + ".truth.json" : f.truth;
  save_ground_truth(truth_path, out.truth);
  json doc = {{"jobs", out.dataset.records.size()},
              {"templates", f.config.num_templates},
              {"injected", out.truth.size()},
              {"data", common.out},
              {"truth", truth_path},
              {"config", to_json(f.config)}};
  if (common.json_output) std::cout << doc.dump(2) << "\n";
  std::cerr << "wrote " << out.dataset.records.size() << " jobs to " << common.out << " ("
            << out.truth.size() << " injected, truth in " << truth_path << ")\n";
  return kExitOk;
}

// --- train ---------------------------------------------------------------

struct TrainFlags {
  std::string data;
  HyperFlags hp;
  double corr_threshold = 0.95;
};

int run_train(const Common& common, const TrainFlags& f) {
  const FeatureSchema schema = common.schema();
  const Dataset dataset = load_dataset(f.data, schema);
  std::cerr << "loaded " << dataset.records.size() << " jobs across "
            << dataset.template_ids().size() << " templates\n";
  const EncodedTable table = impute_and_encode(dataset);
  PipelineOptions options;
  options.correlation_threshold = f.corr_threshold;
  options.threads = common.threads;
  const TrainedPipeline pipeline = train_pipeline(table, schema, f.hp.get(), options);
  for (const auto& r : pipeline.removed_features) {
    std::cerr << "correlation filter: " << schema[r.removed].name << " excluded (r="
              << fmt(r.correlation) << " with " << schema[r.kept].name << ")\n";
  }

  std::vector<std::size_t> all(table.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto denominators = template_baselines(table, all);
  std::vector<double> predicted, base;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    predicted.push_back(predict(pipeline.model, table.X.row(i)));
    base.push_back(denominators.at(table.template_ids[i]));
  }
  const std::map<std::string, double> metrics = {
      {"training_mare", mare(predicted, table.y, base)},
      {"baseline_gap_mean", pipeline.baselines.mean_gap()},
      {"training_rows", static_cast<double>(table.rows())},
      {"templates", static_cast<double>(pipeline.baselines.baselines.size())}};
  const ModelRun run = save_run(common.registry, pipeline, metrics);

  std::ostringstream human;
  human << "run " << run.run_id << "\n"
        << "  training MARE      " << fmt(metrics.at("training_mare"), 4) << "\n"
        << "  mean baseline gap  " << fmt(metrics.at("baseline_gap_mean"), 4) << "\n"
        << "  trees              " << pipeline.model.trees.size() << "\n";
  emit(common, to_json(run), human.str());
  return kExitOk;
}

// --- baseline ------------------------------------------------------------

struct RunFlags {
  std::string run = "latest";
};

int run_baseline(const Common& common, const RunFlags& r, const std::string& only) {
  const LoadedRun loaded = load_model(common.registry, r.run);
  const auto& store = loaded.pipeline.baselines;
  json doc = to_json(store, loaded.pipeline.schema);
  std::ostringstream human;
  human << "template          support   baseline (s)   model (s)      gap\n";
  for (const auto& [tid, b] : store.baselines) {
    if (!only.empty() && tid != only) continue;
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s  %7zu  %13.1f  %10.1f  %7.4f\n", tid.c_str(),
                  b.support, b.baseline_runtime, b.predicted_baseline, b.baseline_gap);
    human << line;
  }
  if (!only.empty()) {
    const auto* b = store.find(only);
    if (b == nullptr) throw Error(ErrorCode::kUnknownTemplate, "unknown template " + only);
    doc = to_json(*b, loaded.pipeline.schema);
  }
  emit(common, doc, human.str());
  return kExitOk;
}

// --- analyze -------------------------------------------------------------

struct AnalyzeFlags {
  RunFlags run;
  std::string data;
  std::string job_id;
  bool all = false;
  std::string truth;
  ConfidenceFlags confidence;
};

int run_analyze(const Common& common, const AnalyzeFlags& f) {
  const LoadedRun loaded = load_model(common.registry, f.run.run);
  const auto options = f.confidence.get();
  const Dataset dataset = load_dataset(f.data, loaded.pipeline.schema);
  const auto& schema = loaded.pipeline.schema;

  if (!f.all) {
    if (f.job_id.empty()) throw Error(ErrorCode::kInvalidArgument, "--job-id or --all required");
    const JobRecord* job = dataset.find_job(f.job_id);
    if (job == nullptr) throw Error(ErrorCode::kUnknownSample, "unknown job " + f.job_id);
    const auto report = analyze(*job, loaded.pipeline, options);
    emit(common, to_json(report, schema), render_report(report));
    return kExitOk;
  }

  std::vector<SlowdownReport> reports;
  reports.reserve(dataset.records.size());
  for (const auto& job : dataset.records) reports.push_back(analyze(job, loaded.pipeline, options));
  std::map<std::string, std::size_t> levels;
  for (const auto& r : reports) ++levels[std::string(to_string(r.confidence))];

  json summary = {{"jobs", reports.size()}, {"confidence", levels}};
  std::ostringstream human;
  human << "analyzed " << reports.size() << " jobs: High " << levels["High"] << ", Medium "
        << levels["Medium"] << ", Low " << levels["Low"] << "\n";
  if (!f.truth.empty()) {
    const GroundTruth truth = load_ground_truth(f.truth);
    GroundTruth high_truth;
    std::vector<SlowdownReport> high;
    for (const auto& r : reports) {
      if (r.confidence != ConfidenceLevel::kHigh) continue;
      high.push_back(r);
      if (auto it = truth.injected.find(r.job_id); it != truth.injected.end()) {
        high_truth.injected.insert(*it);
      }
    }
    summary["recovery"] = {{"top1", recovery_rate(reports, truth, 1)},
                           {"top3", recovery_rate(reports, truth, 3)},
                           {"high_top3", recovery_rate(high, high_truth, 3)},
                           {"injected", truth.size()}};
    human << "recovery over " << truth.size() << " injected jobs: top-1 "
          << fmt(summary["recovery"]["top1"].get<double>()) << ", top-3 "
          << fmt(summary["recovery"]["top3"].get<double>()) << ", High-only top-3 "
          << fmt(summary["recovery"]["high_top3"].get<double>()) << "\n";
  }
  if (common.json_output) {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << human.str();
  }
  if (!common.out.empty()) {
    std::ofstream out(common.out);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + common.out);
    for (const auto& r : reports) out << to_json(r, schema).dump() << "\n";
  }
  return kExitOk;
}

// --- compare / scale / sample-size ---------------------------------------

struct CompareFlags {
  std::string data;
  HyperFlags hp;
  double test_fraction = 0.2;
  SynthConfig synth;
};

int run_compare(const Common& common, CompareFlags& f) {
  const FeatureSchema schema = common.schema();
  Dataset dataset = f.data.empty() ? generate(schema, f.synth).dataset
                                   : load_dataset(f.data, schema);
  ComparisonOptions options;
  options.test_fraction = f.test_fraction;
  options.seed = f.hp.seed;
  options.threads = common.threads;
  const auto result = compare_models(dataset, f.hp.get(), options);
  std::ostringstream human;
  human << "model  scope          MARE     train (s)\n";
  for (const auto& [model, scopes] : result.reports) {
    for (const auto& [scope, report] : scopes) {
      char line[128];
      std::snprintf(line, sizeof(line), "%-5s  %-12s  %7.4f  %9.2f\n", model.c_str(),
                    scope.c_str(), report.mare, result.training_seconds.at(model).at(scope));
      human << line;
    }
  }
  const json doc = {{"experiment", "compare"}, {"results", to_json(result)}};
  if (common.json_output) std::cout << doc.dump(2) << "\n";
  else std::cout << human.str();
  if (!common.out.empty()) append_jsonl(common.out, doc);
  return kExitOk;
}

struct ScaleFlags {
  ScalabilityConfig config;
  HyperFlags hp;
  std::string csv;
};

int run_scale(const Common& common, ScaleFlags& f) {
  f.config.hp = f.hp.get();
  f.config.split.seed = f.hp.seed;
  f.config.split.threads = common.threads;
  const auto points = run_scalability(common.schema(), f.config);
  json all = json::array();
  for (const auto& p : points) {
    json rec = to_json(p);
    rec["experiment"] = "scale";
    all.push_back(rec);
    if (!common.out.empty()) append_jsonl(common.out, rec);
  }
  if (!f.csv.empty()) {
    std::ofstream csv(f.csv);
    if (!csv) throw Error(ErrorCode::kIoError, "cannot write " + f.csv);
    write_scalability_csv(csv, points);
  }
  if (common.json_output) {
    std::cout << all.dump(2) << "\n";
  } else {
    write_scalability_csv(std::cout, points);
  }
  return kExitOk;
}

struct SampleFlags {
  SampleSizeConfig config;
  HyperFlags hp;
  std::string csv;
};

int run_sample_size_cmd(const Common& common, SampleFlags& f) {
  f.config.hp = f.hp.get();
  f.config.threads = common.threads;
  const auto points = run_sample_size(common.schema(), f.config);
  json all = json::array();
  for (const auto& p : points) {
    json rec = to_json(p);
    rec["experiment"] = "sample-size";
    all.push_back(rec);
    if (!common.out.empty()) append_jsonl(common.out, rec);
  }
  if (!f.csv.empty()) {
    std::ofstream csv(f.csv);
    if (!csv) throw Error(ErrorCode::kIoError, "cannot write " + f.csv);
    write_sample_size_csv(csv, points);
  }
  if (common.json_output) {
    std::cout << all.dump(2) << "\n";
  } else {
    write_sample_size_csv(std::cout, points);
  }
  return kExitOk;
}

// --- demo ----------------------------------------------------------------

struct DemoFlags {
  std::string data;
  std::string group = "American";
  std::string sample = "ford granada gl";
  bool group_feature = false;
  HyperFlags hp;
};

int run_demo(const Common& common, const DemoFlags& f) {
  const Dataset dataset = load_auto_mpg(f.data);
  DemoOptions options;
  options.hp = f.hp.get();
  options.group_as_feature = f.group_feature;
  options.threads = common.threads;
  const DemoTable table = tabular_demo(dataset, f.group, f.sample, options);
  emit(common, to_json(table), render_demo(table));
  return kExitOk;
}

// --- serve / runs --------------------------------------------------------

struct ServeFlags {
  RunFlags run;
  std::string bind;
  std::string telemetry;
  ConfidenceFlags confidence;
};

int run_serve(const Common& common, const ServeFlags& f) {
  ServiceConfig config;
  config.registry_root = common.registry;
  config.run_id = f.run.run;
  if (!f.bind.empty()) {
    config.bind_address = f.bind;
  } else if (const char* env = std::getenv(kBindEnvVar); env != nullptr && *env) {
    config.bind_address = env;
  }
  parse_bind_address(config.bind_address);
  if (!f.telemetry.empty()) config.telemetry_lookup = f.telemetry;
  config.analyze = f.confidence.get();
  return serve(config);
}

int run_runs(const Common& common) {
  const auto runs = list_runs(common.registry);
  json doc = json::array();
  std::ostringstream human;
  if (runs.empty()) human << "no model runs found in " << common.registry << "\n";
  for (const auto& r : runs) {
    doc.push_back(to_json(r));
    human << r.run_id << "  created_at=" << r.created_at << "  trees=" << r.hyperparams.num_trees;
    for (const auto& [k, v] : r.metrics) human << "  " << k << "=" << fmt(v, 4);
    human << "\n";
  }
  emit(common, doc, human.str());
  return kExitOk;
}


}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train runtime models over recurring-job telemetry and explain slow jobs."};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");
  app.require_subcommand(1);

  Common common;
  if (const char* env = std::getenv("SLOWDOWN_REGISTRY"); env != nullptr && *env) {
    common.registry = env;
  }
  app.add_option("--registry", common.registry, "Model registry directory")
      ->capture_default_str();
  app.add_option("--schema", common.schema_path, "Feature schema JSON (default schema if unset)");
  app.add_option("--threads", common.threads, "Worker threads (0 = all cores)");

  auto add_output = [&](CLI::App* sub) {
    sub->add_flag("--json", common.json_output, "Print JSON to stdout");
    sub->add_option("--out", common.out, "Write machine-readable results to this file");
  };

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic telemetry with injected causes");
  synth_cmd->add_option("--templates", synth.config.num_templates, "Job templates")
      ->capture_default_str();
  synth_cmd->add_option("--jobs", synth.config.jobs_per_template, "Jobs per template")
      ->capture_default_str();
  synth_cmd->add_option("--slow-fraction", synth.config.slow_fraction, "Share of injected jobs")
      ->capture_default_str();
  synth_cmd->add_option("--injection", synth.config.injection_factor,
                        "Multiplier on the injected feature")
      ->capture_default_str();
  synth_cmd->add_option("--noise-cv", synth.config.noise_cv, "Runtime noise CV")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.config.seed, "Random seed")->capture_default_str();
  synth_cmd->add_flag("--linear-skew", synth.linear_skew, "Disable the superlinear skew response");
  synth_cmd->add_option("--truth", synth.truth, "Ground-truth JSON path (default <out>.truth.json)");
  add_output(synth_cmd);

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "Train a pipeline and register it");
  train_cmd->add_option("--data", train.data, "Telemetry CSV")->required();
  train.hp.add(train_cmd);
  train_cmd->add_option("--corr-threshold", train.corr_threshold,
                        "Drop features correlated above this with an earlier one")
      ->capture_default_str();
  add_output(train_cmd);

  RunFlags baseline_run;
  std::string baseline_template;
  auto* baseline_cmd = app.add_subcommand("baseline", "Show template baselines of a run");
  baseline_cmd->add_option("--run", baseline_run.run, "Run id or 'latest'")->capture_default_str();
  baseline_cmd->add_option("--template", baseline_template, "Show a single template");
  add_output(baseline_cmd);

  AnalyzeFlags analyze_flags;
  auto* analyze_cmd = app.add_subcommand("analyze", "Explain why a job was slow");
  analyze_cmd->add_option("--run", analyze_flags.run.run, "Run id or 'latest'")
      ->capture_default_str();
  analyze_cmd->add_option("--data", analyze_flags.data, "Telemetry CSV holding the job")
      ->required();
  analyze_cmd->add_option("--job-id", analyze_flags.job_id, "Job to explain");
  analyze_cmd->add_flag("--all", analyze_flags.all, "Explain every job; --out gets JSON lines");
  analyze_cmd->add_option("--truth", analyze_flags.truth,
                          "Ground truth JSON; with --all, report recovery rates");
  analyze_flags.confidence.add(analyze_cmd);
  add_output(analyze_cmd);

  CompareFlags compare;
  auto* compare_cmd = app.add_subcommand("compare", "LR vs RF, global vs per-template MARE");
  compare_cmd->add_option("--data", compare.data, "Telemetry CSV (synthetic data if unset)");
  compare_cmd->add_option("--test-fraction", compare.test_fraction, "Held-out share per template")
      ->capture_default_str();
  compare_cmd->add_option("--templates", compare.synth.num_templates, "Synthetic templates")
      ->capture_default_str();
  compare_cmd->add_option("--jobs", compare.synth.jobs_per_template, "Synthetic jobs per template")
      ->capture_default_str();
  compare.hp.add(compare_cmd);
  add_output(compare_cmd);

  ScaleFlags scale;
  auto* scale_cmd = app.add_subcommand("scale", "Global vs per-template scalability sweep");
  scale_cmd->add_option("--counts", scale.config.template_counts, "Template counts")
      ->capture_default_str();
  scale_cmd->add_option("--jobs", scale.config.jobs_per_template, "Jobs per template")
      ->capture_default_str();
  scale_cmd->add_option("--repeats", scale.config.repeats, "Repeats per count")
      ->capture_default_str();
  scale_cmd->add_option("--probes", scale.config.probes, "Single-inference probes")
      ->capture_default_str();
  scale_cmd->add_option("--csv", scale.csv, "Plot-data CSV");
  scale.hp.add(scale_cmd);
  add_output(scale_cmd);

  SampleFlags sample;
  auto* sample_cmd = app.add_subcommand("sample-size", "MARE against jobs per template");
  sample_cmd->add_option("--n-values", sample.config.n_values, "Jobs per template to train on")
      ->capture_default_str();
  sample_cmd->add_option("--templates", sample.config.num_templates, "Templates")
      ->capture_default_str();
  sample_cmd->add_option("--repeats", sample.config.repeats, "Repeats per n")
      ->capture_default_str();
  sample_cmd->add_option("--test-per-template", sample.config.test_per_template,
                         "Held-out jobs per template")
      ->capture_default_str();
  sample_cmd->add_option("--csv", sample.csv, "Plot-data CSV");
  sample.hp.add(sample_cmd);
  add_output(sample_cmd);

  DemoFlags demo;
  auto* demo_cmd = app.add_subcommand("demo", "Attribution table on an auto-mpg style file");
  demo_cmd->add_option("--data", demo.data, "auto-mpg data (UCI whitespace or CSV)")->required();
  demo_cmd->add_option("--group", demo.group, "Group used as the baseline")->capture_default_str();
  demo_cmd->add_option("--sample", demo.sample, "Sample to explain")->capture_default_str();
  demo_cmd->add_flag("--group-feature", demo.group_feature, "Add the group as a feature");
  demo.hp.add(demo_cmd);
  add_output(demo_cmd);

  ServeFlags serve_flags;
  auto* serve_cmd = app.add_subcommand("serve", "Serve slowdown reports over HTTP");
  serve_cmd->add_option("--run", serve_flags.run.run, "Run id or 'latest'")->capture_default_str();
  serve_cmd->add_option("--bind", serve_flags.bind,
                        std::string("host:port (default ") + kDefaultBind + ", env " +
                            kBindEnvVar + ")");
  serve_cmd->add_option("--telemetry", serve_flags.telemetry, "Telemetry CSV for job_id lookups");
  serve_flags.confidence.add(serve_cmd);

  auto* runs_cmd = app.add_subcommand("runs", "List registered runs, newest first");
  add_output(runs_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(common, synth);
    if (train_cmd->parsed()) return run_train(common, train);
    if (baseline_cmd->parsed()) return run_baseline(common, baseline_run, baseline_template);
    if (analyze_cmd->parsed()) return run_analyze(common, analyze_flags);
    if (compare_cmd->parsed()) {
      compare.synth.seed = compare.hp.seed;
      return run_compare(common, compare);
    }
    if (scale_cmd->parsed()) {
      scale.config.synth.seed = scale.hp.seed;
      return run_scale(common, scale);
    }
    if (sample_cmd->parsed()) {
      sample.config.synth.seed = sample.hp.seed;
      return run_sample_size_cmd(common, sample);
    }
    if (demo_cmd->parsed()) return run_demo(common, demo);
    if (serve_cmd->parsed()) return run_serve(common, serve_flags);
    if (runs_cmd->parsed()) return run_runs(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
