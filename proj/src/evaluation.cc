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


#include "slowdown/evaluation.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "slowdown/baseline.h"
#include "slowdown/error.h"
#include "slowdown/interpreter.h"
#include "slowdown/stats.h"
#include "text_util.h"

namespace slowdown {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream_a,
                         std::uint64_t stream_b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_a),
                    static_cast<std::uint32_t>(stream_b)};
  return std::mt19937_64(seq);
}

TrainOptions filtered_options(const Matrix& X, const FeatureSchema& schema,
                              double threshold, unsigned threads) {
  TrainOptions options;
  options.allowed_features = filter_correlated(X, schema, threshold).kept;
  options.threads = threads;
  options.schema_fingerprint = schema.fingerprint();
  return options;
}

}  // namespace

double mare(std::span<const double> predicted, std::span<const double> actual,
            std::span<const double> baseline) {
  if (predicted.size() != actual.size() || actual.size() != baseline.size()) {
    throw Error(ErrorCode::kLengthMismatch, "mare inputs differ in length");
  }
  if (actual.empty()) throw Error(ErrorCode::kLengthMismatch, "mare of no samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!(baseline[i] > 0.0)) {
      throw Error(ErrorCode::kNonPositiveBaseline,
                  "baseline runtime at position " + std::to_string(i) + " is not positive");
    }
    sum += std::abs(actual[i] - predicted[i]) / baseline[i];
  }
  return sum / static_cast<double>(actual.size());
}

EvalReport evaluate(std::span<const double> predicted, std::span<const double> actual,
                    std::span<const double> baseline,
                    std::span<const std::string> template_ids) {
  EvalReport report;
  report.mare = mare(predicted, actual, baseline);
  report.n = actual.size();
  if (template_ids.size() != actual.size()) {
    throw Error(ErrorCode::kLengthMismatch, "template ids differ in length");
  }
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    auto& [sum, n] = acc[template_ids[i]];
    sum += std::abs(actual[i] - predicted[i]) / baseline[i];
    ++n;
  }
  for (const auto& [tid, a] : acc) {
    report.per_template_mare[tid] = a.first / static_cast<double>(a.second);
  }
  return report;
}

json to_json(const EvalReport& report) {
  return {{"mare", report.mare},
          {"n", report.n},
          {"per_template_mare", report.per_template_mare}};
}

Split stratified_split(std::span<const std::string> template_ids, double test_fraction,
                       std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "test fraction must lie in [0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < template_ids.size(); ++i) groups[template_ids[i]].push_back(i);

  auto rng = make_rng(seed, 0x5b1d);
  Split split;
  for (auto& [tid, rows] : groups) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t m = rows.size();
    std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(m)));
    if (m >= 2) n_test = std::clamp<std::size_t>(n_test, 1, m - 1);
    else n_test = 0;
    split.test.insert(split.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

EncodedTable select_rows(const EncodedTable& table, std::span<const std::size_t> rows) {
  EncodedTable out;
  out.X = table.X.select_rows(rows);
  out.encoding = table.encoding;
  out.y.reserve(rows.size());
  for (auto i : rows) {
    out.y.push_back(table.y[i]);
    out.template_ids.push_back(table.template_ids[i]);
    out.job_ids.push_back(table.job_ids[i]);
  }
  return out;
}

std::map<std::string, double> template_baselines(const EncodedTable& table,
                                                 std::span<const std::size_t> rows) {
  std::map<std::string, std::vector<double>> runtimes;
  for (auto i : rows) runtimes[table.template_ids[i]].push_back(table.y[i]);
  std::map<std::string, double> out;
  for (const auto& [tid, r] : runtimes) out[tid] = band_mean(r);
  return out;
}

double ComparisonResult::mare(const std::string& model, const std::string& scope) const {
  return reports.at(model).at(scope).mare;
}

ComparisonResult compare_models(const Dataset& dataset, const Hyperparams& hp,
                                const ComparisonOptions& options) {
  return compare_models(impute_and_encode(dataset), dataset.schema, hp, options);
}

ComparisonResult compare_models(const EncodedTable& table, const FeatureSchema& schema,
                                const Hyperparams& hp, const ComparisonOptions& options) {
  const auto by_template = table.rows_by_template();
  for (const auto& [tid, rows] : by_template) {
    if (rows.size() < 2) {
      throw Error(ErrorCode::kInsufficientData,
                  "template " + tid + " needs at least two jobs");
    }
  }
  const Split split = stratified_split(table.template_ids, options.test_fraction, options.seed);
  const auto baselines = template_baselines(table, split.train);

  std::vector<double> actual, denominators;
  std::vector<std::string> test_templates;
  for (auto i : split.test) {
    actual.push_back(table.y[i]);
    denominators.push_back(baselines.at(table.template_ids[i]));
    test_templates.push_back(table.template_ids[i]);
  }
  std::unordered_map<std::size_t, std::size_t> test_pos;
  for (std::size_t p = 0; p < split.test.size(); ++p) test_pos[split.test[p]] = p;

  ComparisonResult result;
  auto record = [&](const std::string& model, const std::string& scope,
                    const std::vector<double>& predicted, double seconds) {
    result.reports[model][scope] = evaluate(predicted, actual, denominators, test_templates);
    result.training_seconds[model][scope] = seconds;
  };

  // One model over every template.
  {
    const EncodedTable train = select_rows(table, split.train);
    auto start = Clock::now();
    const auto opts = filtered_options(train.X, schema, options.correlation_threshold,
                                       options.threads);
    const ForestModel rf = train_forest(train.X, train.y, hp, opts);
    const double rf_seconds = seconds_since(start);
    start = Clock::now();
    const Matrix reduced = train.X.select_columns(opts.allowed_features);
    const LinearModel lr = train_linear(reduced, train.y);
    const double lr_seconds = seconds_since(start);

    std::vector<double> rf_pred, lr_pred;
    std::vector<double> projected(opts.allowed_features.size());
    for (auto i : split.test) {
      const auto x = table.X.row(i);
      rf_pred.push_back(predict(rf, x));
      for (std::size_t c = 0; c < projected.size(); ++c) projected[c] = x[opts.allowed_features[c]];
      lr_pred.push_back(lr.predict(projected));
    }
    record("RF", "global", rf_pred, rf_seconds);
    record("LR", "global", lr_pred, lr_seconds);
  }

  // One model per template, trained on that template's jobs only.
  {
    std::vector<double> rf_pred(split.test.size()), lr_pred(split.test.size());
    double rf_seconds = 0.0, lr_seconds = 0.0;
    std::map<std::string, std::vector<std::size_t>> train_rows, test_rows;
    for (auto i : split.train) train_rows[table.template_ids[i]].push_back(i);
    for (auto i : split.test) test_rows[table.template_ids[i]].push_back(i);
    for (const auto& [tid, rows] : train_rows) {
      const auto it = test_rows.find(tid);
      if (it == test_rows.end()) continue;
      const EncodedTable train = select_rows(table, rows);
      auto start = Clock::now();
      const auto opts = filtered_options(train.X, schema, options.correlation_threshold,
                                         options.threads);
      const ForestModel rf = train_forest(train.X, train.y, hp, opts);
      rf_seconds += seconds_since(start);
      start = Clock::now();
      const Matrix reduced = train.X.select_columns(opts.allowed_features);
      const LinearModel lr = train_linear(reduced, train.y);
      lr_seconds += seconds_since(start);
      std::vector<double> projected(opts.allowed_features.size());
      for (auto i : it->second) {
        const auto x = table.X.row(i);
        for (std::size_t c = 0; c < projected.size(); ++c) projected[c] = x[opts.allowed_features[c]];
        rf_pred[test_pos.at(i)] = predict(rf, x);
        lr_pred[test_pos.at(i)] = lr.predict(projected);
      }
    }
    record("RF", "per_template", rf_pred, rf_seconds);
    record("LR", "per_template", lr_pred, lr_seconds);
  }
  return result;
}

json to_json(const ComparisonResult& result) {
  json doc = json::object();
  for (const auto& [model, scopes] : result.reports) {
    for (const auto& [scope, report] : scopes) {
      json entry = to_json(report);
      entry["training_seconds"] = result.training_seconds.at(model).at(scope);
      doc[model][scope] = std::move(entry);
    }
  }
  return doc;
}

namespace {

double median_seconds(std::vector<double> samples) { return median(std::move(samples)); }

struct ScopeMeasurement {
  double tt = 0.0;
  std::size_t ms = 0;
  double mare = 0.0;
  double sit = 0.0;
};

}  // namespace

std::vector<ScalabilityPoint> run_scalability(const FeatureSchema& schema,
                                              const ScalabilityConfig& config) {
  for (std::size_t i = 1; i < config.template_counts.size(); ++i) {
    if (config.template_counts[i] <= config.template_counts[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument, "template counts must increase");
    }
  }
  if (config.repeats < 1 || config.probes < 1) {
    throw Error(ErrorCode::kInvalidArgument, "repeats and probes must be >= 1");
  }
  PipelineOptions popts;
  popts.correlation_threshold = config.split.correlation_threshold;
  popts.threads = config.split.threads;

  std::vector<ScalabilityPoint> points;
  for (int count : config.template_counts) {
    ScopeMeasurement global_sum, local_sum;
    for (int r = 0; r < config.repeats; ++r) {
      SynthConfig sc = config.synth;
      sc.num_templates = count;
      sc.jobs_per_template = config.jobs_per_template;
      sc.seed = config.synth.seed + static_cast<std::uint64_t>(r);
      const SynthOutput synth = generate(schema, sc);
      const EncodedTable table = impute_and_encode(synth.dataset);
      const Split split = stratified_split(table.template_ids, config.split.test_fraction,
                                           config.split.seed + static_cast<std::uint64_t>(r));
      const auto denominators = template_baselines(table, split.train);

      std::vector<double> actual, base;
      std::vector<std::string> tids;
      for (auto i : split.test) {
        actual.push_back(table.y[i]);
        base.push_back(denominators.at(table.template_ids[i]));
      }
      std::vector<std::size_t> probes;
      for (int p = 0; p < config.probes; ++p) {
        probes.push_back(split.test[static_cast<std::size_t>(p) % split.test.size()]);
      }

      // Global scope.
      {
        const EncodedTable train = select_rows(table, split.train);
        const auto start = Clock::now();
        const TrainedPipeline pipeline = train_pipeline(train, schema, config.hp, popts);
        global_sum.tt += seconds_since(start);
        global_sum.ms += to_json(pipeline.model).dump().size();
        std::vector<double> predicted;
        for (auto i : split.test) predicted.push_back(predict(pipeline.model, table.X.row(i)));
        global_sum.mare += mare(predicted, actual, base);
        std::vector<double> sit;
        for (auto i : probes) {
          const auto t0 = Clock::now();
          const auto report = analyze(synth.dataset.records[i], pipeline);
          sit.push_back(seconds_since(t0));
          (void)report;
        }
        global_sum.sit += median_seconds(std::move(sit));
      }

      // Per-template scope.
      {
        std::map<std::string, std::vector<std::size_t>> train_rows;
        for (auto i : split.train) train_rows[table.template_ids[i]].push_back(i);
        std::map<std::string, TrainedPipeline> pipelines;
        for (const auto& [tid, rows] : train_rows) {
          const EncodedTable train = select_rows(table, rows);
          const auto start = Clock::now();
          auto pipeline = train_pipeline(train, schema, config.hp, popts);
          local_sum.tt += seconds_since(start);
          local_sum.ms += to_json(pipeline.model).dump().size();
          pipelines.emplace(tid, std::move(pipeline));
        }
        std::vector<double> predicted;
        for (auto i : split.test) {
          predicted.push_back(
              predict(pipelines.at(table.template_ids[i]).model, table.X.row(i)));
        }
        local_sum.mare += mare(predicted, actual, base);
        std::vector<double> sit;
        for (auto i : probes) {
          const auto& pipeline = pipelines.at(table.template_ids[i]);
          const auto t0 = Clock::now();
          const auto report = analyze(synth.dataset.records[i], pipeline);
          sit.push_back(seconds_since(t0));
          (void)report;
        }
        local_sum.sit += median_seconds(std::move(sit));
      }
    }
    const double reps = static_cast<double>(config.repeats);
    for (const auto& [scope, m] : {std::pair{std::string("global"), global_sum},
                                   std::pair{std::string("per_template"), local_sum}}) {
      ScalabilityPoint p;
      p.scope = scope;
      p.num_templates = count;
      p.training_time_seconds = m.tt / reps;
      p.model_size_bytes = static_cast<std::size_t>(std::llround(static_cast<double>(m.ms) / reps));
      p.mare = m.mare / reps;
      p.single_inference_seconds = m.sit / reps;
      p.repeats = config.repeats;
      points.push_back(p);
    }
  }
  return points;
}

std::vector<SampleSizePoint> run_sample_size(const FeatureSchema& schema,
                                             const SampleSizeConfig& config) {
  if (config.n_values.empty() || config.repeats < 1 || config.test_per_template < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sample-size sweep needs n values and repeats");
  }
  const int max_n = *std::max_element(config.n_values.begin(), config.n_values.end());
  if (max_n < 1) throw Error(ErrorCode::kInvalidArgument, "n values must be >= 1");

  SynthConfig sc = config.synth;
  sc.num_templates = config.num_templates;
  sc.jobs_per_template = max_n + config.test_per_template;
  const SynthOutput synth = generate(schema, sc);
  const EncodedTable table = impute_and_encode(synth.dataset);
  const auto by_template = table.rows_by_template();

  std::vector<std::size_t> all(table.rows());
  std::iota(all.begin(), all.end(), 0);
  const auto denominators = template_baselines(table, all);

  // The last test_per_template jobs of every template are held out.
  std::vector<std::size_t> test;
  std::map<std::string, std::vector<std::size_t>> pool;
  for (const auto& [tid, rows] : by_template) {
    const std::size_t cut = rows.size() - static_cast<std::size_t>(config.test_per_template);
    pool[tid].assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(cut));
    test.insert(test.end(), rows.begin() + static_cast<std::ptrdiff_t>(cut), rows.end());
  }
  std::vector<double> actual, base;
  for (auto i : test) {
    actual.push_back(table.y[i]);
    base.push_back(denominators.at(table.template_ids[i]));
  }

  std::vector<SampleSizePoint> points;
  for (int n : config.n_values) {
    SampleSizePoint point;
    point.n = n;
    for (int r = 0; r < config.repeats; ++r) {
      auto rng = make_rng(config.synth.seed, static_cast<std::uint64_t>(n),
                          static_cast<std::uint64_t>(r));
      std::vector<std::size_t> rows;
      for (auto& [tid, candidates] : pool) {
        std::vector<std::size_t> shuffled = candidates;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        shuffled.resize(std::min(shuffled.size(), static_cast<std::size_t>(n)));
        rows.insert(rows.end(), shuffled.begin(), shuffled.end());
      }
      std::sort(rows.begin(), rows.end());
      const EncodedTable train = select_rows(table, rows);
      Hyperparams hp = config.hp;
      hp.seed = config.hp.seed + static_cast<std::uint64_t>(r);
      const auto start = Clock::now();
      const auto opts = filtered_options(train.X, schema, 0.95, config.threads);
      const ForestModel model = train_forest(train.X, train.y, hp, opts);
      point.training_time_seconds += seconds_since(start);
      std::vector<double> predicted;
      for (auto i : test) predicted.push_back(predict(model, table.X.row(i)));
      point.repeat_mares.push_back(mare(predicted, actual, base));
    }
    point.training_time_seconds /= static_cast<double>(config.repeats);
    point.mare = mean(point.repeat_mares);
    point.mare_std = stddev(point.repeat_mares);
    points.push_back(std::move(point));
  }
  return points;
}

json to_json(const ScalabilityPoint& p) {
  return {{"scope", p.scope},
          {"num_templates", p.num_templates},
          {"training_time_seconds", p.training_time_seconds},
          {"model_size_bytes", p.model_size_bytes},
          {"mare", p.mare},
          {"single_inference_seconds", p.single_inference_seconds},
          {"repeats", p.repeats}};
}

json to_json(const SampleSizePoint& p) {
  return {{"n", p.n},
          {"mare", p.mare},
          {"mare_std", p.mare_std},
          {"training_time_seconds", p.training_time_seconds},
          {"repeat_mares", p.repeat_mares}};
}

void append_jsonl(const std::filesystem::path& path, const json& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIoError, "cannot append to " + path.string());
  out << record.dump() << "\n";
}

void write_scalability_csv(std::ostream& out, const std::vector<ScalabilityPoint>& points) {
  out << "scope,num_templates,training_time_seconds,model_size_bytes,mare,"
         "single_inference_seconds\n";
  for (const auto& p : points) {
    out << p.scope << ',' << p.num_templates << ',' << format_double(p.training_time_seconds)
        << ',' << p.model_size_bytes << ',' << format_double(p.mare) << ','
        << format_double(p.single_inference_seconds) << "\n";
  }
}

void write_sample_size_csv(std::ostream& out, const std::vector<SampleSizePoint>& points) {
  out << "n,mare,mare_std,training_time_seconds\n";
  for (const auto& p : points) {
    out << p.n << ',' << format_double(p.mare) << ',' << format_double(p.mare_std) << ','
        << format_double(p.training_time_seconds) << "\n";
  }
}

DemoTable tabular_demo(const Dataset& input, const std::string& group,
                       const std::string& sample_id, const DemoOptions& options) {
  const bool known_group = std::any_of(input.records.begin(), input.records.end(),
                                       [&](const JobRecord& r) { return r.template_id == group; });
  if (!known_group) throw Error(ErrorCode::kUnknownGroup, "unknown group " + group);
  if (input.find_job(sample_id) == nullptr) {
    throw Error(ErrorCode::kUnknownSample, "unknown sample " + sample_id);
  }

  Dataset dataset = input;
  if (options.group_as_feature) {
    auto features = dataset.schema.features();
    features.push_back({"group", FeatureLevel::kJob, FeatureKind::kCategorical, {"Group membership"}});
    dataset.schema = FeatureSchema(std::move(features), dataset.schema.version() + "+group");
    for (auto& r : dataset.records) r.feature_values.push_back(FeatureValue(r.template_id));
  }
  const FeatureSchema& schema = dataset.schema;
  const EncodedTable table = impute_and_encode(dataset);

  TrainOptions train;
  train.threads = options.threads;
  train.schema_fingerprint = schema.fingerprint();
  const ForestModel model = train_forest(table.X, table.y, options.hp, train);
  const TemplateBaseline base = compute_baseline(table, schema, group, model);

  std::size_t sample_row = 0;
  while (table.job_ids[sample_row] != sample_id) ++sample_row;
  const auto x = table.X.row(sample_row);
  const auto bd = decompose_forest(model, x);
  const auto deltas = delta_contributions(bd, base.baseline_breakdown);

  const auto rows = table.rows_by_template().at(group);
  DemoTable out;
  out.group = group;
  out.sample_id = sample_id;
  out.sample_target = table.y[sample_row];
  out.sample_prediction = bd.prediction;
  out.baseline_target = base.baseline_runtime;
  out.baseline_prediction = base.predicted_baseline;
  for (std::size_t k = 0; k < schema.size(); ++k) {
    double sum = 0.0;
    for (auto i : rows) sum += table.X(i, k);
    out.rows.push_back({schema[k].name, x[k], sum / static_cast<double>(rows.size()),
                        base.baseline_features[k], deltas[k]});
  }
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const DemoRow& a, const DemoRow& b) {
    if (a.delta_fc != b.delta_fc) return a.delta_fc > b.delta_fc;
    return a.feature < b.feature;
  });
  return out;
}

namespace {

std::string cell(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

std::string render_demo(const DemoTable& t) {
  std::ostringstream out;
  out << "Sample " << t.sample_id << " vs group " << t.group << ": target "
      << cell(t.sample_target, 2) << " (predicted " << cell(t.sample_prediction, 2)
      << "), baseline " << cell(t.baseline_target, 2) << " (predicted "
      << cell(t.baseline_prediction, 2) << ")\n";
  std::size_t w = 7;
  for (const auto& r : t.rows) w = std::max(w, r.feature.size());
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s  %10s  %10s  %10s  %10s\n", static_cast<int>(w),
                "Feature", "Sample", "Mean", "Baseline", "Delta FC");
  out << line;
  for (const auto& r : t.rows) {
    std::snprintf(line, sizeof(line), "%-*s  %10s  %10s  %10s  %10s\n", static_cast<int>(w),
                  r.feature.c_str(), cell(r.sample, 2).c_str(), cell(r.mean, 2).c_str(),
                  cell(r.baseline, 2).c_str(), cell(r.delta_fc, 3).c_str());
    out << line;
  }
  return out.str();
}

json to_json(const DemoTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"feature", r.feature},
                    {"sample", r.sample},
                    {"mean", r.mean},
                    {"baseline", r.baseline},
                    {"delta_fc", r.delta_fc}});
  }
  return {{"group", t.group},
          {"sample_id", t.sample_id},
          {"sample_target", t.sample_target},
          {"sample_prediction", t.sample_prediction},
          {"baseline_target", t.baseline_target},
          {"baseline_prediction", t.baseline_prediction},
          {"columns", {"Feature", "Sample", "Mean", "Baseline", "Delta FC"}},
          {"rows", std::move(rows)}};
}

FeatureSchema auto_mpg_schema() {
  using L = FeatureLevel;
  using K = FeatureKind;
  return FeatureSchema(
      {{"Cylinders", L::kJob, K::kNumeric, {"Number of cylinders"}},
       {"Displacement", L::kJob, K::kNumeric, {"Engine displacement"}},
       {"Horsepower", L::kJob, K::kNumeric, {"Engine power"}},
       {"Weight", L::kJob, K::kNumeric, {"Vehicle weight"}},
       {"Acceleration", L::kJob, K::kNumeric, {"Time to accelerate"}},
       {"Year", L::kJob, K::kNumeric, {"Model year"}}},
      "auto-mpg-1");
}

namespace {

std::string origin_group(std::string_view origin) {
  std::string o(trim(origin));
  std::transform(o.begin(), o.end(), o.begin(), [](unsigned char c) { return std::tolower(c); });
  if (o == "1" || o == "usa" || o == "us" || o == "american") return "American";
  if (o == "2" || o == "europe" || o == "european") return "European";
  if (o == "3" || o == "japan" || o == "japanese") return "Japanese";
  throw Error(ErrorCode::kMalformedRow, "unknown origin " + std::string(origin));
}

std::optional<FeatureValue> numeric_cell(std::string_view s) {
  auto v = parse_double(s);
  if (!v) return std::nullopt;
  return FeatureValue(*v);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

Dataset load_auto_mpg(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  Dataset ds;
  ds.schema = auto_mpg_schema();
  std::map<std::string, int> seen;
  auto add = [&](std::string name, const std::string& group, double mpg,
                 std::vector<std::optional<FeatureValue>> values) {
    if (name.empty()) name = "car";
    const int count = ++seen[name];
    if (count > 1) name += "#" + std::to_string(count);
    JobRecord r;
    r.job_id = std::move(name);
    r.template_id = group;
    r.submitted_at = static_cast<std::int64_t>(ds.records.size());
    r.runtime_seconds = mpg;
    r.feature_values = std::move(values);
    ds.records.push_back(std::move(r));
  };

  std::string line;
  std::size_t line_no = 0;
  std::optional<std::map<std::string, std::size_t>> header;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    const bool csv_header = !header && line.find(',') != std::string::npos &&
                            lower(line).find("mpg") != std::string::npos;
    if (csv_header) {
      auto fields = split_csv_line(line);
      if (!fields) throw Error(ErrorCode::kMalformedRow, "line 1");
      header.emplace();
      for (std::size_t i = 0; i < fields->size(); ++i) {
        (*header)[lower(std::string(trim((*fields)[i])))] = i;
      }
      for (const char* req : {"mpg", "cylinders", "displacement", "horsepower", "weight",
                              "acceleration", "origin"}) {
        if (!header->count(req)) throw Error(ErrorCode::kMissingColumn, req);
      }
      if (!header->count("year") && !header->count("model_year") &&
          !header->count("model year")) {
        throw Error(ErrorCode::kMissingColumn, "year");
      }
      continue;
    }
    if (header) {
      auto fields = split_csv_line(line);
      if (!fields || fields->size() != header->size()) {
        throw Error(ErrorCode::kMalformedRow, "line " + std::to_string(line_no));
      }
      auto col = [&](std::initializer_list<const char*> names) -> std::string {
        for (const char* n : names) {
          auto it = header->find(n);
          if (it != header->end()) return (*fields)[it->second];
        }
        return {};
      };
      auto mpg = parse_double(col({"mpg"}));
      if (!mpg || *mpg <= 0.0) continue;
      add(std::string(trim(col({"name", "car name", "car_name"}))), origin_group(col({"origin"})),
          *mpg,
          {numeric_cell(col({"cylinders"})), numeric_cell(col({"displacement"})),
           numeric_cell(col({"horsepower"})), numeric_cell(col({"weight"})),
           numeric_cell(col({"acceleration"})),
           numeric_cell(col({"year", "model_year", "model year"}))});
      continue;
    }
    // Whitespace layout: eight numeric columns, then the quoted name.
    std::string numeric_part = line;
    std::string name;
    if (auto q = line.find('"'); q != std::string::npos) {
      numeric_part = line.substr(0, q);
      name = line.substr(q + 1);
      if (auto e = name.rfind('"'); e != std::string::npos) name.resize(e);
    } else if (auto tab = line.find('\t'); tab != std::string::npos) {
      numeric_part = line.substr(0, tab);
      name = std::string(trim(line.substr(tab + 1)));
    }
    std::istringstream tokens(numeric_part);
    std::vector<std::string> t;
    for (std::string tok; tokens >> tok;) t.push_back(tok);
    if (t.size() != 8) {
      throw Error(ErrorCode::kMalformedRow, "line " + std::to_string(line_no));
    }
    auto mpg = parse_double(t[0]);
    if (!mpg || *mpg <= 0.0) continue;
    add(name, origin_group(t[7]), *mpg,
        {numeric_cell(t[1]), numeric_cell(t[2]), numeric_cell(t[3]), numeric_cell(t[4]),
         numeric_cell(t[5]), numeric_cell(t[6])});
  }
  if (ds.records.empty()) throw Error(ErrorCode::kEmptyDataset, "no rows in " + path.string());
  return ds;
}

GridSearchResult grid_search(const EncodedTable& table, const GridSpace& space, int samples,
                             int folds, std::uint64_t seed, unsigned threads) {
  if (folds < 2 || static_cast<std::size_t>(folds) > table.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "folds must lie in [2, rows]");
  }
  if (samples < 1) throw Error(ErrorCode::kInvalidArgument, "samples must be >= 1");
  std::vector<Hyperparams> grid;
  for (int trees : space.num_trees)
    for (const auto& depth : space.max_depth)
      for (int leaf : space.min_samples_leaf)
        for (const auto& fps : space.features_per_split) {
          Hyperparams hp;
          hp.num_trees = trees;
          hp.max_depth = depth;
          hp.min_samples_leaf = leaf;
          hp.features_per_split = fps;
          hp.seed = seed;
          grid.push_back(hp);
        }
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty search space");
  auto rng = make_rng(seed, 0x9e1d);
  std::shuffle(grid.begin(), grid.end(), rng);
  grid.resize(std::min(grid.size(), static_cast<std::size_t>(samples)));

  std::vector<std::size_t> order(table.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(table.rows());
  for (std::size_t p = 0; p < order.size(); ++p) fold_of[order[p]] = static_cast<int>(p % static_cast<std::size_t>(folds));

  GridSearchResult result;
  bool first = true;
  for (const auto& hp : grid) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t i = 0; i < table.rows(); ++i) {
        (fold_of[i] == f ? test_rows : train_rows).push_back(i);
      }
      const EncodedTable train = select_rows(table, train_rows);
      TrainOptions opts;
      opts.threads = threads;
      const ForestModel model = train_forest(train.X, train.y, hp, opts);
      const auto baselines = template_baselines(table, train_rows);
      const double fallback = band_mean(train.y);
      std::vector<double> pred, actual, base;
      for (auto i : test_rows) {
        pred.push_back(predict(model, table.X.row(i)));
        actual.push_back(table.y[i]);
        auto it = baselines.find(table.template_ids[i]);
        base.push_back(it == baselines.end() ? fallback : it->second);
      }
      total += mare(pred, actual, base);
    }
    const double score = total / folds;
    result.scores.emplace_back(hp, score);
    if (first || score < result.best_score) {
      result.best = hp;
      result.best_score = score;
      first = false;
    }
  }
  return result;
}

ConfidenceTuning tune_confidence(const EncodedTable& table, const GroundTruth& truth,
                                 const TrainedPipeline& pipeline, double target) {
  struct Case {
    double error_rate;
    double prediction;
    std::vector<double> per_tree;  // sorted
    double gap;
    bool hit;
  };
  std::vector<Case> cases;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    auto it = truth.injected.find(table.job_ids[i]);
    if (it == truth.injected.end()) continue;
    const auto x = table.X.row(i);
    const auto report =
        analyze_encoded(table.job_ids[i], table.template_ids[i], x, table.y[i], pipeline);
    Case c;
    c.error_rate = report.error_rate;
    c.prediction = report.predicted_runtime;
    c.per_tree = predict_per_tree(pipeline.model, x);
    std::sort(c.per_tree.begin(), c.per_tree.end());
    c.gap = report.baseline_gap;
    c.hit = false;
    for (std::size_t j = 0; j < std::min<std::size_t>(3, report.causes.size()); ++j) {
      c.hit = c.hit || report.causes[j].feature == it->second;
    }
    cases.push_back(std::move(c));
  }

  ConfidenceTuning best;
  bool have_target = false;
  bool first = true;
  for (double p : {5.0, 10.0, 20.0, 30.0}) {
    for (double t1 : {0.05, 0.1, 0.2, 0.3}) {
      for (double t2 : {0.4, 0.5, 0.75}) {
        ConfidenceParams params{p, t1, t2};
        std::size_t high = 0, hits = 0;
        for (const auto& c : cases) {
          const double lo = nearest_rank_percentile(c.per_tree, p);
          const double hi = nearest_rank_percentile(c.per_tree, 100.0 - p);
          const bool is_high = c.error_rate < t1 && c.prediction >= lo && c.prediction <= hi &&
                               c.gap <= t1;
          if (is_high) {
            ++high;
            hits += c.hit ? 1 : 0;
          }
        }
        const double precision = high ? static_cast<double>(hits) / static_cast<double>(high) : 0.0;
        const bool meets = high > 0 && precision >= target;
        bool better = false;
        if (first) better = true;
        else if (meets && !have_target) better = true;
        else if (meets && have_target) better = high > best.high_count;
        else if (!meets && !have_target) better = precision > best.high_precision;
        if (better) {
          best.best = params;
          best.high_precision = precision;
          best.high_count = high;
          have_target = have_target || meets;
          first = false;
        }
      }
    }
  }
  return best;
}

}  // namespace slowdown
