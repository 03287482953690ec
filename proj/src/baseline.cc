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


#include "slowdown/baseline.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "slowdown/error.h"
#include "slowdown/stats.h"

namespace slowdown {

using nlohmann::json;

namespace {

// Mode over integer codes; ties go to the smallest code.
double modal_code(const std::vector<double>& codes) {
  std::map<double, std::size_t> counts;
  for (double c : codes) ++counts[c];
  double best = codes.front();
  std::size_t best_count = 0;
  for (const auto& [code, count] : counts) {
    if (count > best_count) {
      best = code;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

std::vector<std::size_t> baseline_band(std::span<const double> runtimes,
                                       const BaselineOptions& options) {
  std::vector<std::size_t> all(runtimes.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (runtimes.size() < options.min_jobs_for_band) return all;

  std::vector<double> sorted(runtimes.begin(), runtimes.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = nearest_rank_percentile(sorted, options.lower_percentile);
  const double hi = nearest_rank_percentile(sorted, options.upper_percentile);
  std::vector<std::size_t> band;
  for (std::size_t i = 0; i < runtimes.size(); ++i) {
    if (runtimes[i] >= lo && runtimes[i] <= hi) band.push_back(i);
  }
  return band.empty() ? all : band;
}

double band_mean(std::span<const double> runtimes, const BaselineOptions& options) {
  const auto band = baseline_band(runtimes, options);
  if (band.empty()) return 0.0;
  double sum = 0.0;
  for (auto i : band) sum += runtimes[i];
  return sum / static_cast<double>(band.size());
}

TemplateBaseline compute_baseline(const EncodedTable& table,
                                  const FeatureSchema& schema,
                                  const std::string& template_id,
                                  const ForestModel& model,
                                  const BaselineOptions& options) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    if (table.template_ids[i] == template_id) rows.push_back(i);
  }
  if (rows.empty()) {
    throw Error(ErrorCode::kUnknownTemplate, "no jobs for template " + template_id);
  }
  if (schema.size() != table.X.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "schema width differs from the table");
  }

  std::vector<double> runtimes;
  runtimes.reserve(rows.size());
  for (auto i : rows) runtimes.push_back(table.y[i]);
  std::vector<std::size_t> selected;
  for (auto pos : baseline_band(runtimes, options)) selected.push_back(rows[pos]);

  TemplateBaseline out;
  out.template_id = template_id;
  out.support = selected.size();
  double runtime_sum = 0.0;
  for (auto i : selected) runtime_sum += table.y[i];
  out.baseline_runtime = runtime_sum / static_cast<double>(selected.size());

  const std::size_t K = schema.size();
  out.baseline_features.assign(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> column;
    column.reserve(selected.size());
    for (auto i : selected) column.push_back(table.X(i, k));
    out.baseline_features[k] = schema[k].kind == FeatureKind::kCategorical
                                   ? modal_code(column)
                                   : mean(column);
  }

  if (options.average_breakdowns) {
    ContributionBreakdown avg;
    avg.contributions.assign(K, 0.0);
    for (auto i : selected) {
      const auto bd = decompose_forest(model, table.X.row(i));
      avg.bias += bd.bias;
      avg.prediction += bd.prediction;
      for (std::size_t k = 0; k < K; ++k) avg.contributions[k] += bd.contributions[k];
    }
    const double n = static_cast<double>(selected.size());
    avg.bias /= n;
    avg.prediction /= n;
    for (double& c : avg.contributions) c /= n;
    out.baseline_breakdown = std::move(avg);
  } else {
    out.baseline_breakdown = decompose_forest(model, out.baseline_features);
  }
  out.predicted_baseline = out.baseline_breakdown.prediction;
  out.baseline_gap =
      std::abs(out.predicted_baseline - out.baseline_runtime) / out.baseline_runtime;
  return out;
}

const TemplateBaseline* BaselineStore::find(const std::string& template_id) const {
  auto it = baselines.find(template_id);
  return it == baselines.end() ? nullptr : &it->second;
}

double BaselineStore::mean_gap() const {
  if (baselines.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [id, b] : baselines) sum += b.baseline_gap;
  return sum / static_cast<double>(baselines.size());
}

std::vector<double> feature_scales(const Matrix& X) {
  std::vector<double> scales(X.cols(), 1.0);
  for (std::size_t k = 0; k < X.cols(); ++k) {
    const double s = stddev(X.column(k));
    if (s > 0.0 && std::isfinite(s)) scales[k] = s;
  }
  return scales;
}

BaselineStore compute_all_baselines(const EncodedTable& table,
                                    const FeatureSchema& schema,
                                    const ForestModel& model,
                                    const BaselineOptions& options) {
  BaselineStore store;
  store.feature_scales = feature_scales(table.X);
  for (const auto& [tid, rows] : table.rows_by_template()) {
    store.baselines.emplace(tid, compute_baseline(table, schema, tid, model, options));
  }
  return store;
}

const TemplateBaseline& nearest_baseline(
    const std::map<std::string, TemplateBaseline>& baselines,
    std::span<const double> x, std::span<const double> scales) {
  if (baselines.empty()) throw Error(ErrorCode::kNoBaselines, "no baselines");
  if (scales.size() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature scales do not match input");
  }
  const TemplateBaseline* best = nullptr;
  double best_distance = std::numeric_limits<double>::infinity();
  // std::map iterates in template order, so strict < keeps the smallest id.
  for (const auto& [tid, b] : baselines) {
    if (b.baseline_features.size() != x.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "baseline width differs from input");
    }
    double d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double z = (x[k] - b.baseline_features[k]) / scales[k];
      d2 += z * z;
    }
    if (best == nullptr || d2 < best_distance) {
      best = &b;
      best_distance = d2;
    }
  }
  return *best;
}

const TemplateBaseline& nearest_baseline(const BaselineStore& store,
                                         std::span<const double> x) {
  return nearest_baseline(store.baselines, x, store.feature_scales);
}

json to_json(const TemplateBaseline& b, const FeatureSchema& schema) {
  return {{"template_id", b.template_id},
          {"baseline_runtime", b.baseline_runtime},
          {"baseline_features", b.baseline_features},
          {"predicted_baseline", b.predicted_baseline},
          {"baseline_breakdown", to_json(b.baseline_breakdown, schema)},
          {"support", b.support},
          {"baseline_gap", b.baseline_gap}};
}

TemplateBaseline baseline_from_json(const json& doc, const FeatureSchema& schema) {
  TemplateBaseline b;
  b.template_id = doc.at("template_id").get<std::string>();
  b.baseline_runtime = doc.at("baseline_runtime").get<double>();
  b.baseline_features = doc.at("baseline_features").get<std::vector<double>>();
  b.predicted_baseline = doc.at("predicted_baseline").get<double>();
  b.baseline_breakdown = breakdown_from_json(doc.at("baseline_breakdown"), schema);
  b.support = doc.at("support").get<std::size_t>();
  b.baseline_gap = doc.at("baseline_gap").get<double>();
  if (b.baseline_features.size() != schema.size()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "baseline " + b.template_id + " has the wrong width");
  }
  return b;
}

json to_json(const BaselineStore& store, const FeatureSchema& schema) {
  json baselines = json::object();
  for (const auto& [tid, b] : store.baselines) baselines[tid] = to_json(b, schema);
  return {{"feature_scales", store.feature_scales}, {"baselines", std::move(baselines)}};
}

BaselineStore baseline_store_from_json(const json& doc, const FeatureSchema& schema) {
  BaselineStore store;
  store.feature_scales = doc.at("feature_scales").get<std::vector<double>>();
  for (const auto& [tid, b] : doc.at("baselines").items()) {
    store.baselines.emplace(tid, baseline_from_json(b, schema));
  }
  return store;
}

}  // namespace slowdown
