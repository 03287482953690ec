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


#include "slowdown/reasoner.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "slowdown/error.h"
#include "slowdown/stats.h"

namespace slowdown {

using nlohmann::json;

void ConfidenceParams::validate() const {
  if (!(p > 0.0 && p < 50.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence p must lie in (0, 50)");
  }
  if (!(t1 > 0.0 && t1 < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence t1 must lie in (0, 1)");
  }
  if (!(t2 > t1)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence t2 must exceed t1");
  }
}

std::string_view to_string(ConfidenceLevel level) {
  switch (level) {
    case ConfidenceLevel::kHigh: return "High";
    case ConfidenceLevel::kMedium: return "Medium";
    case ConfidenceLevel::kLow: return "Low";
  }
  return "Low";
}

ConfidenceLevel confidence_level_from_string(std::string_view s) {
  if (s == "High") return ConfidenceLevel::kHigh;
  if (s == "Medium") return ConfidenceLevel::kMedium;
  if (s == "Low") return ConfidenceLevel::kLow;
  throw Error(ErrorCode::kInvalidArgument, "unknown confidence level " + std::string(s));
}

std::vector<double> delta_contributions(const ContributionBreakdown& job,
                                        const ContributionBreakdown& base) {
  if (job.contributions.size() != base.contributions.size()) {
    throw Error(ErrorCode::kModelMismatch, "breakdowns have different widths");
  }
  const double scale = std::max({1.0, std::abs(job.bias), std::abs(base.bias)});
  if (std::abs(job.bias - base.bias) > 1e-9 * scale) {
    throw Error(ErrorCode::kModelMismatch, "breakdowns come from different models");
  }
  std::vector<double> out(job.contributions.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = job.contributions[k] - base.contributions[k];
  }
  return out;
}

std::vector<RankedCause> rank_causes(std::span<const double> deltas,
                                     const FeatureSchema& schema, int top_t) {
  if (top_t < 1) throw Error(ErrorCode::kInvalidArgument, "top_t must be >= 1");
  if (deltas.size() != schema.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "deltas do not match the schema");
  }
  std::vector<std::size_t> positive;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (deltas[k] > 0.0) positive.push_back(k);
  }
  std::sort(positive.begin(), positive.end(), [&](std::size_t a, std::size_t b) {
    if (deltas[a] != deltas[b]) return deltas[a] > deltas[b];
    return schema[a].name < schema[b].name;
  });
  if (positive.size() > static_cast<std::size_t>(top_t)) {
    positive.resize(static_cast<std::size_t>(top_t));
  }
  double total = 0.0;
  for (auto k : positive) total += deltas[k];

  std::vector<RankedCause> causes;
  causes.reserve(positive.size());
  for (auto k : positive) {
    causes.push_back({schema[k].name, deltas[k], deltas[k] / total, schema[k].reasons});
  }
  return causes;
}

ConfidenceResult confidence(const ForestModel& model, std::span<const double> x,
                            double actual_runtime, const ConfidenceParams& params) {
  if (!(actual_runtime > 0.0)) {
    throw Error(ErrorCode::kNonPositiveRuntime, "actual runtime must be positive");
  }
  ConfidenceResult out;
  std::vector<double> per_tree = predict_per_tree(model, x);
  out.prediction = predict(model, x);
  out.error_rate = std::abs(out.prediction - actual_runtime) / actual_runtime;
  std::sort(per_tree.begin(), per_tree.end());
  out.interval_low = nearest_rank_percentile(per_tree, params.p);
  out.interval_high = nearest_rank_percentile(per_tree, 100.0 - params.p);
  const bool inside =
      out.prediction >= out.interval_low && out.prediction <= out.interval_high;
  if (out.error_rate < params.t1 && inside) {
    out.level = ConfidenceLevel::kHigh;
  } else if (out.error_rate >= params.t1 && out.error_rate < params.t2) {
    out.level = ConfidenceLevel::kMedium;
  } else {
    out.level = ConfidenceLevel::kLow;
  }
  return out;
}

SlowdownReport analyze_encoded(const std::string& job_id, const std::string& template_id,
                               std::span<const double> x, double actual_runtime,
                               const TrainedPipeline& pipeline,
                               const AnalyzeOptions& options) {
  const auto& model = pipeline.model;
  if (!model.schema_fingerprint.empty() &&
      model.schema_fingerprint != pipeline.schema.fingerprint()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "model was trained under a different feature schema");
  }
  if (x.size() != pipeline.schema.size()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "expected " + std::to_string(pipeline.schema.size()) + " features");
  }
  if (pipeline.baselines.empty()) throw Error(ErrorCode::kNoBaselines, "no baselines");
  options.params.validate();

  SlowdownReport report;
  report.job_id = job_id;
  report.template_id = template_id;

  const TemplateBaseline* base = pipeline.baselines.find(template_id);
  if (base == nullptr) {
    base = &nearest_baseline(pipeline.baselines, x);
    report.fallback = true;
  }
  report.baseline_template_id = base->template_id;

  const auto job_bd = decompose_forest(model, x);
  report.raw_deltas = delta_contributions(job_bd, base->baseline_breakdown);
  report.causes = rank_causes(report.raw_deltas, pipeline.schema, options.top_t);

  const auto conf = confidence(model, x, actual_runtime, options.params);
  report.actual_runtime = actual_runtime;
  report.predicted_runtime = job_bd.prediction;
  report.baseline_runtime = base->baseline_runtime;
  report.predicted_baseline = base->predicted_baseline;
  report.baseline_gap = base->baseline_gap;
  report.error_rate = conf.error_rate;
  report.confidence = conf.level;
  if (report.confidence == ConfidenceLevel::kHigh &&
      base->baseline_gap > options.params.t1) {
    report.confidence = ConfidenceLevel::kMedium;
  }
  return report;
}

SlowdownReport analyze(const JobRecord& job, const TrainedPipeline& pipeline,
                       const AnalyzeOptions& options) {
  const auto x = pipeline.encoding.encode(pipeline.schema, job);
  return analyze_encoded(job.job_id, job.template_id, x, job.runtime_seconds, pipeline,
                         options);
}

json to_json(const SlowdownReport& r, const FeatureSchema& schema) {
  json causes = json::array();
  for (const auto& c : r.causes) {
    causes.push_back({{"feature", c.feature},
                      {"delta_fc", c.delta_fc},
                      {"share", c.share},
                      {"reasons", c.reasons}});
  }
  json raw = json::array();
  for (std::size_t k = 0; k < r.raw_deltas.size(); ++k) {
    raw.push_back({{"feature", k < schema.size() ? schema[k].name : std::to_string(k)},
                   {"value", r.raw_deltas[k]}});
  }
  return {{"job_id", r.job_id},
          {"template_id", r.template_id},
          {"baseline_template_id", r.baseline_template_id},
          {"fallback", r.fallback},
          {"actual_runtime", r.actual_runtime},
          {"predicted_runtime", r.predicted_runtime},
          {"baseline_runtime", r.baseline_runtime},
          {"predicted_baseline", r.predicted_baseline},
          {"baseline_gap", r.baseline_gap},
          {"confidence", to_string(r.confidence)},
          {"error_rate", r.error_rate},
          {"causes", std::move(causes)},
          {"raw_deltas", std::move(raw)}};
}

SlowdownReport report_from_json(const json& doc, const FeatureSchema& schema) {
  SlowdownReport r;
  r.job_id = doc.at("job_id").get<std::string>();
  r.template_id = doc.at("template_id").get<std::string>();
  r.baseline_template_id = doc.value("baseline_template_id", r.template_id);
  r.fallback = doc.value("fallback", false);
  r.actual_runtime = doc.at("actual_runtime").get<double>();
  r.predicted_runtime = doc.at("predicted_runtime").get<double>();
  r.baseline_runtime = doc.at("baseline_runtime").get<double>();
  r.predicted_baseline = doc.at("predicted_baseline").get<double>();
  r.baseline_gap = doc.value("baseline_gap", 0.0);
  r.confidence = confidence_level_from_string(doc.at("confidence").get<std::string>());
  r.error_rate = doc.at("error_rate").get<double>();
  for (const auto& c : doc.at("causes")) {
    r.causes.push_back({c.at("feature").get<std::string>(),
                        c.at("delta_fc").get<double>(), c.at("share").get<double>(),
                        c.value("reasons", std::vector<std::string>{})});
  }
  if (doc.contains("raw_deltas")) {
    r.raw_deltas.assign(schema.size(), 0.0);
    for (const auto& d : doc.at("raw_deltas")) {
      auto k = schema.index_of(d.at("feature").get<std::string>());
      if (!k) throw Error(ErrorCode::kSchemaMismatch, "unknown feature in report");
      r.raw_deltas[*k] = d.at("value").get<double>();
    }
  }
  return r;
}

namespace {

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string render_report(const SlowdownReport& r) {
  std::ostringstream out;
  out << "Job " << r.job_id << "  (template " << r.template_id << ")\n";
  if (r.fallback) {
    out << "  template not seen in training; compared against "
        << r.baseline_template_id << "\n";
  }
  out << "  actual runtime      " << fixed(r.actual_runtime, 1) << " s\n"
      << "  predicted runtime   " << fixed(r.predicted_runtime, 1) << " s\n"
      << "  baseline runtime    " << fixed(r.baseline_runtime, 1) << " s  (model "
      << fixed(r.predicted_baseline, 1) << " s)\n"
      << "  confidence          " << to_string(r.confidence) << "  (error rate "
      << fixed(r.error_rate, 3) << ")\n\n";
  if (r.causes.empty()) {
    out << "  No feature pushed the predicted runtime above the baseline.\n";
    return out.str();
  }
  std::size_t name_width = 7;
  for (const auto& c : r.causes) name_width = std::max(name_width, c.feature.size());
  out << "  " << pad("#", 3) << pad("Feature", name_width + 2) << pad("Delta (s)", 12)
      << pad("Share", 8) << "Reason\n";
  for (std::size_t i = 0; i < r.causes.size(); ++i) {
    const auto& c = r.causes[i];
    out << "  " << pad(std::to_string(i + 1), 3) << pad(c.feature, name_width + 2)
        << pad(fixed(c.delta_fc, 1), 12) << pad(fixed(100.0 * c.share, 1) + "%", 8)
        << (c.reasons.empty() ? std::string("-") : c.reasons.front()) << "\n";
    for (std::size_t j = 1; j < c.reasons.size(); ++j) {
      out << "  " << std::string(3 + name_width + 2 + 12 + 8, ' ') << c.reasons[j]
          << "\n";
    }
  }
  return out.str();
}

}  // namespace slowdown
