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


#include <gtest/gtest.h>

#include <cmath>

#include "slowdown/pipeline.h"
#include "slowdown/reasoner.h"
#include "slowdown/synth.h"
#include "test_support.h"

namespace slowdown {
namespace {

using testing::constant_forest;
using testing::forest_of;
using testing::Gen;
using testing::stump;

FeatureSchema ab_schema() {
  return FeatureSchema({{"a_feat", FeatureLevel::kJob, FeatureKind::kNumeric, {"a grew"}},
                        {"b_feat", FeatureLevel::kJob, FeatureKind::kNumeric,
                         {"b grew", "b moved"}},
                        {"c_feat", FeatureLevel::kJob, FeatureKind::kNumeric, {"c grew"}}},
                       "r");
}

TEST(Delta, IdenticalBreakdownsGiveZeros) {
  const auto model = forest_of({stump()}, 1);
  const auto bd = decompose_forest(model, std::vector<double>{2.0});
  EXPECT_EQ(delta_contributions(bd, bd), (std::vector<double>{0.0}));
}

TEST(Delta, StumpRightVersusLeft) {
  const auto model = forest_of({stump()}, 1);
  const auto job = decompose_forest(model, std::vector<double>{7.0});
  const auto base = decompose_forest(model, std::vector<double>{3.0});
  const auto d = delta_contributions(job, base);
  EXPECT_EQ(d, (std::vector<double>{4.0}));
  EXPECT_EQ(job.prediction - base.prediction, 4.0);
}

TEST(Delta, MismatchedModelsAreRejected) {
  ContributionBreakdown a{10.0, {1.0}, 11.0}, b{10.5, {1.0}, 11.5}, c{10.0, {1.0, 2.0}, 13.0};
  EXPECT_SLOWDOWN_ERROR(kModelMismatch, delta_contributions(a, b));
  EXPECT_SLOWDOWN_ERROR(kModelMismatch, delta_contributions(a, c));
}

TEST(Delta, SumEqualsPredictionGapOnRandomPairs) {
  Gen gen(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto model = gen.forest(20, 8);
    const auto x = gen.vector(model.num_features, -10, 10);
    const auto xb = gen.vector(model.num_features, -10, 10);
    const auto job = decompose_forest(model, x);
    const auto base = decompose_forest(model, xb);
    const auto d = delta_contributions(job, base);
    double sum = 0.0;
    for (double v : d) sum += v;
    const double gap = predict(model, x) - predict(model, xb);
    EXPECT_NEAR(sum, gap, 1e-9 * std::max({1.0, std::abs(job.prediction),
                                           std::abs(base.prediction)}));
  }
}

TEST(Rank, KeepsPositiveDeltasWithShares) {
  const std::vector<double> d = {5, -3, 2};
  const auto causes = rank_causes(d, ab_schema(), 3);
  ASSERT_EQ(causes.size(), 2u);
  EXPECT_EQ(causes[0].feature, "a_feat");
  EXPECT_EQ(causes[1].feature, "c_feat");
  EXPECT_DOUBLE_EQ(causes[0].share, 5.0 / 7.0);
  EXPECT_DOUBLE_EQ(causes[1].share, 2.0 / 7.0);
  EXPECT_EQ(causes[0].reasons, (std::vector<std::string>{"a grew"}));
}

TEST(Rank, NoPositiveDeltaGivesNoCauses) {
  const std::vector<double> d = {0, -3, -1e-12};
  EXPECT_TRUE(rank_causes(d, ab_schema(), 5).empty());
}

TEST(Rank, TiesGoToTheSmallerName) {
  const FeatureSchema schema({{"b_feat", FeatureLevel::kJob, FeatureKind::kNumeric, {"b"}},
                              {"a_feat", FeatureLevel::kJob, FeatureKind::kNumeric, {"a"}}},
                             "t");
  const std::vector<double> d = {1.5, 1.5};
  const auto causes = rank_causes(d, schema, 5);
  ASSERT_EQ(causes.size(), 2u);
  EXPECT_EQ(causes[0].feature, "a_feat");
  EXPECT_EQ(causes[1].feature, "b_feat");
}

TEST(Rank, TruncatesToTopT) {
  const std::vector<double> d = {1, 3, 2};
  const auto causes = rank_causes(d, ab_schema(), 1);
  ASSERT_EQ(causes.size(), 1u);
  EXPECT_EQ(causes[0].feature, "b_feat");
  EXPECT_EQ(causes[0].share, 1.0);
  EXPECT_SLOWDOWN_ERROR(kInvalidArgument, rank_causes(d, ab_schema(), 0));
}

TEST(Confidence, ExactPredictionIsHigh) {
  const auto model = constant_forest(std::vector<double>(10, 100.0), 1);
  const auto c = confidence(model, std::vector<double>{0.0}, 100.0, ConfidenceParams{});
  EXPECT_EQ(c.level, ConfidenceLevel::kHigh);
  EXPECT_EQ(c.error_rate, 0.0);
}

TEST(Confidence, MidBandErrorIsMedium) {
  const ConfidenceParams params;
  const auto model = constant_forest(std::vector<double>(10, 100.0), 1);
  // |100 - a| / a = (t1 + t2) / 2
  const double target = 0.5 * (params.t1 + params.t2);
  const double actual = 100.0 / (1.0 + target);
  const auto c = confidence(model, std::vector<double>{0.0}, actual, params);
  EXPECT_NEAR(c.error_rate, target, 1e-12);
  EXPECT_EQ(c.level, ConfidenceLevel::kMedium);
}

TEST(Confidence, LargeErrorIsLow) {
  const auto model = constant_forest(std::vector<double>(4, 100.0), 1);
  const auto c = confidence(model, std::vector<double>{0.0}, 50.0, ConfidenceParams{});
  EXPECT_EQ(c.error_rate, 1.0);
  EXPECT_EQ(c.level, ConfidenceLevel::kLow);
}

TEST(Confidence, PredictionOutsideTreeIntervalIsLow) {
  // Nineteen trees at 100 and one at 10: the forest predicts 95.5 while the
  // 10th and 90th nearest-rank percentiles of the trees are both 100.
  std::vector<double> leaves(19, 100.0);
  leaves.push_back(10.0);
  const auto model = constant_forest(leaves, 1);
  const auto c = confidence(model, std::vector<double>{0.0}, 95.5, ConfidenceParams{});
  EXPECT_EQ(c.prediction, 95.5);
  EXPECT_EQ(c.interval_low, 100.0);
  EXPECT_EQ(c.interval_high, 100.0);
  EXPECT_LT(c.error_rate, ConfidenceParams{}.t1);
  EXPECT_EQ(c.level, ConfidenceLevel::kLow);
}

TEST(Confidence, TenTreeVariantKeepsTheMeanInside) {
  // With ten trees the 10th percentile is rank 1, the outlier tree itself, so
  // the interval [10, 100] contains the mean 91.
  std::vector<double> leaves(9, 100.0);
  leaves.push_back(10.0);
  const auto model = constant_forest(leaves, 1);
  const auto c = confidence(model, std::vector<double>{0.0}, 91.0, ConfidenceParams{});
  EXPECT_EQ(c.interval_low, 10.0);
  EXPECT_EQ(c.interval_high, 100.0);
  EXPECT_EQ(c.level, ConfidenceLevel::kHigh);
}

TEST(Confidence, NonPositiveRuntime) {
  const auto model = constant_forest({1.0}, 1);
  EXPECT_SLOWDOWN_ERROR(kNonPositiveRuntime,
                        confidence(model, std::vector<double>{0.0}, 0.0, ConfidenceParams{}));
}

TEST(Confidence, ParamsValidation) {
  EXPECT_NO_THROW(ConfidenceParams{}.validate());
  EXPECT_SLOWDOWN_ERROR(kInvalidArgument, (ConfidenceParams{50.0, 0.2, 0.5}).validate());
  EXPECT_SLOWDOWN_ERROR(kInvalidArgument, (ConfidenceParams{10.0, 0.0, 0.5}).validate());
  EXPECT_SLOWDOWN_ERROR(kInvalidArgument, (ConfidenceParams{10.0, 0.3, 0.3}).validate());
  EXPECT_EQ(confidence_level_from_string(to_string(ConfidenceLevel::kMedium)),
            ConfidenceLevel::kMedium);
}

// Feature a_feat splits at 5 into 80 / 120; the baseline template sits on the
// left leaf with runtime 80.
TrainedPipeline hand_pipeline(double baseline_runtime = 80.0) {
  TrainedPipeline p;
  p.schema = ab_schema();
  p.model = forest_of({stump(0, 80.0, 120.0)}, 3);
  p.model.schema_fingerprint = p.schema.fingerprint();
  p.encoding.categories.assign(3, {});
  p.encoding.global_fill.assign(3, 0.0);
  TemplateBaseline b;
  b.template_id = "tmpl";
  b.baseline_runtime = baseline_runtime;
  b.baseline_features = {3.0, 1.0, 1.0};
  b.baseline_breakdown = decompose_forest(p.model, b.baseline_features);
  b.predicted_baseline = b.baseline_breakdown.prediction;
  b.baseline_gap = std::abs(b.predicted_baseline - b.baseline_runtime) / b.baseline_runtime;
  b.support = 10;
  p.baselines.baselines.emplace(b.template_id, b);
  TemplateBaseline far = b;
  far.template_id = "zfar";
  far.baseline_features = {3.0, 100.0, 100.0};
  p.baselines.baselines.emplace(far.template_id, far);
  p.baselines.feature_scales = {1.0, 1.0, 1.0};
  return p;
}

JobRecord job(const std::string& tid, double a, double runtime) {
  JobRecord r;
  r.job_id = "job-1";
  r.template_id = tid;
  r.feature_values = {FeatureValue(a), FeatureValue(1.0), FeatureValue(1.0)};
  r.runtime_seconds = runtime;
  return r;
}

TEST(Analyze, BaselineIdenticalJobHasNoCauses) {
  const auto p = hand_pipeline();
  const auto r = analyze(job("tmpl", 3.0, 80.0), p);
  EXPECT_TRUE(r.causes.empty());
  EXPECT_EQ(r.raw_deltas, (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(r.confidence, ConfidenceLevel::kHigh);
  EXPECT_FALSE(r.fallback);
}

TEST(Analyze, SlowJobBlamesTheSplitFeature) {
  const auto p = hand_pipeline();
  const auto r = analyze(job("tmpl", 9.0, 125.0), p);
  ASSERT_EQ(r.causes.size(), 1u);
  EXPECT_EQ(r.causes[0].feature, "a_feat");
  EXPECT_EQ(r.causes[0].delta_fc, 40.0);
  EXPECT_EQ(r.predicted_runtime - r.predicted_baseline, 40.0);
  EXPECT_EQ(r.baseline_runtime, 80.0);
  EXPECT_EQ(r.error_rate, std::abs(r.predicted_runtime - r.actual_runtime) / r.actual_runtime);
  EXPECT_EQ(r.confidence, ConfidenceLevel::kHigh);
}

TEST(Analyze, LargeBaselineGapCapsAtMedium) {
  // Observed baseline 50 against a model baseline of 80: gap 0.6 > t1.
  const auto p = hand_pipeline(50.0);
  const auto r = analyze(job("tmpl", 9.0, 120.0), p);
  EXPECT_EQ(r.error_rate, 0.0);
  EXPECT_GT(r.baseline_gap, AnalyzeOptions{}.params.t1);
  EXPECT_EQ(r.confidence, ConfidenceLevel::kMedium);
}

TEST(Analyze, UnseenTemplateFallsBackToNearest) {
  const auto p = hand_pipeline();
  const auto r = analyze(job("never-seen", 9.0, 120.0), p);
  EXPECT_TRUE(r.fallback);
  EXPECT_EQ(r.template_id, "never-seen");
  EXPECT_EQ(r.baseline_template_id, "tmpl");
}

TEST(Analyze, SchemaAndStoreErrors) {
  auto p = hand_pipeline();
  JobRecord bad = job("tmpl", 1.0, 1.0);
  bad.feature_values.pop_back();
  EXPECT_SLOWDOWN_ERROR(kSchemaMismatch, analyze(bad, p));
  auto other = p;
  other.model.schema_fingerprint = "0000";
  EXPECT_SLOWDOWN_ERROR(kSchemaMismatch, analyze(job("tmpl", 1.0, 1.0), other));
  auto empty = p;
  empty.baselines.baselines.clear();
  EXPECT_SLOWDOWN_ERROR(kNoBaselines, analyze(job("tmpl", 1.0, 1.0), empty));
}

TEST(Analyze, ReportsAreDeterministicAndRoundTrip) {
  const auto p = hand_pipeline();
  const auto a = to_json(analyze(job("tmpl", 9.0, 110.0), p), p.schema).dump();
  const auto b = to_json(analyze(job("tmpl", 9.0, 110.0), p), p.schema).dump();
  EXPECT_EQ(a, b);
  const auto back = report_from_json(nlohmann::json::parse(a), p.schema);
  EXPECT_EQ(to_json(back, p.schema).dump(), a);
  const auto text = render_report(back);
  EXPECT_NE(text.find("a_feat"), std::string::npos);
  EXPECT_NE(text.find("a grew"), std::string::npos);
}

TEST(Analyze, InjectedInputSizeRanksFirst) {
  SynthConfig cfg;
  cfg.num_templates = 4;
  cfg.jobs_per_template = 300;
  cfg.seed = 3;
  const auto data = generate(default_schema(), cfg);
  Hyperparams hp;
  hp.num_trees = 40;
  hp.seed = 1;
  const auto p = train_pipeline(data.dataset, hp);
  int checked = 0, first = 0;
  for (const auto& [job_id, feature] : data.truth.injected) {
    if (feature != "input_size") continue;
    const auto r = analyze(*data.dataset.find_job(job_id), p);
    ++checked;
    if (!r.causes.empty() && r.causes[0].feature == "input_size") ++first;
  }
  ASSERT_GT(checked, 0);
  EXPECT_EQ(first, checked);
}

TEST(Analyze, ErrorRateMatchesStoredRuntimes) {
  SynthConfig cfg;
  cfg.num_templates = 3;
  cfg.jobs_per_template = 100;
  const auto data = generate(default_schema(), cfg);
  Hyperparams hp;
  hp.num_trees = 10;
  const auto p = train_pipeline(data.dataset, hp);
  for (std::size_t i = 0; i < data.dataset.records.size(); i += 7) {
    const auto r = analyze(data.dataset.records[i], p);
    const auto back = report_from_json(to_json(r, p.schema), p.schema);
    EXPECT_EQ(back.error_rate,
              std::abs(back.predicted_runtime - back.actual_runtime) / back.actual_runtime);
    double sum = 0.0;
    for (double d : r.raw_deltas) sum += d;
    EXPECT_NEAR(sum, r.predicted_runtime - r.predicted_baseline,
                1e-9 * std::max(1.0, std::abs(r.predicted_runtime)));
  }
}

}  // namespace
}  // namespace slowdown
