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

// Invariants checked over many randomly generated inputs. Each property runs
// a fixed number of cases from a fixed seed so failures reproduce.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "slowdown/baseline.h"
#include "slowdown/forest.h"
#include "slowdown/hashing.h"
#include "slowdown/interpreter.h"
#include "slowdown/pipeline.h"
#include "slowdown/reasoner.h"
#include "slowdown/registry.h"
#include "slowdown/synth.h"
#include "slowdown/telemetry.h"
#include "test_support.h"

namespace slowdown {
namespace {

using testing::Gen;
using testing::relative_tolerance;

constexpr int kCases = 40;

TEST(Property, ForestAdditivity) {
  Gen g(101);
  for (int c = 0; c < kCases; ++c) {
    const auto model = g.forest(25, 8);
    for (int i = 0; i < 20; ++i) {
      const auto x = g.vector(model.num_features, -12.0, 12.0);
      const auto b = decompose_forest(model, x);
      ASSERT_LE(b.additivity_error(), relative_tolerance(b.prediction, 1e-9))
          << "case " << c;
      ASSERT_DOUBLE_EQ(b.prediction, predict(model, x));
    }
  }
}

TEST(Property, BiasDoesNotDependOnInput) {
  Gen g(202);
  for (int c = 0; c < kCases; ++c) {
    const auto model = g.forest(15, 6);
    double expected = 0.0;
    for (const auto& t : model.trees) expected += t.root().mean;
    expected /= static_cast<double>(model.trees.size());
    for (int i = 0; i < 10; ++i) {
      const auto b = decompose_forest(model, g.vector(model.num_features, -12.0, 12.0));
      ASSERT_NEAR(b.bias, expected, relative_tolerance(expected, 1e-12));
    }
  }
}

TEST(Property, PerTreeMeanIsTheForestPrediction) {
  Gen g(303);
  for (int c = 0; c < kCases; ++c) {
    const auto model = g.forest(20, 5);
    const auto x = g.vector(model.num_features, -12.0, 12.0);
    const auto per_tree = predict_per_tree(model, x);
    ASSERT_EQ(per_tree.size(), model.trees.size());
    const double mean = std::accumulate(per_tree.begin(), per_tree.end(), 0.0) /
                        static_cast<double>(per_tree.size());
    ASSERT_NEAR(mean, predict(model, x), relative_tolerance(mean, 1e-12));
  }
}

TEST(Property, TreeDecompositionMatchesOracle) {
  Gen g(404);
  for (int c = 0; c < kCases; ++c) {
    const auto model = g.forest(5, 7);
    for (const auto& tree : model.trees) {
      const auto x = g.vector(model.num_features, -12.0, 12.0);
      const auto got = decompose_tree(tree, x);
      const auto want = testing::oracle_decompose(tree, x);
      ASSERT_EQ(got.bias, want.bias);
      for (std::size_t k = 0; k < x.size(); ++k) {
        ASSERT_NEAR(got.contributions[k], want.contributions[k], 1e-12);
      }
    }
  }
}

TEST(Property, DeltasCloseThePredictionGap) {
  Gen g(505);
  for (int c = 0; c < kCases; ++c) {
    const auto model = g.forest(20, 6);
    const auto a = decompose_forest(model, g.vector(model.num_features, -12.0, 12.0));
    const auto b = decompose_forest(model, g.vector(model.num_features, -12.0, 12.0));
    const auto d = delta_contributions(a, b);
    const double sum = std::accumulate(d.begin(), d.end(), 0.0);
    const double gap = a.prediction - b.prediction;
    ASSERT_NEAR(sum, gap, relative_tolerance(std::max(std::abs(a.prediction),
                                                      std::abs(b.prediction)),
                                             1e-9));
  }
}

FeatureSchema numeric_schema(std::size_t K) {
  std::vector<FeatureSpec> specs;
  for (std::size_t k = 0; k < K; ++k) {
    FeatureSpec s;
    s.name = "f" + std::to_string(k);
    s.kind = FeatureKind::kNumeric;
    specs.push_back(s);
  }
  return FeatureSchema(specs, "prop");
}

TEST(Property, RankedCausesArePositiveSortedAndShareOne) {
  Gen g(606);
  for (int c = 0; c < 200; ++c) {
    const auto K = static_cast<std::size_t>(g.integer(1, 12));
    auto deltas = g.vector(K, -5.0, 5.0);
    // Exact ties and zeros now and then.
    if (K > 2 && g.coin()) deltas[1] = deltas[0];
    if (g.coin()) deltas[K - 1] = 0.0;
    const int top = g.integer(1, 8);
    const auto schema = numeric_schema(K);
    const auto causes = rank_causes(deltas, schema, top);

    const auto positives = static_cast<std::size_t>(
        std::count_if(deltas.begin(), deltas.end(), [](double d) { return d > 0.0; }));
    ASSERT_EQ(causes.size(), std::min(positives, static_cast<std::size_t>(top)));
    double shares = 0.0;
    for (std::size_t i = 0; i < causes.size(); ++i) {
      ASSERT_GT(causes[i].delta_fc, 0.0);
      shares += causes[i].share;
      if (i > 0) {
        const auto& prev = causes[i - 1];
        ASSERT_TRUE(prev.delta_fc > causes[i].delta_fc ||
                    (prev.delta_fc == causes[i].delta_fc && prev.feature < causes[i].feature));
      }
    }
    if (causes.empty()) continue;
    ASSERT_NEAR(shares, 1.0, 1e-12);
    // Nothing left out is larger than what was kept.
    for (std::size_t k = 0; k < K; ++k) {
      const bool listed = std::any_of(causes.begin(), causes.end(), [&](const auto& r) {
        return r.feature == schema[k].name;
      });
      if (!listed) {
        ASSERT_LE(deltas[k], causes.back().delta_fc);
      }
    }
  }
}

int rank_of(ConfidenceLevel l) {
  switch (l) {
    case ConfidenceLevel::kHigh: return 2;
    case ConfidenceLevel::kMedium: return 1;
    case ConfidenceLevel::kLow: return 0;
  }
  return -1;
}

TEST(Property, SmallerErrorNeverDemotesConfidence) {
  Gen g(707);
  const ConfidenceParams params;
  for (int c = 0; c < 200; ++c) {
    const int J = g.integer(1, 40);
    auto leaves = g.vector(static_cast<std::size_t>(J), 50.0, 150.0);
    const auto model = testing::constant_forest(leaves, 1);
    const std::vector<double> x = {0.0};
    const double pred = predict(model, x);
    // Interval membership depends only on the model and x, so moving the
    // actual runtime changes the error alone.
    const double far = pred * g.uniform(1.0, 4.0);
    const double near = pred + (far - pred) * g.uniform(0.0, 1.0);
    const auto a = confidence(model, x, far, params);
    const auto b = confidence(model, x, near, params);
    ASSERT_LE(b.error_rate, a.error_rate + 1e-15);
    ASSERT_GE(rank_of(b.level), rank_of(a.level)) << "case " << c;
    ASSERT_NEAR(a.error_rate, std::abs(far - pred) / far, 1e-15);
  }
}

TEST(Property, AnalyzedJobsCloseAgainstTheirBaseline) {
  SynthConfig cfg;
  cfg.num_templates = 4;
  cfg.jobs_per_template = 80;
  cfg.seed = 9;
  const auto data = generate(default_schema(), cfg);
  Hyperparams hp;
  hp.num_trees = 20;
  hp.seed = 3;
  const auto p = train_pipeline(data.dataset, hp);
  for (const auto& rec : data.dataset.records) {
    const auto r = analyze(rec, p);
    const double sum = std::accumulate(r.raw_deltas.begin(), r.raw_deltas.end(), 0.0);
    ASSERT_NEAR(sum, r.predicted_runtime - r.predicted_baseline,
                relative_tolerance(std::max(r.predicted_runtime, r.predicted_baseline), 1e-9))
        << rec.job_id;
    for (const auto& cause : r.causes) ASSERT_GT(cause.delta_fc, 0.0);
  }
}

TEST(Property, EncodingRoundTripsAndImputationIsIdempotent) {
  Gen g(808);
  for (int c = 0; c < 10; ++c) {
    SynthConfig cfg;
    cfg.num_templates = g.integer(1, 4);
    cfg.jobs_per_template = g.integer(5, 40);
    cfg.seed = static_cast<std::uint64_t>(g.integer(0, 1000));
    auto data = generate(default_schema(), cfg).dataset;
    for (auto& rec : data.records) {
      for (auto& v : rec.feature_values) {
        if (g.integer(0, 9) == 0) v.reset();
      }
    }
    const auto first = impute_and_encode(data);

    // Fill every missing cell with the value it was imputed to.
    Dataset filled = data;
    for (std::size_t r = 0; r < filled.records.size(); ++r) {
      auto& rec = filled.records[r];
      for (std::size_t k = 0; k < rec.feature_values.size(); ++k) {
        if (rec.feature_values[k]) continue;
        const double v = first.X(r, k);
        if (data.schema[k].kind == FeatureKind::kNumeric) {
          rec.feature_values[k] = FeatureValue(v);
        } else {
          rec.feature_values[k] = FeatureValue(*first.encoding.decode(k, v));
        }
      }
    }
    const auto second = impute_and_encode(filled);
    ASSERT_EQ(first.X.rows(), second.X.rows());
    for (std::size_t r = 0; r < first.X.rows(); ++r) {
      for (std::size_t k = 0; k < first.X.cols(); ++k) {
        ASSERT_EQ(first.X(r, k), second.X(r, k)) << r << "," << k;
      }
    }
    // Encoding a record reproduces its training row.
    for (std::size_t r = 0; r < data.records.size(); r += 7) {
      const auto x = first.encoding.encode(data.schema, data.records[r]);
      for (std::size_t k = 0; k < x.size(); ++k) ASSERT_EQ(x[k], first.X(r, k));
    }
    const auto reloaded = encoding_from_json(to_json(first.encoding));
    for (std::size_t r = 0; r < data.records.size(); r += 5) {
      ASSERT_EQ(reloaded.encode(data.schema, data.records[r]),
                first.encoding.encode(data.schema, data.records[r]));
    }
  }
}

TEST(Property, CorrelationFilterKeepsIncreasingIndices) {
  Gen g(909);
  for (int c = 0; c < kCases; ++c) {
    const auto K = static_cast<std::size_t>(g.integer(1, 10));
    auto X = g.matrix(60, K);
    // Plant near copies of random columns.
    for (std::size_t k = 1; k < K; ++k) {
      if (g.integer(0, 2) == 0) {
        const auto src = static_cast<std::size_t>(g.integer(0, static_cast<int>(k) - 1));
        for (std::size_t r = 0; r < X.rows(); ++r) {
          X(r, k) = 2.0 * X(r, src) + g.uniform(-0.01, 0.01);
        }
      }
    }
    const auto schema = numeric_schema(K);
    const double threshold = g.uniform(0.5, 0.99);
    const auto res = filter_correlated(X, schema, threshold);
    ASSERT_FALSE(res.kept.empty());
    ASSERT_EQ(res.kept.front(), 0u);
    ASSERT_TRUE(std::adjacent_find(res.kept.begin(), res.kept.end(),
                                   std::greater_equal<>()) == res.kept.end());
    ASSERT_EQ(res.kept.size() + res.removed.size(), K);
    ASSERT_EQ(res.reduced.cols(), res.kept.size());
    for (const auto& pair : res.removed) ASSERT_GT(std::abs(pair.correlation), threshold);
    // Kept columns are pairwise below the threshold.
    for (std::size_t i = 0; i < res.kept.size(); ++i) {
      for (std::size_t j = i + 1; j < res.kept.size(); ++j) {
        ASSERT_LE(std::abs(pearson_correlation(X.column(res.kept[i]),
                                               X.column(res.kept[j]))),
                  threshold);
      }
    }
  }
}

TEST(Property, FilterAtOneIsIdentityWithoutExactCollinearity) {
  Gen g(1010);
  for (int c = 0; c < kCases; ++c) {
    const auto K = static_cast<std::size_t>(g.integer(1, 10));
    const auto X = g.matrix(50, K);
    const auto res = filter_correlated(X, numeric_schema(K), 1.0);
    std::vector<std::size_t> all(K);
    std::iota(all.begin(), all.end(), 0);
    ASSERT_EQ(res.kept, all);
    ASSERT_TRUE(res.removed.empty());
    for (std::size_t r = 0; r < X.rows(); ++r) {
      for (std::size_t k = 0; k < K; ++k) ASSERT_EQ(res.reduced(r, k), X(r, k));
    }
  }
}

TEST(Property, TrainingIsDeterministicAcrossThreadCounts) {
  Gen g(1111);
  for (int c = 0; c < 8; ++c) {
    const auto K = static_cast<std::size_t>(g.integer(1, 6));
    const auto X = g.matrix(80, K);
    const auto y = g.target(X);
    const auto hp = g.hyperparams(K, 12);
    TrainOptions one;
    one.threads = 1;
    TrainOptions four;
    four.threads = 4;
    auto a = train_forest(X, y, hp, one);
    auto b = train_forest(X, y, hp, four);
    a.trained_at = b.trained_at = 0;
    ASSERT_EQ(a, b);
  }
}

TEST(Property, ModelJsonRoundTripIsExact) {
  Gen g(1212);
  for (int c = 0; c < 10; ++c) {
    const auto model = g.forest(10, 6);
    const auto back = forest_from_json(to_json(model));
    ASSERT_EQ(back, model);
    for (int i = 0; i < 20; ++i) {
      const auto x = g.vector(model.num_features, -12.0, 12.0);
      ASSERT_EQ(predict(back, x), predict(model, x));
    }
  }
}

TEST(Property, RunIdAddressesContent) {
  testing::TempDir dir;
  SynthConfig cfg;
  cfg.num_templates = 2;
  cfg.jobs_per_template = 30;
  const auto data = generate(default_schema(), cfg);
  std::vector<std::string> ids;
  for (std::uint64_t seed : {1u, 2u, 1u}) {
    Hyperparams hp;
    hp.num_trees = 5;
    hp.seed = seed;
    auto p = train_pipeline(data.dataset, hp);
    p.model.trained_at = 0;
    const auto run = save_run(dir.path(), p, {});
    const auto expected =
        sha256_hex(model_artifact(p) + baselines_artifact(p) + to_json(p.model.hyperparams).dump())
            .substr(0, 16);
    ASSERT_EQ(run.run_id, expected);
    ids.push_back(run.run_id);
  }
  EXPECT_NE(ids[0], ids[1]);
  EXPECT_EQ(ids[0], ids[2]);
  EXPECT_EQ(list_runs(dir.path()).size(), 2u);
}

TEST(Property, BaselineBandLiesInsidePercentiles) {
  Gen g(1313);
  for (int c = 0; c < 200; ++c) {
    const auto n = static_cast<std::size_t>(g.integer(1, 60));
    std::vector<double> runtimes(n);
    for (auto& v : runtimes) v = g.coin() ? g.uniform(1.0, 100.0) : g.integer(1, 5);
    const auto band = baseline_band(runtimes);
    ASSERT_FALSE(band.empty());
    ASSERT_TRUE(std::is_sorted(band.begin(), band.end()));
    if (n < 10) {
      ASSERT_EQ(band.size(), n);
      continue;
    }
    auto sorted = runtimes;
    std::sort(sorted.begin(), sorted.end());
    // Nearest-rank percentiles computed with integer arithmetic.
    auto pct = [&](std::size_t p) {
      std::size_t rank = (p * n + 99) / 100;
      rank = std::clamp<std::size_t>(rank, 1, n);
      return sorted[rank - 1];
    };
    const double lo = pct(45);
    const double hi = pct(55);
    for (std::size_t i : band) {
      ASSERT_GE(runtimes[i], lo);
      ASSERT_LE(runtimes[i], hi);
    }
    const auto inside = static_cast<std::size_t>(std::count_if(
        runtimes.begin(), runtimes.end(), [&](double v) { return v >= lo && v <= hi; }));
    ASSERT_EQ(band.size(), inside);
  }
}

}  // namespace
}  // namespace slowdown
