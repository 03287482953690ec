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

#include <thread>

#include "httplib.h"
#include "slowdown/service.h"
#include "slowdown/synth.h"
#include "test_support.h"

namespace slowdown {
namespace {

using nlohmann::json;
using testing::TempDir;

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    SynthConfig c;
    c.num_templates = 3;
    c.jobs_per_template = 80;
    c.seed = 4;
    auto data = generate(default_schema(), c);
    data_ = new SynthOutput(std::move(data));
    Hyperparams hp;
    hp.num_trees = 12;
    const auto pipeline = train_pipeline(data_->dataset, hp);
    run_ = new ModelRun(save_run(dir_->path(), pipeline, {{"training_mare", 0.0}}));
    save_dataset(*dir_ / "telemetry.csv", data_->dataset);
  }
  static void TearDownTestSuite() {
    delete run_;
    delete data_;
    delete dir_;
  }

  static ServiceConfig config() {
    ServiceConfig cfg;
    cfg.registry_root = dir_->path();
    cfg.telemetry_lookup = *dir_ / "telemetry.csv";
    cfg.bind_address = "127.0.0.1:0";
    return cfg;
  }

  static TempDir* dir_;
  static SynthOutput* data_;
  static ModelRun* run_;
};

TempDir* ServiceTest::dir_ = nullptr;
SynthOutput* ServiceTest::data_ = nullptr;
ModelRun* ServiceTest::run_ = nullptr;

TEST(BindAddress, Parsing) {
  const auto hp = parse_bind_address("127.0.0.1:8080");
  EXPECT_EQ(hp.host, "127.0.0.1");
  EXPECT_EQ(hp.port, 8080);
  EXPECT_EQ(parse_bind_address("0.0.0.0:0").port, 0);
  EXPECT_SLOWDOWN_ERROR(kInvalidArgument, parse_bind_address("localhost"));
  EXPECT_SLOWDOWN_ERROR(kInvalidArgument, parse_bind_address("h:70000"));
  EXPECT_SLOWDOWN_ERROR(kInvalidArgument, parse_bind_address(":80"));
  EXPECT_STREQ(kDefaultBind, "127.0.0.1:8080");
}

TEST_F(ServiceTest, HealthNamesTheRun) {
  const ScoringService svc(config());
  const auto r = svc.health();
  EXPECT_EQ(r.status, 200);
  const auto body = json::parse(r.body);
  EXPECT_EQ(body["status"], "ok");
  EXPECT_EQ(body["run_id"], run_->run_id);
  EXPECT_TRUE(body.contains("model_trained_at"));
}

TEST_F(ServiceTest, RunsListsManifests) {
  const ScoringService svc(config());
  const auto body = json::parse(svc.runs().body);
  ASSERT_EQ(body.size(), 1u);
  EXPECT_EQ(body[0]["run_id"], run_->run_id);
}

TEST_F(ServiceTest, ScoreByJobId) {
  const ScoringService svc(config());
  const auto& [job, feature] = *data_->truth.injected.begin();
  const auto r = svc.score(json{{"job_id", job}}.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const auto body = json::parse(r.body);
  EXPECT_EQ(body["job_id"], job);
  EXPECT_TRUE(body.contains("causes"));
  EXPECT_EQ(body["raw_deltas"].size(), default_schema().size());
}

TEST_F(ServiceTest, ScoreByBaselineFeaturesHasNoCauses) {
  const ScoringService svc(config());
  const auto loaded = load_model(dir_->path(), "latest");
  const auto& schema = loaded.pipeline.schema;
  const auto& [tid, base] = *loaded.pipeline.baselines.baselines.begin();
  json features = json::object();
  for (std::size_t k = 0; k < schema.size(); ++k) {
    if (schema[k].kind == FeatureKind::kCategorical) {
      features[schema[k].name] = *loaded.pipeline.encoding.decode(k, base.baseline_features[k]);
    } else {
      features[schema[k].name] = base.baseline_features[k];
    }
  }
  const auto r = svc.score(
      json{{"template_id", tid}, {"features", features}, {"runtime_seconds", base.baseline_runtime}}
          .dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const auto body = json::parse(r.body);
  EXPECT_TRUE(body["causes"].empty());
  EXPECT_EQ(body["fallback"], false);
}

TEST_F(ServiceTest, ErrorStatuses) {
  const ScoringService svc(config());
  EXPECT_EQ(svc.score("{not json").status, 400);
  EXPECT_EQ(svc.score("[1,2]").status, 400);
  EXPECT_EQ(svc.score("{}").status, 400);
  EXPECT_EQ(svc.score(R"({"job_id": 5})").status, 400);
  EXPECT_EQ(svc.score(R"({"template_id":"t","features":{},"runtime_seconds":-1})").status, 400);
  const auto missing = svc.score(R"({"job_id":"no-such-job"})");
  EXPECT_EQ(missing.status, 404);
  EXPECT_EQ(json::parse(missing.body), json({{"error", "unknown_job"}}));
  const auto unknown = svc.score(
      R"({"template_id":"t","features":{"not_a_feature":1},"runtime_seconds":10})");
  EXPECT_EQ(unknown.status, 422);
  EXPECT_EQ(json::parse(unknown.body)["error"], "schema_mismatch");
  const auto wrong_type = svc.score(
      R"({"template_id":"t","features":{"input_size":"lots"},"runtime_seconds":10})");
  EXPECT_EQ(wrong_type.status, 422);
}

TEST_F(ServiceTest, WithoutLookupEveryIdIsUnknown) {
  auto cfg = config();
  cfg.telemetry_lookup.reset();
  const ScoringService svc(cfg);
  EXPECT_EQ(svc.score(json{{"job_id", data_->dataset.records[0].job_id}}.dump()).status, 404);
}

TEST_F(ServiceTest, MissingRunFailsAtStartup) {
  auto cfg = config();
  cfg.run_id = "ffffffffffffffff";
  EXPECT_SLOWDOWN_ERROR(kUnknownRun, ScoringService svc(cfg));
}

TEST_F(ServiceTest, ConcurrentIdenticalRequestsOverHttp) {
  ScoringService svc(config());
  std::thread server([&] { svc.listen(); });
  ASSERT_TRUE(svc.wait_until_ready());
  const int port = svc.port();
  ASSERT_GT(port, 0);

  {
    httplib::Client client("127.0.0.1", port);
    auto health = client.Get("/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    auto runs = client.Get("/runs");
    ASSERT_TRUE(runs);
    EXPECT_EQ(runs->status, 200);
    auto bad = client.Post("/score", "nope", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    auto unknown = client.Post("/score", R"({"job_id":"x"})", "application/json");
    ASSERT_TRUE(unknown);
    EXPECT_EQ(unknown->status, 404);
  }

  const std::string request = json{{"job_id", data_->dataset.records[17].job_id}}.dump();
  constexpr int kRequests = 100;
  std::vector<int> statuses(kRequests, 0);
  std::vector<std::string> bodies(kRequests);
  std::vector<std::thread> clients;
  for (int i = 0; i < kRequests; ++i) {
    clients.emplace_back([&, i] {
      httplib::Client client("127.0.0.1", port);
      client.set_read_timeout(30, 0);
      if (auto res = client.Post("/score", request, "application/json")) {
        statuses[static_cast<std::size_t>(i)] = res->status;
        bodies[static_cast<std::size_t>(i)] = res->body;
      }
    });
  }
  for (auto& t : clients) t.join();
  svc.stop();
  server.join();

  const std::string expected = svc.score(request).body;
  for (int i = 0; i < kRequests; ++i) {
    EXPECT_EQ(statuses[static_cast<std::size_t>(i)], 200) << i;
    EXPECT_EQ(bodies[static_cast<std::size_t>(i)], expected) << i;
  }
}

}  // namespace
}  // namespace slowdown
