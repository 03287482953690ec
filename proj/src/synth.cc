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


#include "slowdown/synth.h"

#include <cmath>
#include <cstdio>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "slowdown/error.h"
#include "text_util.h"

namespace slowdown {

using nlohmann::json;

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); };
  if (num_templates < 1) fail("num_templates must be >= 1");
  if (jobs_per_template < 1) fail("jobs_per_template must be >= 1");
  if (!(slow_fraction >= 0.0 && slow_fraction < 1.0)) {
    fail("slow_fraction must lie in [0, 1)");
  }
  if (!(injection_factor >= 1.0) || !std::isfinite(injection_factor)) {
    fail("injection_factor must be >= 1");
  }
  if (!(noise_cv >= 0.0) || !std::isfinite(noise_cv)) fail("noise_cv must be >= 0");
  if (!(feature_spread >= 0.0) || !std::isfinite(feature_spread)) {
    fail("feature_spread must be >= 0");
  }
}

json to_json(const SynthConfig& c) {
  return {{"num_templates", c.num_templates},
          {"jobs_per_template", c.jobs_per_template},
          {"slow_fraction", c.slow_fraction},
          {"injection_factor", c.injection_factor},
          {"noise_cv", c.noise_cv},
          {"seed", c.seed},
          {"nonlinear_skew", c.nonlinear_skew},
          {"feature_spread", c.feature_spread},
          {"start_time", c.start_time}};
}

SynthConfig synth_config_from_json(const json& doc) {
  SynthConfig c;
  try {
    c.num_templates = doc.value("num_templates", c.num_templates);
    c.jobs_per_template = doc.value("jobs_per_template", c.jobs_per_template);
    c.slow_fraction = doc.value("slow_fraction", c.slow_fraction);
    c.injection_factor = doc.value("injection_factor", c.injection_factor);
    c.noise_cv = doc.value("noise_cv", c.noise_cv);
    c.seed = doc.value("seed", c.seed);
    c.nonlinear_skew = doc.value("nonlinear_skew", c.nonlinear_skew);
    c.feature_spread = doc.value("feature_spread", c.feature_spread);
    c.start_time = doc.value("start_time", c.start_time);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  return c;
}

json to_json(const GroundTruth& truth) { return {{"injected", truth.injected}}; }

GroundTruth ground_truth_from_json(const json& doc) {
  GroundTruth t;
  t.injected = doc.at("injected").get<std::map<std::string, std::string>>();
  return t;
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  write_text_file(path, to_json(truth).dump(2) + "\n");
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  return ground_truth_from_json(parse_json_file(path));
}

const std::vector<std::string>& causal_features() {
  static const std::vector<std::string> kCausal = {
      "input_size", "data_written", "cross_rack_read",
      "data_skew",  "time_skew",    "revoked_vertices"};
  return kCausal;
}

std::string synth_template_id(int template_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tmpl-%03d", template_index);
  return buf;
}

std::string synth_job_id(int template_index, int job_index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "t%03d-j%05d", template_index, job_index);
  return buf;
}

namespace {

// Affine response weights: a feature at s times its nominal level scales the
// runtime by (1 - w + w s).
const std::vector<std::pair<std::string, double>>& affine_weights() {
  static const std::vector<std::pair<std::string, double>> kWeights = {
      {"input_size", 0.6},
      {"data_written", 0.25},
      {"cross_rack_read", 0.2},
      {"revoked_vertices", 0.15}};
  return kWeights;
}

constexpr double kSkewWeight = 0.25;
constexpr int kEnvironmentVersions = 4;

class Rng {
 public:
  Rng(std::uint64_t seed, int stream)
      : engine_(seed_seq(seed, stream)) {}

  double uniform(double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(engine_);
  }
  double log_uniform(double a, double b) {
    return std::exp(uniform(std::log(a), std::log(b)));
  }
  int integer(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }

 private:
  static std::mt19937_64 seed_seq(std::uint64_t seed, int stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x5eedu};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct Nominal {
  double mu = 0.0;
  std::unordered_map<std::string, double> numeric;
  std::unordered_map<std::string, std::string> categorical;
};

Nominal draw_nominal(Rng& rng, int t) {
  Nominal n;
  n.mu = rng.log_uniform(60.0, 21600.0);
  auto& v = n.numeric;
  // Byte volumes scale with the template's base runtime so that templates of
  // different sizes are separable by their features.
  v["input_size"] = n.mu * rng.log_uniform(2e7, 5e7);
  v["data_written"] = n.mu * rng.log_uniform(1e6, 1e8);
  v["cross_rack_read"] = n.mu * rng.log_uniform(1e5, 1e7);
  v["task_count"] = n.mu * rng.log_uniform(0.05, 0.5);
  v["stage_count"] = rng.log_uniform(2, 60);
  v["priority"] = rng.integer(1, 5);
  v["data_skew"] = rng.uniform(1.1, 2.0);
  v["time_skew"] = rng.uniform(1.1, 2.0);
  v["queueing_time"] = rng.log_uniform(5, 600);
  v["failed_vertices"] = v["task_count"] * rng.log_uniform(0.001, 0.02);
  v["revoked_vertices"] = v["task_count"] * rng.log_uniform(0.002, 0.05);
  v["usable_machine_count"] = rng.log_uniform(100, 5000);
  v["compute_hours"] = n.mu * rng.log_uniform(0.005, 0.05);
  n.categorical["environment_version"] =
      "env-" + std::to_string(rng.integer(0, kEnvironmentVersions - 1));
  char user[32];
  std::snprintf(user, sizeof(user), "user-%03d", t);
  n.categorical["user_id"] = user;
  return n;
}

// Numeric features held at their nominal level for every job.
bool is_fixed(const std::string& name) { return name == "priority"; }

}  // namespace

SynthOutput generate(const FeatureSchema& schema, const SynthConfig& config) {
  config.validate();
  for (const auto& name : causal_features()) {
    auto k = schema.index_of(name);
    if (!k || schema[*k].kind != FeatureKind::kNumeric) {
      throw Error(ErrorCode::kInvalidConfig,
                  "schema needs numeric feature " + name + " for synthesis");
    }
  }

  const double sigma2 = std::log1p(config.noise_cv * config.noise_cv);
  const double sigma = std::sqrt(sigma2);
  const auto& causal = causal_features();

  SynthOutput out;
  out.dataset.schema = schema;
  out.dataset.records.reserve(static_cast<std::size_t>(config.num_templates) *
                              static_cast<std::size_t>(config.jobs_per_template));

  for (int t = 0; t < config.num_templates; ++t) {
    Rng rng(config.seed, t);
    const Nominal nominal = draw_nominal(rng, t);
    const std::string template_id = synth_template_id(t);

    for (int j = 0; j < config.jobs_per_template; ++j) {
      std::unordered_map<std::string, double> values;
      // Fixed draw order keeps the stream independent of the schema.
      for (const char* name :
           {"input_size", "data_written", "cross_rack_read", "task_count", "stage_count",
            "priority", "data_skew", "time_skew", "queueing_time", "failed_vertices",
            "revoked_vertices", "usable_machine_count", "compute_hours"}) {
        const double z = rng.normal();
        const double level = nominal.numeric.at(name);
        values[name] = is_fixed(name) ? level : level * std::exp(config.feature_spread * z);
      }

      const bool slow = rng.uniform(0.0, 1.0) < config.slow_fraction;
      const int pick = rng.integer(0, static_cast<int>(causal.size()) - 1);
      const double noise_z = rng.normal();
      std::string cause;
      if (slow) {
        cause = causal[static_cast<std::size_t>(pick)];
        values[cause] *= config.injection_factor;
      }

      double runtime = nominal.mu;
      for (const auto& [name, w] : affine_weights()) {
        const double s = values[name] / nominal.numeric.at(name);
        runtime *= (1.0 - w) + w * s;
      }
      for (const char* name : {"data_skew", "time_skew"}) {
        const double s = values[name] / nominal.numeric.at(name);
        runtime *= config.nonlinear_skew ? 1.0 + kSkewWeight * (s * s - 1.0)
                                         : 1.0 + kSkewWeight * (s - 1.0);
      }
      runtime *= std::exp(-0.5 * sigma2 + sigma * noise_z);

      JobRecord rec;
      rec.job_id = synth_job_id(t, j);
      rec.template_id = template_id;
      rec.submitted_at = config.start_time + static_cast<std::int64_t>(j) * 3600 + t;
      rec.runtime_seconds = runtime;
      rec.feature_values.resize(schema.size());
      for (std::size_t k = 0; k < schema.size(); ++k) {
        const auto& spec = schema[k];
        if (auto it = values.find(spec.name); it != values.end()) {
          if (spec.kind == FeatureKind::kNumeric) {
            rec.feature_values[k] = FeatureValue(it->second);
          } else {
            rec.feature_values[k] = FeatureValue(format_double(it->second));
          }
        } else if (auto c = nominal.categorical.find(spec.name);
                   c != nominal.categorical.end()) {
          rec.feature_values[k] = FeatureValue(c->second);
        }
      }
      if (slow) out.truth.injected.emplace(rec.job_id, cause);
      out.dataset.records.push_back(std::move(rec));
    }
  }
  return out;
}

double recovery_rate(const std::vector<SlowdownReport>& reports,
                     const GroundTruth& truth, int k) {
  if (truth.injected.empty()) return 1.0;
  std::unordered_map<std::string, const SlowdownReport*> by_job;
  for (const auto& r : reports) by_job.emplace(r.job_id, &r);
  std::size_t hits = 0;
  for (const auto& [job_id, feature] : truth.injected) {
    auto it = by_job.find(job_id);
    if (it == by_job.end()) throw Error(ErrorCode::kMissingReport, job_id);
    const auto& causes = it->second->causes;
    const std::size_t limit = std::min(causes.size(), static_cast<std::size_t>(std::max(k, 0)));
    for (std::size_t i = 0; i < limit; ++i) {
      if (causes[i].feature == feature) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.injected.size());
}

}  // namespace slowdown
