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


#include "slowdown/service.h"

#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <iostream>
#include <thread>

// Bursts of simultaneous clients overflow httplib's default backlog of 5.
#define CPPHTTPLIB_LISTEN_BACKLOG 256
#include "httplib.h"
#include "slowdown/error.h"
#include "text_util.h"

namespace slowdown {

using nlohmann::json;

HostPort parse_bind_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorCode::kInvalidArgument, "bind address must be host:port, got " + address);
  }
  HostPort hp;
  hp.host = address.substr(0, colon);
  auto port = parse_int64(std::string_view(address).substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) {
    throw Error(ErrorCode::kInvalidArgument, "bad port in " + address);
  }
  hp.port = static_cast<int>(*port);
  return hp;
}

struct ScoringService::Impl {
  httplib::Server server;
  std::atomic<bool> failed{false};
};

namespace {

HttpResponse error_response(int status, const std::string& code, const std::string& detail) {
  json body = {{"error", code}};
  if (!detail.empty()) body["detail"] = detail;
  return {status, body.dump()};
}

}  // namespace

ScoringService::ScoringService(const ServiceConfig& config)
    : config_(config), impl_(std::make_unique<Impl>()) {
  config_.analyze.params.validate();
  loaded_ = load_model(config_.registry_root, config_.run_id);
  if (config_.telemetry_lookup) {
    lookup_ = load_dataset(*config_.telemetry_lookup, loaded_.pipeline.schema);
  }

  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, health());
  });
  impl_->server.Get("/runs", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, runs());
  });
  impl_->server.Post("/score", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, score(req.body));
  });
}

ScoringService::~ScoringService() { stop(); }

HttpResponse ScoringService::health() const {
  return {200, json{{"status", "ok"},
                    {"run_id", loaded_.run.run_id},
                    {"model_trained_at", loaded_.pipeline.model.trained_at}}
                   .dump()};
}

HttpResponse ScoringService::runs() const {
  json out = json::array();
  for (const auto& run : list_runs(config_.registry_root)) out.push_back(to_json(run));
  return {200, out.dump()};
}

HttpResponse ScoringService::score(const std::string& body) const {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "malformed_body", "body is not JSON");
  }
  if (!req.is_object()) return error_response(400, "malformed_body", "expected an object");

  const FeatureSchema& schema = loaded_.pipeline.schema;
  JobRecord job;
  if (req.contains("features")) {
    const auto& features = req["features"];
    if (!features.is_object()) {
      return error_response(400, "malformed_body", "features must be an object");
    }
    if (!req.contains("template_id") || !req["template_id"].is_string()) {
      return error_response(400, "malformed_body", "template_id must be a string");
    }
    if (!req.contains("runtime_seconds") || !req["runtime_seconds"].is_number()) {
      return error_response(400, "malformed_body", "runtime_seconds must be a number");
    }
    job.job_id = req.value("job_id", std::string("inline"));
    job.template_id = req["template_id"].get<std::string>();
    job.runtime_seconds = req["runtime_seconds"].get<double>();
    job.feature_values.resize(schema.size());
    for (const auto& [name, value] : features.items()) {
      auto k = schema.index_of(name);
      if (!k) return error_response(422, "schema_mismatch", "unknown feature " + name);
      if (value.is_number()) {
        job.feature_values[*k] = FeatureValue(value.get<double>());
      } else if (value.is_string()) {
        job.feature_values[*k] = FeatureValue(value.get<std::string>());
      } else if (!value.is_null()) {
        return error_response(422, "schema_mismatch", "unsupported value for " + name);
      }
    }
  } else if (req.contains("job_id")) {
    if (!req["job_id"].is_string()) {
      return error_response(400, "malformed_body", "job_id must be a string");
    }
    const auto id = req["job_id"].get<std::string>();
    const JobRecord* found = lookup_ ? lookup_->find_job(id) : nullptr;
    if (found == nullptr) return error_response(404, "unknown_job", "");
    job = *found;
  } else {
    return error_response(400, "malformed_body", "expected job_id or features");
  }

  if (!(job.runtime_seconds > 0.0)) {
    return error_response(400, "malformed_body", "runtime_seconds must be positive");
  }
  try {
    const auto report = analyze(job, loaded_.pipeline, config_.analyze);
    return {200, to_json(report, schema).dump()};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchemaMismatch) {
      return error_response(422, "schema_mismatch", e.what());
    }
    return error_response(500, "internal", e.what());
  }
}

bool ScoringService::listen() {
  const HostPort hp = parse_bind_address(config_.bind_address);
  int port = hp.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(hp.host);
    if (port < 0) {
      impl_->failed = true;
      return false;
    }
  } else if (!impl_->server.bind_to_port(hp.host, port)) {
    impl_->failed = true;
    return false;
  }
  bound_port_ = port;
  return impl_->server.listen_after_bind();
}

bool ScoringService::wait_until_ready() const {
  while (!impl_->failed && !impl_->server.is_running()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  return !impl_->failed;
}

void ScoringService::stop() {
  if (impl_) impl_->server.stop();
}

int serve(const ServiceConfig& config) {
  // Route termination signals to a dedicated waiter thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<ScoringService> service;
  try {
    service = std::make_unique<ScoringService>(config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kIoError || e.code() == ErrorCode::kUnknownRun ||
                   e.code() == ErrorCode::kCorruptArtifact ||
                   e.code() == ErrorCode::kMissingColumn ||
                   e.code() == ErrorCode::kMalformedRow
               ? 2
               : 3;
  }

  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    signalled = true;
    service->stop();
  });

  std::thread announcer([&] {
    if (service->wait_until_ready()) {
      std::cerr << "listening on " << parse_bind_address(config.bind_address).host << ":"
                << service->port() << "\n";
    }
  });
  const bool ok = service->listen();
  announcer.join();
  if (!signalled) {
    // The server stopped on its own; release the waiter.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    std::cerr << "error: cannot serve on " << config.bind_address << "\n";
    return 2;
  }
  waiter.join();
  std::cerr << "shut down cleanly\n";
  return ok ? 0 : 3;
}

}  // namespace slowdown
