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


// HTTP scoring endpoint over a registered pipeline.
//
//   GET  /health  -> {"status":"ok","run_id","model_trained_at"}
//   GET  /runs    -> registry manifests, newest first
//   POST /score   -> slowdown report for {"job_id"} or
//                    {"template_id","features":{name:value},"runtime_seconds"}

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "slowdown/reasoner.h"
#include "slowdown/registry.h"
#include "slowdown/telemetry.h"

namespace slowdown {

inline constexpr const char* kDefaultBind = "127.0.0.1:8080";
inline constexpr const char* kBindEnvVar = "SLOWDOWN_BIND";

struct ServiceConfig {
  std::filesystem::path registry_root;
  std::string run_id = "latest";
  std::string bind_address = kDefaultBind;  // host:port
  std::optional<std::filesystem::path> telemetry_lookup;
  AnalyzeOptions analyze;
};

struct HostPort {
  std::string host;
  int port = 0;
};

// Throws kInvalidArgument on anything but host:port with a port in [0, 65535].
HostPort parse_bind_address(const std::string& address);

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

// Loads the run and lookup table once; handlers only read them.
class ScoringService {
 public:
  explicit ScoringService(const ServiceConfig& config);
  ~ScoringService();

  HttpResponse health() const;
  HttpResponse runs() const;
  HttpResponse score(const std::string& body) const;

  // Binds and serves until stop(). Returns false when binding fails. A port
  // of 0 picks a free one, readable through port() once bound.
  bool listen();
  void stop();
  int port() const { return bound_port_.load(); }
  // Blocks until the server accepts connections or listen() failed.
  bool wait_until_ready() const;

 private:
  struct Impl;
  ServiceConfig config_;
  LoadedRun loaded_;
  std::optional<Dataset> lookup_;
  std::unique_ptr<Impl> impl_;
  std::atomic<int> bound_port_{-1};
};

// Runs the service until SIGINT or SIGTERM; in-flight requests complete.
// Returns a process exit code.
int serve(const ServiceConfig& config);

}  // namespace slowdown
