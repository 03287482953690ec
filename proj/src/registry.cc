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


#include "slowdown/registry.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include "slowdown/error.h"
#include "slowdown/hashing.h"
#include "text_util.h"

namespace slowdown {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModelFile = "model.json";
constexpr const char* kBaselinesFile = "baselines.json";
constexpr const char* kManifestFile = "manifest.json";
constexpr std::size_t kRunIdLength = 16;

[[noreturn]] void storage_error(const std::string& what) {
  throw Error(ErrorCode::kStorageError, what + ": " + std::strerror(errno));
}

class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) storage_error("cannot open " + path.string());
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        storage_error("cannot lock " + path.string());
      }
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

void write_synced(const fs::path& path, const std::string& bytes, int flags) {
  const int fd = ::open(path.c_str(), flags | O_WRONLY | O_CLOEXEC, 0644);
  if (fd < 0) storage_error("cannot open " + path.string());
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      storage_error("cannot write " + path.string());
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    storage_error("cannot sync " + path.string());
  }
  ::close(fd);
}

void sync_directory(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

std::int64_t now_micros() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::vector<ModelRun> read_index(const fs::path& root) {
  std::vector<ModelRun> runs;
  std::ifstream in(root / "index.jsonl");
  if (!in) return runs;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      runs.push_back(model_run_from_json(json::parse(line)));
    } catch (const json::exception&) {
      // A torn final line from a crashed writer is ignored.
    }
  }
  return runs;
}

}  // namespace

json to_json(const ModelRun& run) {
  return {{"run_id", run.run_id},
          {"created_at", run.created_at},
          {"hyperparams", to_json(run.hyperparams)},
          {"metrics", run.metrics},
          {"artifact_path", run.artifact_path},
          {"schema_version", run.schema_version},
          {"schema_fingerprint", run.schema_fingerprint},
          {"files", run.file_hashes}};
}

ModelRun model_run_from_json(const json& doc) {
  ModelRun run;
  run.run_id = doc.at("run_id").get<std::string>();
  run.created_at = doc.at("created_at").get<std::int64_t>();
  run.hyperparams = hyperparams_from_json(doc.at("hyperparams"));
  run.metrics = doc.at("metrics").get<std::map<std::string, double>>();
  run.artifact_path = doc.at("artifact_path").get<std::string>();
  run.schema_version = doc.at("schema_version").get<std::string>();
  run.schema_fingerprint = doc.value("schema_fingerprint", "");
  run.file_hashes = doc.at("files").get<std::map<std::string, std::string>>();
  return run;
}

std::string model_artifact(const TrainedPipeline& p) {
  json removed = json::array();
  for (const auto& r : p.removed_features) {
    removed.push_back({{"kept", p.schema[r.kept].name},
                       {"removed", p.schema[r.removed].name},
                       {"correlation", r.correlation}});
  }
  const json doc = {{"schema", to_json(p.schema)},
                    {"encoding", to_json(p.encoding)},
                    {"removed_features", std::move(removed)},
                    {"forest", to_json(p.model)}};
  return doc.dump() + "\n";
}

std::string baselines_artifact(const TrainedPipeline& p) {
  return to_json(p.baselines, p.schema).dump() + "\n";
}

TrainedPipeline pipeline_from_artifacts(const std::string& model_json,
                                        const std::string& baselines_json) {
  try {
    const json model = json::parse(model_json);
    TrainedPipeline p;
    p.schema = schema_from_json(model.at("schema"));
    p.encoding = encoding_from_json(model.at("encoding"));
    p.model = forest_from_json(model.at("forest"));
    for (const auto& r : model.value("removed_features", json::array())) {
      auto kept = p.schema.index_of(r.at("kept").get<std::string>());
      auto removed = p.schema.index_of(r.at("removed").get<std::string>());
      if (!kept || !removed) throw Error(ErrorCode::kCorruptArtifact, "bad removed feature");
      p.removed_features.push_back({*kept, *removed, r.at("correlation").get<double>()});
    }
    p.baselines = baseline_store_from_json(json::parse(baselines_json), p.schema);
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptArtifact, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptArtifact) throw;
    throw Error(ErrorCode::kCorruptArtifact, e.what());
  }
}

ModelRun save_run(const fs::path& root, const TrainedPipeline& pipeline,
                  const std::map<std::string, double>& metrics) {
  const std::string model_bytes = model_artifact(pipeline);
  const std::string baseline_bytes = baselines_artifact(pipeline);
  const std::string config_bytes = to_json(pipeline.model.hyperparams).dump();
  const std::string run_id =
      sha256_hex(model_bytes + baseline_bytes + config_bytes).substr(0, kRunIdLength);

  std::error_code ec;
  fs::create_directories(root / "runs", ec);
  if (ec) throw Error(ErrorCode::kStorageError, "cannot create " + root.string());

  FileLock lock(root / "index.lock");
  for (const auto& run : read_index(root)) {
    if (run.run_id == run_id) return run;
  }

  ModelRun run;
  run.run_id = run_id;
  run.created_at = now_micros();
  run.hyperparams = pipeline.model.hyperparams;
  run.metrics = metrics;
  run.artifact_path = "runs/" + run_id;
  run.schema_version = pipeline.schema.version();
  run.schema_fingerprint = pipeline.schema.fingerprint();
  run.file_hashes = {{kModelFile, sha256_hex(model_bytes)},
                     {kBaselinesFile, sha256_hex(baseline_bytes)}};
  // Keep created_at strictly increasing so "latest" is unambiguous.
  for (const auto& other : read_index(root)) {
    run.created_at = std::max(run.created_at, other.created_at + 1);
  }
  const std::string manifest = to_json(run).dump(2) + "\n";

  const fs::path final_dir = root / run.artifact_path;
  if (!fs::exists(final_dir)) {
    const fs::path tmp = root / "runs" / (".tmp-" + run_id + "-" + std::to_string(::getpid()));
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp, ec);
    if (ec) throw Error(ErrorCode::kStorageError, "cannot create " + tmp.string());
    write_synced(tmp / kModelFile, model_bytes, O_CREAT | O_TRUNC);
    write_synced(tmp / kBaselinesFile, baseline_bytes, O_CREAT | O_TRUNC);
    write_synced(tmp / kManifestFile, manifest, O_CREAT | O_TRUNC);
    sync_directory(tmp);
    fs::rename(tmp, final_dir, ec);
    if (ec) throw Error(ErrorCode::kStorageError, "cannot publish " + final_dir.string());
    sync_directory(root / "runs");
  } else {
    // A writer crashed between publishing the directory and indexing it.
    if (sha256_hex(read_text_file(final_dir / kModelFile)) != run.file_hashes[kModelFile] ||
        sha256_hex(read_text_file(final_dir / kBaselinesFile)) !=
            run.file_hashes[kBaselinesFile]) {
      throw Error(ErrorCode::kCorruptArtifact, "stale run directory " + final_dir.string());
    }
    run = model_run_from_json(parse_json_file(final_dir / kManifestFile));
  }
  write_synced(root / "index.jsonl", to_json(run).dump() + "\n", O_CREAT | O_APPEND);
  return run;
}

std::vector<ModelRun> list_runs(const fs::path& root) {
  auto runs = read_index(root);
  std::reverse(runs.begin(), runs.end());
  std::stable_sort(runs.begin(), runs.end(), [](const ModelRun& a, const ModelRun& b) {
    return a.created_at > b.created_at;
  });
  return runs;
}

LoadedRun load_model(const fs::path& root, const std::string& run_id) {
  const auto runs = list_runs(root);
  const ModelRun* found = nullptr;
  if (run_id == "latest") {
    if (!runs.empty()) found = &runs.front();
  } else {
    for (const auto& r : runs) {
      if (r.run_id == run_id) {
        found = &r;
        break;
      }
    }
  }
  if (found == nullptr) {
    throw Error(ErrorCode::kUnknownRun,
                run_id == "latest" ? "no model runs found" : "unknown run " + run_id);
  }
  const fs::path dir = root / found->artifact_path;
  std::map<std::string, std::string> bytes;
  for (const auto& [name, hash] : found->file_hashes) {
    std::string content;
    try {
      content = read_text_file(dir / name);
    } catch (const Error&) {
      throw Error(ErrorCode::kCorruptArtifact, "missing artifact " + (dir / name).string());
    }
    if (sha256_hex(content) != hash) {
      throw Error(ErrorCode::kCorruptArtifact, "hash mismatch for " + (dir / name).string());
    }
    bytes[name] = std::move(content);
  }
  if (!bytes.count(kModelFile) || !bytes.count(kBaselinesFile)) {
    throw Error(ErrorCode::kCorruptArtifact, "manifest lists no model artifacts");
  }
  try {
    if (model_run_from_json(parse_json_file(dir / kManifestFile)) != *found) {
      throw Error(ErrorCode::kCorruptArtifact, "manifest differs from the index");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptArtifact, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptArtifact) throw;
    throw Error(ErrorCode::kCorruptArtifact, e.what());
  }
  LoadedRun out;
  out.pipeline = pipeline_from_artifacts(bytes[kModelFile], bytes[kBaselinesFile]);
  out.run = *found;
  return out;
}

}  // namespace slowdown
