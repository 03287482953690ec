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

// Job telemetry: the feature schema, CSV ingestion, numeric encoding with
// imputation, and the correlated-feature filter.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"

namespace slowdown {

enum class FeatureLevel { kJob, kMachine, kCluster };
enum class FeatureKind { kNumeric, kCategorical };

std::string_view to_string(FeatureLevel level);
std::string_view to_string(FeatureKind kind);

struct FeatureSpec {
  std::string name;
  FeatureLevel level = FeatureLevel::kJob;
  FeatureKind kind = FeatureKind::kNumeric;
  // One feature can explain a slowdown in several ways.
  std::vector<std::string> reasons;

  bool operator==(const FeatureSpec&) const = default;
};

// Ordered feature list. Index k of every feature vector refers to
// features()[k]; the order never changes after construction.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  // Throws kInvalidArgument on duplicate or empty names.
  FeatureSchema(std::vector<FeatureSpec> features, std::string version);

  const std::vector<FeatureSpec>& features() const { return features_; }
  const FeatureSpec& operator[](std::size_t k) const { return features_[k]; }
  std::size_t size() const { return features_.size(); }
  const std::string& version() const { return version_; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names() const;

  // Hex digest over the canonical JSON form.
  std::string fingerprint() const;

  bool operator==(const FeatureSchema& other) const {
    return features_ == other.features_ && version_ == other.version_;
  }

 private:
  std::vector<FeatureSpec> features_;
  std::string version_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Fifteen job-, machine- and cluster-level features with illustrative
// feature-to-reason text.
FeatureSchema default_schema();

nlohmann::json to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& doc);
FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const std::filesystem::path& path, const FeatureSchema& schema);

using FeatureValue = std::variant<double, std::string>;

struct JobRecord {
  std::string job_id;
  std::string template_id;
  std::int64_t submitted_at = 0;  // epoch seconds, UTC
  // Aligned to the schema; nullopt marks a missing cell.
  std::vector<std::optional<FeatureValue>> feature_values;
  double runtime_seconds = 0.0;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<JobRecord> records;

  // Sorted, unique.
  std::vector<std::string> template_ids() const;
  const JobRecord* find_job(std::string_view job_id) const;
};

inline constexpr std::string_view kJobIdColumn = "job_id";
inline constexpr std::string_view kTemplateIdColumn = "template_id";
inline constexpr std::string_view kSubmittedAtColumn = "submitted_at";
inline constexpr std::string_view kRuntimeColumn = "runtime_seconds";

Dataset read_dataset(std::istream& in, const FeatureSchema& schema);
Dataset load_dataset(const std::filesystem::path& path,
                     const FeatureSchema& schema);
void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

// Dense row-major matrix of reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::vector<double> column(std::size_t c) const;

  void append_row(std::span<const double> values);
  Matrix select_rows(std::span<const std::size_t> rows) const;
  Matrix select_columns(std::span<const std::size_t> cols) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Everything needed to turn raw feature values into the numeric vectors the
// forest was trained on.
class Encoding {
 public:
  // Code of `value` for categorical feature k; unseen values map to -1.
  double code_of(std::size_t k, std::string_view value) const;
  // Category string behind a code; nullopt for numeric features or unknown codes.
  std::optional<std::string> decode(std::size_t k, double code) const;

  // Encodes one record, imputing missing cells with the template fill when the
  // template is known and the global fill otherwise. Throws kSchemaMismatch on
  // a wrong-length record or a non-numeric value in a numeric column.
  std::vector<double> encode(const FeatureSchema& schema,
                             const JobRecord& record) const;

  // categories[k] lists category strings in code order; empty for numeric.
  std::vector<std::vector<std::string>> categories;
  // Global median (numeric) or modal code (categorical) per feature.
  std::vector<double> global_fill;
  // Per-template fill values; nullopt where a template never observed k.
  std::map<std::string, std::vector<std::optional<double>>> template_fill;
};

nlohmann::json to_json(const Encoding& encoding);
Encoding encoding_from_json(const nlohmann::json& doc);

// Numeric training table aligned with the source dataset's row order.
struct EncodedTable {
  Matrix X;
  std::vector<double> y;
  std::vector<std::string> template_ids;
  std::vector<std::string> job_ids;
  Encoding encoding;

  std::size_t rows() const { return y.size(); }
  // Row indices per template, templates in sorted order.
  std::map<std::string, std::vector<std::size_t>> rows_by_template() const;
};

// Missing numerics become the per-template median of the feature (global
// median when the template never observed it). Categoricals become first-seen
// integer codes; missing categoricals take the per-template modal code.
EncodedTable impute_and_encode(const Dataset& dataset);

// Pearson correlation; 0 when either column is constant.
double pearson_correlation(std::span<const double> a, std::span<const double> b);

struct RemovedPair {
  std::size_t kept = 0;
  std::size_t removed = 0;
  double correlation = 0.0;
};

struct CorrelationFilterResult {
  Matrix reduced;
  std::vector<std::size_t> kept;  // strictly increasing schema indices
  std::vector<RemovedPair> removed;
};

// Greedy scan in schema order: a feature is dropped when its |correlation|
// with an already-kept feature exceeds `threshold` (strictly).
CorrelationFilterResult filter_correlated(const Matrix& X,
                                          const FeatureSchema& schema,
                                          double threshold = 0.95);

}  // namespace slowdown
