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

#include "slowdown/telemetry.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "slowdown/error.h"
#include "slowdown/hashing.h"
#include "text_util.h"

namespace slowdown {

using nlohmann::json;

std::string_view to_string(FeatureLevel level) {
  switch (level) {
    case FeatureLevel::kJob: return "job";
    case FeatureLevel::kMachine: return "machine";
    case FeatureLevel::kCluster: return "cluster";
  }
  return "job";
}

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kNumeric ? "numeric" : "categorical";
}

namespace {

FeatureLevel parse_level(const std::string& s) {
  if (s == "job") return FeatureLevel::kJob;
  if (s == "machine") return FeatureLevel::kMachine;
  if (s == "cluster") return FeatureLevel::kCluster;
  throw Error(ErrorCode::kInvalidArgument, "unknown feature level: " + s);
}

FeatureKind parse_kind(const std::string& s) {
  if (s == "numeric") return FeatureKind::kNumeric;
  if (s == "categorical") return FeatureKind::kCategorical;
  throw Error(ErrorCode::kInvalidArgument, "unknown feature kind: " + s);
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

// Most frequent code; ties go to the smallest code.
double mode_of(const std::vector<double>& codes) {
  if (codes.empty()) return 0.0;
  std::map<double, std::size_t> counts;
  for (double c : codes) ++counts[c];
  double best = counts.begin()->first;
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

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features,
                             std::string version)
    : features_(std::move(features)), version_(std::move(version)) {
  for (std::size_t k = 0; k < features_.size(); ++k) {
    const std::string& name = features_[k].name;
    if (name.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "feature name must not be empty");
    }
    if (!index_.emplace(name, k).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate feature name: " + name);
    }
  }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

std::string FeatureSchema::fingerprint() const {
  return sha256_hex(to_json(*this).dump());
}

FeatureSchema default_schema() {
  using L = FeatureLevel;
  using K = FeatureKind;
  std::vector<FeatureSpec> f = {
      {"input_size", L::kJob, K::kNumeric,
       {"Input size grew: the job read more data than usual"}},
      {"data_written", L::kJob, K::kNumeric,
       {"The job wrote more output data than usual"}},
      {"cross_rack_read", L::kJob, K::kNumeric,
       {"More data was read across racks", "Network-bound reads"}},
      {"task_count", L::kJob, K::kNumeric,
       {"Degree of parallelism changed (number of tasks)"}},
      {"stage_count", L::kJob, K::kNumeric,
       {"Execution plan changed (number of stages)"}},
      {"priority", L::kJob, K::kNumeric, {"Job priority changed"}},
      {"data_skew", L::kJob, K::kNumeric,
       {"Data skew across tasks", "A few partitions hold most of the data"}},
      {"time_skew", L::kJob, K::kNumeric,
       {"Time skew: straggler tasks ran much longer than the median task"}},
      {"queueing_time", L::kCluster, K::kNumeric,
       {"Long queueing time before execution", "Cluster under heavy load"}},
      {"failed_vertices", L::kCluster, K::kNumeric,
       {"Failed vertices were re-executed"}},
      {"revoked_vertices", L::kCluster, K::kNumeric,
       {"Revocation: vertices were preempted and rescheduled"}},
      {"usable_machine_count", L::kMachine, K::kNumeric,
       {"Usable machine count changed"}},
      {"environment_version", L::kCluster, K::kCategorical,
       {"Execution environment or framework version changed"}},
      {"compute_hours", L::kJob, K::kNumeric, {"High compute hours"}},
      {"user_id", L::kJob, K::kCategorical, {"Submitting user or account changed"}},
  };
  return FeatureSchema(std::move(f), "default-1");
}

json to_json(const FeatureSchema& schema) {
  json features = json::array();
  for (const auto& f : schema.features()) {
    features.push_back({{"name", f.name},
                        {"level", to_string(f.level)},
                        {"kind", to_string(f.kind)},
                        {"reasons", f.reasons}});
  }
  return {{"version", schema.version()}, {"features", std::move(features)}};
}

FeatureSchema schema_from_json(const json& doc) {
  try {
    std::vector<FeatureSpec> features;
    for (const auto& f : doc.at("features")) {
      FeatureSpec spec;
      spec.name = f.at("name").get<std::string>();
      spec.level = parse_level(f.value("level", std::string("job")));
      spec.kind = parse_kind(f.value("kind", std::string("numeric")));
      spec.reasons = f.value("reasons", std::vector<std::string>{});
      features.push_back(std::move(spec));
    }
    return FeatureSchema(std::move(features), doc.value("version", std::string()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("invalid schema document: ") + e.what());
  }
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  return schema_from_json(parse_json_file(path));
}

void save_schema(const std::filesystem::path& path, const FeatureSchema& schema) {
  write_text_file(path, to_json(schema).dump(2) + "\n");
}

std::vector<std::string> Dataset::template_ids() const {
  std::set<std::string> ids;
  for (const auto& r : records) ids.insert(r.template_id);
  return {ids.begin(), ids.end()};
}

const JobRecord* Dataset::find_job(std::string_view job_id) const {
  for (const auto& r : records) {
    if (r.job_id == job_id) return &r;
  }
  return nullptr;
}

Dataset read_dataset(std::istream& in, const FeatureSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kMissingColumn, std::string(kJobIdColumn));
  }
  ++line_no;
  strip_cr(line);
  auto header = split_csv_line(line);
  if (!header) throw Error(ErrorCode::kMalformedRow, "line 1: bad header");

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t c = 0; c < header->size(); ++c) {
    column_of.emplace(trim((*header)[c]), c);
  }
  auto require = [&](std::string_view name) {
    auto it = column_of.find(std::string(name));
    if (it == column_of.end()) {
      throw Error(ErrorCode::kMissingColumn, std::string(name));
    }
    return it->second;
  };
  const std::size_t job_col = require(kJobIdColumn);
  const std::size_t template_col = require(kTemplateIdColumn);
  const std::size_t submitted_col = require(kSubmittedAtColumn);
  const std::size_t runtime_col = require(kRuntimeColumn);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features()) feature_cols.push_back(require(f.name));

  Dataset dataset{schema, {}};
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (!fields || fields->size() != header->size()) {
      throw Error(ErrorCode::kMalformedRow, "line " + std::to_string(line_no));
    }
    JobRecord rec;
    rec.job_id = (*fields)[job_col];
    rec.template_id = (*fields)[template_col];
    auto submitted = parse_int64((*fields)[submitted_col]);
    auto runtime = parse_double((*fields)[runtime_col]);
    if (!submitted || !runtime || !(*runtime > 0.0)) {
      throw Error(ErrorCode::kMalformedRow,
                  "line " + std::to_string(line_no) +
                      ": submitted_at must be an integer and runtime_seconds "
                      "a positive number");
    }
    rec.submitted_at = *submitted;
    rec.runtime_seconds = *runtime;
    rec.feature_values.reserve(schema.size());
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const std::string& cell = (*fields)[feature_cols[k]];
      if (trim(cell).empty()) {
        rec.feature_values.emplace_back(std::nullopt);
      } else if (schema[k].kind == FeatureKind::kCategorical) {
        rec.feature_values.emplace_back(FeatureValue(std::string(trim(cell))));
      } else if (auto v = parse_double(cell)) {
        rec.feature_values.emplace_back(FeatureValue(*v));
      } else {
        rec.feature_values.emplace_back(std::nullopt);
      }
    }
    dataset.records.push_back(std::move(rec));
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path,
                     const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  }
  return read_dataset(in, schema);
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  std::vector<std::string> header = {std::string(kJobIdColumn),
                                     std::string(kTemplateIdColumn),
                                     std::string(kSubmittedAtColumn),
                                     std::string(kRuntimeColumn)};
  for (const auto& f : dataset.schema.features()) header.push_back(f.name);
  out << join_csv_line(header) << '\n';
  std::vector<std::string> fields;
  for (const auto& r : dataset.records) {
    fields.clear();
    fields.push_back(r.job_id);
    fields.push_back(r.template_id);
    fields.push_back(std::to_string(r.submitted_at));
    fields.push_back(format_double(r.runtime_seconds));
    for (const auto& v : r.feature_values) {
      if (!v) {
        fields.emplace_back();
      } else if (const double* d = std::get_if<double>(&*v)) {
        fields.push_back(format_double(*d));
      } else {
        fields.push_back(std::get<std::string>(*v));
      }
    }
    out << join_csv_line(fields) << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream out;
  write_dataset(out, dataset);
  write_text_file(path, out.str());
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw Error(ErrorCode::kDimensionMismatch, "row width does not match matrix");
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> rows) const {
  Matrix out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix Matrix::select_columns(std::span<const std::size_t> cols) const {
  Matrix out(rows_, cols.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(r, j) = (*this)(r, cols[j]);
  }
  return out;
}

double Encoding::code_of(std::size_t k, std::string_view value) const {
  const auto& cats = categories.at(k);
  auto it = std::find(cats.begin(), cats.end(), value);
  if (it == cats.end()) return -1.0;
  return static_cast<double>(it - cats.begin());
}

std::optional<std::string> Encoding::decode(std::size_t k, double code) const {
  if (k >= categories.size() || categories[k].empty()) return std::nullopt;
  if (code < 0 || code != std::floor(code)) return std::nullopt;
  const auto idx = static_cast<std::size_t>(code);
  if (idx >= categories[k].size()) return std::nullopt;
  return categories[k][idx];
}

std::vector<double> Encoding::encode(const FeatureSchema& schema,
                                     const JobRecord& record) const {
  if (record.feature_values.size() != schema.size() ||
      global_fill.size() != schema.size()) {
    throw Error(ErrorCode::kSchemaMismatch,
                "record has " + std::to_string(record.feature_values.size()) +
                    " features, schema has " + std::to_string(schema.size()));
  }
  const std::vector<std::optional<double>>* fill = nullptr;
  if (auto it = template_fill.find(record.template_id); it != template_fill.end()) {
    fill = &it->second;
  }
  std::vector<double> x(schema.size());
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto& cell = record.feature_values[k];
    if (!cell) {
      x[k] = (fill && (*fill)[k]) ? *(*fill)[k] : global_fill[k];
      continue;
    }
    if (schema[k].kind == FeatureKind::kCategorical) {
      const std::string text = std::holds_alternative<std::string>(*cell)
                                   ? std::get<std::string>(*cell)
                                   : format_double(std::get<double>(*cell));
      x[k] = code_of(k, text);
    } else if (const double* d = std::get_if<double>(&*cell)) {
      x[k] = *d;
    } else if (auto parsed = parse_double(std::get<std::string>(*cell))) {
      x[k] = *parsed;
    } else {
      throw Error(ErrorCode::kSchemaMismatch,
                  "non-numeric value for numeric feature " + schema[k].name);
    }
  }
  return x;
}

json to_json(const Encoding& encoding) {
  json fills = json::object();
  for (const auto& [tid, values] : encoding.template_fill) {
    json row = json::array();
    for (const auto& v : values) row.push_back(v ? json(*v) : json(nullptr));
    fills[tid] = std::move(row);
  }
  return {{"categories", encoding.categories},
          {"global_fill", encoding.global_fill},
          {"template_fill", std::move(fills)}};
}

Encoding encoding_from_json(const json& doc) {
  Encoding e;
  e.categories = doc.at("categories").get<std::vector<std::vector<std::string>>>();
  e.global_fill = doc.at("global_fill").get<std::vector<double>>();
  for (const auto& [tid, row] : doc.at("template_fill").items()) {
    std::vector<std::optional<double>> values;
    for (const auto& v : row) {
      values.push_back(v.is_null() ? std::nullopt
                                   : std::optional<double>(v.get<double>()));
    }
    e.template_fill.emplace(tid, std::move(values));
  }
  return e;
}

std::map<std::string, std::vector<std::size_t>> EncodedTable::rows_by_template()
    const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < template_ids.size(); ++i) {
    out[template_ids[i]].push_back(i);
  }
  return out;
}

EncodedTable impute_and_encode(const Dataset& dataset) {
  if (dataset.records.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "dataset has no records");
  }
  const FeatureSchema& schema = dataset.schema;
  const std::size_t n = dataset.records.size();
  const std::size_t K = schema.size();

  EncodedTable table;
  table.X = Matrix(n, K);
  table.y.resize(n);
  table.template_ids.resize(n);
  table.job_ids.resize(n);
  Encoding& enc = table.encoding;
  enc.categories.assign(K, {});
  enc.global_fill.assign(K, 0.0);

  // Encoded observed values (NaN marks missing), and per-template observations.
  Matrix raw(n, K, std::nan(""));
  std::map<std::string, std::vector<std::vector<double>>> observed;
  std::vector<std::vector<double>> observed_global(K);
  for (std::size_t i = 0; i < n; ++i) {
    const JobRecord& r = dataset.records[i];
    if (r.feature_values.size() != K) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "record " + r.job_id + " does not match the schema width");
    }
    table.y[i] = r.runtime_seconds;
    table.template_ids[i] = r.template_id;
    table.job_ids[i] = r.job_id;
    auto& per_template = observed[r.template_id];
    if (per_template.empty()) per_template.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto& cell = r.feature_values[k];
      if (!cell) continue;
      double value;
      if (schema[k].kind == FeatureKind::kCategorical) {
        const std::string text = std::holds_alternative<std::string>(*cell)
                                     ? std::get<std::string>(*cell)
                                     : format_double(std::get<double>(*cell));
        auto& cats = enc.categories[k];
        auto it = std::find(cats.begin(), cats.end(), text);
        if (it == cats.end()) {
          cats.push_back(text);
          value = static_cast<double>(cats.size() - 1);
        } else {
          value = static_cast<double>(it - cats.begin());
        }
      } else if (const double* d = std::get_if<double>(&*cell)) {
        value = *d;
      } else if (auto parsed = parse_double(std::get<std::string>(*cell))) {
        value = *parsed;
      } else {
        continue;
      }
      raw(i, k) = value;
      per_template[k].push_back(value);
      observed_global[k].push_back(value);
    }
  }

  auto summarize = [&](std::size_t k, const std::vector<double>& values) {
    return schema[k].kind == FeatureKind::kCategorical ? mode_of(values)
                                                       : median_of(values);
  };
  for (std::size_t k = 0; k < K; ++k) {
    enc.global_fill[k] = summarize(k, observed_global[k]);
  }
  for (const auto& [tid, per_feature] : observed) {
    std::vector<std::optional<double>> fill(K);
    for (std::size_t k = 0; k < K; ++k) {
      if (!per_feature[k].empty()) fill[k] = summarize(k, per_feature[k]);
    }
    enc.template_fill.emplace(tid, std::move(fill));
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& fill = enc.template_fill.at(table.template_ids[i]);
    for (std::size_t k = 0; k < K; ++k) {
      const double v = raw(i, k);
      table.X(i, k) = !std::isnan(v) ? v : (fill[k] ? *fill[k] : enc.global_fill[k]);
    }
  }
  return table;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationFilterResult filter_correlated(const Matrix& X,
                                          const FeatureSchema& schema,
                                          double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "correlation threshold must lie in (0, 1]");
  }
  if (X.cols() != schema.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matrix width does not match the schema");
  }
  std::vector<std::vector<double>> columns(X.cols());
  for (std::size_t k = 0; k < X.cols(); ++k) columns[k] = X.column(k);

  CorrelationFilterResult result;
  for (std::size_t k = 0; k < X.cols(); ++k) {
    bool drop = false;
    for (std::size_t kept : result.kept) {
      const double r = pearson_correlation(columns[kept], columns[k]);
      if (std::abs(r) > threshold) {
        result.removed.push_back({kept, k, r});
        drop = true;
        break;
      }
    }
    if (!drop) result.kept.push_back(k);
  }
  result.reduced = X.select_columns(result.kept);
  return result;
}

}  // namespace slowdown
