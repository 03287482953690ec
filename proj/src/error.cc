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

#include "slowdown/error.h"

namespace slowdown {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnknownTemplate: return "UnknownTemplate";
    case ErrorCode::kNoBaselines: return "NoBaselines";
    case ErrorCode::kModelMismatch: return "ModelMismatch";
    case ErrorCode::kNonPositiveRuntime: return "NonPositiveRuntime";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNonPositiveBaseline: return "NonPositiveBaseline";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kUnknownGroup: return "UnknownGroup";
    case ErrorCode::kUnknownSample: return "UnknownSample";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMissingReport: return "MissingReport";
    case ErrorCode::kStorageError: return "StorageError";
    case ErrorCode::kUnknownRun: return "UnknownRun";
    case ErrorCode::kCorruptArtifact: return "CorruptArtifact";
  }
  return "Unknown";
}

}  // namespace slowdown
