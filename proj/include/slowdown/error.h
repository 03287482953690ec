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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slowdown {

enum class ErrorCode {
  kInvalidArgument,
  // telemetry
  kMissingColumn,
  kMalformedRow,
  kEmptyDataset,
  kIoError,
  // forest / interpreter
  kEmptyTrainingSet,
  kNonFiniteInput,
  kDimensionMismatch,
  // baseline
  kUnknownTemplate,
  kNoBaselines,
  // reasoner
  kModelMismatch,
  kNonPositiveRuntime,
  kSchemaMismatch,
  // evaluation
  kLengthMismatch,
  kNonPositiveBaseline,
  kInsufficientData,
  kUnknownGroup,
  kUnknownSample,
  // synth
  kInvalidConfig,
  kMissingReport,
  // registry
  kStorageError,
  kUnknownRun,
  kCorruptArtifact,
};

std::string_view error_code_name(ErrorCode code);

// All library failures are reported through this type. The code is stable and
// machine-checkable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace slowdown
