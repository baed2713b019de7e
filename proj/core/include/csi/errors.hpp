// Copyright 2026 The CSI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csi {

enum class ErrorKind {
  kDomain,
  kShape,
  kArgument,
  kEvaluation,
  kConfig,
  kNumeric,
  kTrainingDiverged,
  kIntegrationBlowUp,
  kInsufficientSupport,
  kSingularCoefficient,
  kIo,
};

const char* ToString(ErrorKind kind);

// Base of every error raised by the library. `kind()` lets callers branch
// without a dynamic_cast ladder; the concrete subclasses exist so tests and
// callers can still catch a specific category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CSI_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Kind, what) {}     \
  }

CSI_DEFINE_ERROR(DomainError, ErrorKind::kDomain);
CSI_DEFINE_ERROR(ShapeError, ErrorKind::kShape);
CSI_DEFINE_ERROR(ArgumentError, ErrorKind::kArgument);
CSI_DEFINE_ERROR(EvaluationError, ErrorKind::kEvaluation);
CSI_DEFINE_ERROR(NumericError, ErrorKind::kNumeric);
CSI_DEFINE_ERROR(InsufficientSupportError, ErrorKind::kInsufficientSupport);
CSI_DEFINE_ERROR(SingularCoefficientError, ErrorKind::kSingularCoefficient);
CSI_DEFINE_ERROR(IoError, ErrorKind::kIo);

#undef CSI_DEFINE_ERROR

// Invalid configuration. `field_path()` names the offending entry, e.g.
// "samplers[1].u".
class ConfigError : public Error {
 public:
  ConfigError(std::string field_path, const std::string& message);
  const std::string& field_path() const noexcept { return field_path_; }

 private:
  std::string field_path_;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(std::size_t step, double loss);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IntegrationBlowUpError : public Error {
 public:
  IntegrationBlowUpError(std::size_t trajectory, std::size_t step);
  std::size_t trajectory() const noexcept { return trajectory_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t trajectory_;
  std::size_t step_;
};

}  // namespace csi
