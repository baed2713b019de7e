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

#include "csi/errors.hpp"

#include <sstream>

namespace csi {

const char* ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kEvaluation: return "evaluation error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kTrainingDiverged: return "training diverged";
    case ErrorKind::kIntegrationBlowUp: return "integration blow-up";
    case ErrorKind::kInsufficientSupport: return "insufficient support";
    case ErrorKind::kSingularCoefficient: return "singular coefficient";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

ConfigError::ConfigError(std::string field_path, const std::string& message)
    : Error(ErrorKind::kConfig, field_path + ": " + message),
      field_path_(std::move(field_path)) {}

namespace {
std::string DivergedMessage(std::size_t step, double loss) {
  std::ostringstream os;
  os << "training diverged at step " << step << " (loss " << loss << ")";
  return os.str();
}
std::string BlowUpMessage(std::size_t trajectory, std::size_t step) {
  std::ostringstream os;
  os << "non-finite state in trajectory " << trajectory << " at step " << step;
  return os.str();
}
}  // namespace

TrainingDivergedError::TrainingDivergedError(std::size_t step, double loss)
    : Error(ErrorKind::kTrainingDiverged, DivergedMessage(step, loss)),
      step_(step) {}

IntegrationBlowUpError::IntegrationBlowUpError(std::size_t trajectory,
                                               std::size_t step)
    : Error(ErrorKind::kIntegrationBlowUp, BlowUpMessage(trajectory, step)),
      trajectory_(trajectory),
      step_(step) {}

}  // namespace csi
