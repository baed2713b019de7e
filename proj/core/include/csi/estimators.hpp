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
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "csi/data.hpp"
#include "csi/net.hpp"
#include "csi/oracle.hpp"
#include "csi/schedule.hpp"

namespace csi {

enum class FieldKind { kDrift, kDenoiser, kScore };

const char* ToString(FieldKind kind);

// A vector field (x, y, t) -> R^d. Evaluation is batched over states that
// share the condition and the time, which is how the samplers use it.
// Immutable and cheap to copy; safe to evaluate from many threads.
class FieldModel {
 public:
  // states: d x n. Writes d x n into `out`.
  using BatchEvaluator =
      std::function<void(std::span<const double> x, const Eigen::MatrixXd& states,
                         double t, Eigen::MatrixXd& out)>;

  FieldModel(FieldKind kind, std::string provenance, std::size_t condition_dim,
             std::size_t response_dim, BatchEvaluator evaluator,
             bool clamps_interior = false,
             nlohmann::json descriptor = nlohmann::json::object());

  FieldKind kind() const { return kind_; }
  // analytic-oracle | mc-oracle | fitted-net(<id>) | derived(<route>) | ...
  const std::string& provenance() const { return provenance_; }
  std::size_t condition_dim() const { return condition_dim_; }
  std::size_t response_dim() const { return response_dim_; }
  // True when the field is singular at t in {0, 1}; callers evaluate it at
  // times clamped to [kInteriorClamp, 1 - kInteriorClamp].
  bool clamps_interior() const { return clamps_interior_; }
  // Serializable description: {kind, provenance, ...}.
  const nlohmann::json& descriptor() const { return descriptor_; }

  Eigen::MatrixXd EvaluateBatch(std::span<const double> x,
                                const Eigen::MatrixXd& states, double t) const;
  Vector Evaluate(std::span<const double> x, std::span<const double> y,
                  double t) const;
  Vector Evaluate(const FieldProbe& probe) const;

 private:
  FieldKind kind_;
  std::string provenance_;
  std::size_t condition_dim_;
  std::size_t response_dim_;
  std::shared_ptr<const BatchEvaluator> evaluator_;
  bool clamps_interior_;
  nlohmann::json descriptor_;
};

// Analytic fields of the scalar regression model.
FieldModel OracleDriftField(const RegressionModel& m, const Schedule& s);
FieldModel OracleScoreField(const RegressionModel& m, const Schedule& s);
FieldModel OracleDenoiserField(const RegressionModel& m, const Schedule& s);

// The same constant vector everywhere.
FieldModel ConstantField(FieldKind kind, std::size_t condition_dim,
                         Vector value);

// Pointwise user function, mainly for tests and synthetic models.
using PointFunction =
    std::function<Vector(std::span<const double> x, std::span<const double> y,
                         double t)>;
FieldModel FunctionField(FieldKind kind, std::string provenance,
                         std::size_t condition_dim, std::size_t response_dim,
                         PointFunction fn, bool clamps_interior = false);

// Wraps a trained network; `id` names the checkpoint in the provenance.
FieldModel NetField(FieldKind kind, std::shared_ptr<const NetParams> params,
                    std::size_t condition_dim, std::string id,
                    bool clamps_interior);

// s = -kappa / gamma. Evaluating at a time with gamma(t) = 0 raises
// DomainError.
FieldModel ScoreFromDenoiser(const FieldModel& denoiser, const Schedule& s);
// s = (b / A) drift - (b' / A) y, valid for additive schedules with Gaussian
// reference. Raises SingularCoefficientError where |A(t)| < 1e-12.
FieldModel ScoreFromDrift(const FieldModel& drift, const Schedule& s);

Vector ScoreFromDenoiserAt(const FieldModel& denoiser, const Schedule& s,
                           const FieldProbe& probe);
Vector ScoreFromDriftAt(const FieldModel& drift, const Schedule& s,
                        const FieldProbe& probe);

inline constexpr double kSingularCoefficientTol = 1e-12;

struct TrainConfig {
  std::size_t steps = 20000;
  std::size_t batch_size = 256;
  // Size of the fixed training sample; minibatches are drawn from it by
  // per-epoch shuffles. 0 draws fresh tuples every step.
  std::size_t n_tuples = 100000;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  // Cosine decay from lr to lr_final over the run; equal values keep lr
  // constant.
  double lr_final = 1e-3;
  // Standardize network inputs and outputs with training-sample moments.
  bool standardize = true;

  nlohmann::json ToJson() const;
};

struct FitResult {
  FieldModel model;
  std::shared_ptr<const NetParams> params;
  std::vector<double> loss_history;  // minibatch loss per step
  double initial_loss = 0.0;         // full training sample, before step 1
  double final_loss = 0.0;           // full training sample, after training

  Checkpoint MakeCheckpoint(const TrainConfig& train) const;
};

// Empirical risk minimization of the drift risk with Adam. Deterministic
// given train.seed. Raises TrainingDivergedError on a non-finite loss.
FitResult FitDrift(const DataSource& src, const Schedule& s,
                   const NetConfig& cfg, const TrainConfig& train);
// Same for the denoiser risk |eta + kappa|^2. Raises DomainError for
// schedules whose gamma vanishes.
FitResult FitDenoiser(const DataSource& src, const Schedule& s,
                      const NetConfig& cfg, const TrainConfig& train);

// Rebuilds a fitted field from a checkpoint.
FieldModel FieldFromCheckpoint(const Checkpoint& ckpt, std::size_t condition_dim,
                               const Schedule& s, const std::string& id);

// n probes: x from the data source, t ~ Uniform[0.05, 0.95], y a draw of
// Y_t | X = x.
std::vector<FieldProbe> MakeProbeGrid(const DataSource& src, const Schedule& s,
                                      std::size_t n, std::uint64_t seed);

struct OracleComparison {
  double mse = 0.0;
  double oracle_variance = 0.0;  // variance of the oracle values over probes
  double relative() const { return mse / oracle_variance; }
};

OracleComparison CompareFields(const FieldModel& estimate,
                               const FieldModel& oracle,
                               std::span<const FieldProbe> probes);

}  // namespace csi
