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
#include <optional>
#include <span>

#include "csi/data.hpp"
#include "csi/schedule.hpp"

namespace csi {

// Where a drift/score/denoiser field is evaluated.
struct FieldProbe {
  Vector x;
  Vector y;
  double t = 0.0;
};

// Closed-form fields of the scalar regression model with N(0,1) reference.
// With noise variance v = noise_sd^2 and
//   D(t) = a^2 + b^2 v + gamma^2,
//   phi(t) = (a' a + b' b v + gamma' gamma) / D(t),
// the drift is phi (y - b f(x)) + b' f(x) and the score is -(y - b f(x)) / D.
// For v = 1 these reduce to the textbook unit-variance expressions.
double RegressionVariance(const RegressionModel& m, const SchedulePoint& p);
double RegressionPhi(const RegressionModel& m, const SchedulePoint& p);

double RegressionDrift(const RegressionModel& m, const Schedule& s,
                       const FieldProbe& p);
double RegressionScore(const RegressionModel& m, const Schedule& s,
                       const FieldProbe& p);
// E[eta | X = x, Y_t = y] = gamma (y - b f) / D.
double RegressionDenoiser(const RegressionModel& m, const Schedule& s,
                          const FieldProbe& p);

// Point-evaluation variants used in hot loops; `fx` is f(x), precomputed.
double RegressionDriftAt(const RegressionModel& m, const SchedulePoint& p,
                         double fx, double y);
double RegressionScoreAt(const RegressionModel& m, const SchedulePoint& p,
                         double fx, double y);

struct McEstimate {
  Vector value;
  Vector standard_error;  // bootstrap
  double bandwidth = 0.0;
  double mean_kernel_weight = 0.0;
  std::size_t m = 0;
};

struct McOptions {
  std::size_t m = 200000;
  std::optional<double> bandwidth;  // Silverman's rule when unset
  std::size_t bootstrap_reps = 200;
  std::uint64_t seed = 0;
};

// Quantity whose conditional expectation is estimated, computed from one
// simulated (y0, y1, eta) at schedule point p.
using McTarget = std::function<Vector(const SchedulePoint& p,
                                      std::span<const double> y0,
                                      std::span<const double> y1,
                                      std::span<const double> eta)>;

// Nadaraya-Watson estimate of E[target | X = x, Y_t = y] from m simulated
// draws at fixed (x, t), Gaussian kernel on y_t. Throws ArgumentError for
// m < 1000 and InsufficientSupportError when the mean kernel weight falls
// below 1e-8.
McEstimate McConditionalExpectation(const DataSource& src, const Schedule& s,
                                    const FieldProbe& probe,
                                    const McTarget& target,
                                    const McOptions& opts);

// E[a' Y0 + b' Y1 + gamma' eta | X = x, Y_t = y].
McEstimate McConditionalDrift(const DataSource& src, const Schedule& s,
                              const FieldProbe& probe, const McOptions& opts);
// E[eta | X = x, Y_t = y].
McEstimate McConditionalDenoiser(const DataSource& src, const Schedule& s,
                                 const FieldProbe& probe,
                                 const McOptions& opts);
// -E[eta | ...] / gamma(t). Throws DomainError where gamma(t) = 0.
McEstimate McConditionalScore(const DataSource& src, const Schedule& s,
                              const FieldProbe& probe, const McOptions& opts);

}  // namespace csi
