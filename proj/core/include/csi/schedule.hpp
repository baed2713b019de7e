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

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace csi {

// Consumers that need the noise derivative or its inverse evaluate fields at
// times clamped to [kInteriorClamp, 1 - kInteriorClamp].
inline constexpr double kInteriorClamp = 1e-4;

// Coefficients of the additive interpolation
//   Y_t = a(t) Y0 + b(t) Y1 + gamma(t) eta
// and their time derivatives at one instant.
struct SchedulePoint {
  double t = 0.0;
  double a = 0.0;
  double b = 0.0;
  double gamma = 0.0;
  double da = 0.0;
  double db = 0.0;
  double dgamma = 0.0;

  bool IsFinite() const;
};

// An additive interpolation schedule with analytic derivatives. Immutable
// after construction and cheap to copy.
class Schedule {
 public:
  using Fn = std::function<double(double)>;

  struct Functions {
    Fn a, b, gamma;
    Fn da, db, dgamma;
  };

  // `singular_at_boundary` declares that some derivative diverges at t = 0
  // or t = 1, so samplers must clamp probe times for fields built on it.
  Schedule(std::string name, Functions fns, bool singular_at_boundary = false);

  const std::string& name() const { return name_; }
  const Functions& functions() const { return fns_; }
  bool singular_at_boundary() const { return singular_at_boundary_; }

  // False when gamma vanishes on the whole open interval (rectified flow);
  // the denoiser and score are undefined for such schedules.
  bool has_noise() const { return has_noise_; }

  // Throws DomainError for t outside [0, 1]. Derivatives at the endpoints are
  // the one-sided limits of the analytic formulas, possibly infinite.
  SchedulePoint At(double t) const;

  // Identity for regular schedules; clamps into the interior otherwise.
  double ClampTime(double t) const;

 private:
  std::string name_;
  Functions fns_;
  bool singular_at_boundary_;
  bool has_noise_;
};

// Shipped presets: rectified-flow, linear-sqrt, trig-squared, trig-unstable,
// paper-7-1. Unknown names raise ConfigError with field path "schedule".
Schedule MakeSchedule(std::string_view preset);
const std::vector<std::string>& SchedulePresetNames();

SchedulePoint EvalSchedule(const Schedule& s, double t);

// A(t) = a (a b' - a' b) + gamma (gamma b' - gamma' b), the coefficient that
// turns the drift into the score for Gaussian references.
double CapitalA(const SchedulePoint& p);
double CapitalA(const Schedule& s, double t);

struct BoundaryCheck {
  std::string name;  // e.g. "b(1)"
  double residual = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<BoundaryCheck> entries;
  bool pass = false;

  std::string ToString() const;
};

// Checks a(0)=1, a(1)=0, b(0)=0, b(1)=1, gamma(0)=0, gamma(1)=0, and
// gamma >= 0 on a dense grid of (0, 1). Failures are report entries.
ValidationReport ValidateBoundary(const Schedule& s, double tol);

struct StabilityReport {
  std::vector<double> t;
  std::vector<double> one_minus_a_over_gamma;
  std::vector<double> b_over_gamma;
  // Least-squares slope of log(ratio) against log(t) over the last half of
  // the grid; a ratio behaving like t^p has exponent p.
  double decay_exponent_a = 0.0;
  double decay_exponent_b = 0.0;
  // Ratios at the smallest grid time.
  double limit_a = 0.0;
  double limit_b = 0.0;
  bool pass = false;

  std::string ToString() const;
};

// Minimum log-log decay exponent for a ratio to count as vanishing at t=0.
inline constexpr double kMinDecayExponent = 0.25;

// Checks 1 - a(t) = o(gamma(t)) and b(t) = o(gamma(t)) as t -> 0 along a
// strictly decreasing grid in (0, 0.5]. Passes iff both ratios decrease over
// the last half of the grid with decay exponent >= kMinDecayExponent.
// Throws EvaluationError where gamma(t) = 0.
StabilityReport CheckStabilityT0(const Schedule& s,
                                 std::span<const double> grid);

// Geometric grid 0.5 * 10^(-k/4), k = 0..22 (down to about 1.6e-6).
std::vector<double> DefaultStabilityGrid();

}  // namespace csi
