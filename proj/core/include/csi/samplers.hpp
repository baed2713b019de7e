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
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csi/estimators.hpp"
#include "csi/schedule.hpp"

namespace csi {

enum class SamplerMethod { kOdeEuler, kOdeHeun, kSdeEulerMaruyama };

const char* ToString(SamplerMethod method);
// Accepts "ode-euler", "ode-heun", "sde-euler-maruyama"; ConfigError
// (field "method") otherwise.
SamplerMethod ParseSamplerMethod(std::string_view name);

// Diffusion coefficient u(t) >= 0 of the SDE generator.
struct DiffusionFunction {
  std::string name;
  std::function<double(double)> u;

  double operator()(double t) const { return u(t); }
};

// Presets: "zero", "quartic" (t^2 (1-t)^2 / 8), "linear-decay" (0.1 (1-t)),
// "sqrt-parabola" (sqrt(2t(1-t))), "gamma" (the schedule's gamma, requires
// `schedule`), "const(c)" with c >= 0. ConfigError (field "u") otherwise.
DiffusionFunction UPreset(std::string_view name,
                          const Schedule* schedule = nullptr);

struct SamplerSpec {
  SamplerMethod method = SamplerMethod::kOdeEuler;
  std::size_t steps = 1000;
  DiffusionFunction u = UPreset("zero");  // ignored by ODE methods
  std::uint64_t seed = 0;
  // Grid indices k (time k * dt) whose states are recorded. Step 0 is always
  // recorded; the terminal state is always kept separately.
  std::vector<std::size_t> record_steps;
  // Integration horizon; dt = t_end / steps.
  double t_end = 1.0;

  double dt() const { return t_end / static_cast<double>(steps); }
};

// Maps times to grid indices; ArgumentError when a time is not within 1e-9
// of a grid point k * t_end / steps.
std::vector<std::size_t> RecordStepsForTimes(std::span<const double> times,
                                             std::size_t steps,
                                             double t_end = 1.0);

struct Trajectory {
  Vector x;
  std::vector<double> times;   // strictly increasing, starts at 0
  std::vector<Vector> states;  // states[i] is z at times[i]
  Vector terminal;             // z at t_end
};

// Integrates dz = drift(x, z, t) dt from z0 ~ N(0, I_d). Euler or Heun.
// Raises IntegrationBlowUpError naming the first non-finite trajectory.
std::vector<Trajectory> OdeFlowSample(const FieldModel& drift,
                                      std::span<const double> x,
                                      std::size_t n_traj,
                                      const SamplerSpec& spec);

// Euler-Maruyama for dz = (drift + u score) dt + sqrt(2u) dW from
// z0 ~ N(0, I_d), fields evaluated at the left endpoint of each step.
// Trajectory i uses its own noise sub-stream. DomainError when u(t) < 0.
std::vector<Trajectory> SdeDiffusionSample(const FieldModel& drift,
                                           const FieldModel& score,
                                           std::span<const double> x,
                                           std::size_t n_traj,
                                           const SamplerSpec& spec);

// Dispatch on spec.method; `score` is only read by the SDE.
std::vector<Trajectory> Sample(const FieldModel& drift, const FieldModel* score,
                               std::span<const double> x, std::size_t n_traj,
                               const SamplerSpec& spec);

// Columns traj_id, t, z_1..z_d; one row per recorded state.
void WriteTrajectoriesCsv(std::ostream& os, std::span<const Trajectory> trajs);
// Columns traj_id, z_1..z_d.
void WriteTerminalCsv(std::ostream& os, std::span<const Trajectory> trajs);

// First component of the state recorded at grid time `t`, one value per
// trajectory. ArgumentError when `t` was not recorded.
Vector StatesAt(std::span<const Trajectory> trajs, double t);

}  // namespace csi
