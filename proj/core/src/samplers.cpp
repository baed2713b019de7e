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

#include "csi/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "csi/errors.hpp"
#include "csi/rng.hpp"

namespace csi {

const char* ToString(SamplerMethod method) {
  switch (method) {
    case SamplerMethod::kOdeEuler: return "ode-euler";
    case SamplerMethod::kOdeHeun: return "ode-heun";
    case SamplerMethod::kSdeEulerMaruyama: return "sde-euler-maruyama";
  }
  return "?";
}

SamplerMethod ParseSamplerMethod(std::string_view name) {
  if (name == "ode-euler") return SamplerMethod::kOdeEuler;
  if (name == "ode-heun") return SamplerMethod::kOdeHeun;
  if (name == "sde-euler-maruyama") return SamplerMethod::kSdeEulerMaruyama;
  throw ConfigError("method", "unknown sampler method '" + std::string(name) + "'");
}

DiffusionFunction UPreset(std::string_view name, const Schedule* schedule) {
  const std::string n(name);
  if (name == "zero") return {n, [](double) { return 0.0; }};
  if (name == "quartic") {
    return {n, [](double t) { return t * t * (1.0 - t) * (1.0 - t) / 8.0; }};
  }
  if (name == "linear-decay") return {n, [](double t) { return 0.1 * (1.0 - t); }};
  if (name == "sqrt-parabola") {
    return {n, [](double t) { return std::sqrt(2.0 * t * (1.0 - t)); }};
  }
  if (name == "gamma") {
    if (schedule == nullptr) {
      throw ConfigError("u", "preset 'gamma' needs a schedule");
    }
    return {n, [s = *schedule](double t) { return s.functions().gamma(t); }};
  }
  if (name.starts_with("const(") && name.ends_with(")")) {
    const std::string body(name.substr(6, name.size() - 7));
    double c = 0.0;
    std::size_t used = 0;
    try {
      c = std::stod(body, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != body.size() || body.empty() || !(c >= 0.0) || !std::isfinite(c)) {
      throw ConfigError("u", "bad constant diffusion '" + n + "'");
    }
    return {n, [c](double) { return c; }};
  }
  throw ConfigError("u", "unknown diffusion preset '" + n + "'");
}

std::vector<std::size_t> RecordStepsForTimes(std::span<const double> times,
                                             std::size_t steps, double t_end) {
  std::vector<std::size_t> out;
  for (double t : times) {
    const double pos = t / t_end * static_cast<double>(steps);
    const double k = std::round(pos);
    if (!(t >= 0.0 && t <= t_end) || std::abs(pos - k) * t_end / steps > 1e-9) {
      std::ostringstream os;
      os << "record time " << t << " is not on the grid k/" << steps;
      throw ArgumentError(os.str());
    }
    out.push_back(static_cast<std::size_t>(k));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

void ValidateSpec(const SamplerSpec& spec, std::size_t n_traj) {
  if (spec.steps == 0) throw ArgumentError("sampler: steps must be >= 1");
  if (n_traj == 0) throw ArgumentError("sampler: n_traj must be >= 1");
  if (!(spec.t_end > 0.0 && spec.t_end <= 1.0)) {
    throw ArgumentError("sampler: t_end must be in (0, 1]");
  }
}

// Shared integration loop: `advance(k, t, states)` performs step k in place.
template <typename Advance>
std::vector<Trajectory> Integrate(std::span<const double> x, std::size_t d,
                                  std::size_t n_traj, const SamplerSpec& spec,
                                  Advance&& advance) {
  ValidateSpec(spec, n_traj);
  const auto n = static_cast<Eigen::Index>(n_traj);
  Eigen::MatrixXd states(static_cast<Eigen::Index>(d), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    CounterRng rng(spec.seed, Stream::kSamplerInit, static_cast<std::uint64_t>(i));
    for (Eigen::Index j = 0; j < states.rows(); ++j) states(j, i) = rng.Normal();
  }

  std::vector<std::size_t> record = spec.record_steps;
  record.push_back(0);
  std::sort(record.begin(), record.end());
  record.erase(std::unique(record.begin(), record.end()), record.end());
  if (record.back() > spec.steps) {
    throw ArgumentError("sampler: record step beyond the final step");
  }

  std::vector<Trajectory> trajs(n_traj);
  for (auto& tr : trajs) tr.x.assign(x.begin(), x.end());
  auto snapshot = [&](std::size_t k) {
    const double t = static_cast<double>(k) * spec.dt();
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& tr = trajs[static_cast<std::size_t>(i)];
      tr.times.push_back(t);
      tr.states.emplace_back(states.col(i).data(), states.col(i).data() + d);
    }
  };

  std::size_t next_record = 0;
  for (std::size_t k = 0; k < spec.steps; ++k) {
    if (next_record < record.size() && record[next_record] == k) {
      snapshot(k);
      ++next_record;
    }
    advance(k, static_cast<double>(k) * spec.dt(), states);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!states.col(i).allFinite()) {
        throw IntegrationBlowUpError(static_cast<std::size_t>(i), k + 1);
      }
    }
  }
  if (next_record < record.size() && record[next_record] == spec.steps) {
    snapshot(spec.steps);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    trajs[static_cast<std::size_t>(i)].terminal.assign(
        states.col(i).data(), states.col(i).data() + d);
  }
  return trajs;
}

double FieldTime(const FieldModel& f, double t) {
  return f.clamps_interior()
             ? std::clamp(t, kInteriorClamp, 1.0 - kInteriorClamp)
             : t;
}

void CheckField(const FieldModel& f, FieldKind kind, std::span<const double> x,
                const char* what) {
  if (f.kind() != kind) {
    throw ArgumentError(std::string("sampler: ") + what + " field has kind " +
                        ToString(f.kind()));
  }
  if (x.size() != f.condition_dim()) {
    throw ShapeError("sampler: condition dimension mismatch");
  }
}

}  // namespace

std::vector<Trajectory> OdeFlowSample(const FieldModel& drift,
                                      std::span<const double> x,
                                      std::size_t n_traj,
                                      const SamplerSpec& spec) {
  CheckField(drift, FieldKind::kDrift, x, "drift");
  const double dt = spec.dt();
  if (spec.method == SamplerMethod::kOdeHeun) {
    return Integrate(x, drift.response_dim(), n_traj, spec,
                     [&](std::size_t, double t, Eigen::MatrixXd& z) {
                       const Eigen::MatrixXd k1 =
                           drift.EvaluateBatch(x, z, FieldTime(drift, t));
                       const Eigen::MatrixXd predictor = z + dt * k1;
                       const Eigen::MatrixXd k2 = drift.EvaluateBatch(
                           x, predictor, FieldTime(drift, t + dt));
                       z += (0.5 * dt) * (k1 + k2);
                     });
  }
  if (spec.method != SamplerMethod::kOdeEuler) {
    throw ArgumentError("ode_flow_sample: method must be ode-euler or ode-heun");
  }
  return Integrate(x, drift.response_dim(), n_traj, spec,
                   [&](std::size_t, double t, Eigen::MatrixXd& z) {
                     z += dt * drift.EvaluateBatch(x, z, FieldTime(drift, t));
                   });
}

std::vector<Trajectory> SdeDiffusionSample(const FieldModel& drift,
                                           const FieldModel& score,
                                           std::span<const double> x,
                                           std::size_t n_traj,
                                           const SamplerSpec& spec) {
  CheckField(drift, FieldKind::kDrift, x, "drift");
  CheckField(score, FieldKind::kScore, x, "score");
  if (spec.method != SamplerMethod::kSdeEulerMaruyama) {
    throw ArgumentError("sde_diffusion_sample: method must be sde-euler-maruyama");
  }
  if (score.response_dim() != drift.response_dim()) {
    throw ShapeError("sampler: drift and score dimensions differ");
  }
  ValidateSpec(spec, n_traj);
  std::vector<CounterRng> noise;
  noise.reserve(n_traj);
  for (std::size_t i = 0; i < n_traj; ++i) {
    noise.emplace_back(spec.seed, Stream::kSamplerNoise, i);
  }
  const double dt = spec.dt();
  return Integrate(
      x, drift.response_dim(), n_traj, spec,
      [&](std::size_t, double t, Eigen::MatrixXd& z) {
        const double u = spec.u(t);
        if (!(u >= 0.0) || !std::isfinite(u)) {
          std::ostringstream os;
          os << "diffusion u(" << t << ") = " << u << " is not >= 0";
          throw DomainError(os.str());
        }
        Eigen::MatrixXd velocity = drift.EvaluateBatch(x, z, FieldTime(drift, t));
        if (u == 0.0) {
          z += dt * velocity;
          return;
        }
        velocity += u * score.EvaluateBatch(x, z, FieldTime(score, t));
        const double sigma = std::sqrt(2.0 * u * dt);
        z += dt * velocity;
        for (Eigen::Index i = 0; i < z.cols(); ++i) {
          auto& rng = noise[static_cast<std::size_t>(i)];
          for (Eigen::Index j = 0; j < z.rows(); ++j) {
            z(j, i) += sigma * rng.Normal();
          }
        }
      });
}

std::vector<Trajectory> Sample(const FieldModel& drift, const FieldModel* score,
                               std::span<const double> x, std::size_t n_traj,
                               const SamplerSpec& spec) {
  if (spec.method == SamplerMethod::kSdeEulerMaruyama) {
    if (score == nullptr) throw ArgumentError("sde sampler needs a score field");
    return SdeDiffusionSample(drift, *score, x, n_traj, spec);
  }
  return OdeFlowSample(drift, x, n_traj, spec);
}

void WriteTrajectoriesCsv(std::ostream& os, std::span<const Trajectory> trajs) {
  const std::size_t d = trajs.empty() ? 1 : trajs.front().terminal.size();
  os << "traj_id,t";
  for (std::size_t j = 1; j <= d; ++j) os << ",z_" << j;
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& tr = trajs[i];
    for (std::size_t r = 0; r < tr.times.size(); ++r) {
      os << i << ',' << tr.times[r];
      for (double v : tr.states[r]) os << ',' << v;
      os << '\n';
    }
  }
  os.precision(old_precision);
}

void WriteTerminalCsv(std::ostream& os, std::span<const Trajectory> trajs) {
  const std::size_t d = trajs.empty() ? 1 : trajs.front().terminal.size();
  os << "traj_id";
  for (std::size_t j = 1; j <= d; ++j) os << ",z_" << j;
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    os << i;
    for (double v : trajs[i].terminal) os << ',' << v;
    os << '\n';
  }
  os.precision(old_precision);
}

Vector StatesAt(std::span<const Trajectory> trajs, double t) {
  Vector out;
  out.reserve(trajs.size());
  for (const Trajectory& tr : trajs) {
    bool found = false;
    for (std::size_t r = 0; r < tr.times.size(); ++r) {
      if (std::abs(tr.times[r] - t) < 1e-9) {
        out.push_back(tr.states[r].front());
        found = true;
        break;
      }
    }
    if (!found) {
      std::ostringstream os;
      os << "no recorded state at t=" << t;
      throw ArgumentError(os.str());
    }
  }
  return out;
}

}  // namespace csi
