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

#include "csi/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "csi/errors.hpp"

namespace csi {

namespace {

constexpr double kPi = std::numbers::pi;

bool GammaPositiveOnInterior(const Schedule::Fn& gamma) {
  constexpr int kGrid = 1000;
  for (int i = 1; i < kGrid; ++i) {
    if (!(gamma(static_cast<double>(i) / kGrid) > 0.0)) return false;
  }
  return true;
}

Schedule RectifiedFlow() {
  return Schedule("rectified-flow",
                  {.a = [](double t) { return 1.0 - t; },
                   .b = [](double t) { return t; },
                   .gamma = [](double) { return 0.0; },
                   .da = [](double) { return -1.0; },
                   .db = [](double) { return 1.0; },
                   .dgamma = [](double) { return 0.0; }});
}

Schedule LinearSqrt() {
  return Schedule(
      "linear-sqrt",
      {.a = [](double t) { return 1.0 - t; },
       .b = [](double t) { return t; },
       .gamma = [](double t) { return std::sqrt(2.0 * t * (1.0 - t)); },
       .da = [](double) { return -1.0; },
       .db = [](double) { return 1.0; },
       // +inf at t=0, -inf at t=1
       .dgamma =
           [](double t) {
             return (1.0 - 2.0 * t) / std::sqrt(2.0 * t * (1.0 - t));
           }},
      /*singular_at_boundary=*/true);
}

Schedule TrigSquared() {
  const double half_sqrt2 = std::numbers::sqrt2 / 2.0;
  return Schedule(
      "trig-squared",
      {.a = [](double t) { return std::pow(std::cos(kPi * t / 2.0), 2); },
       .b = [](double t) { return std::pow(std::sin(kPi * t / 2.0), 2); },
       .gamma = [=](double t) { return half_sqrt2 * std::sin(kPi * t); },
       .da = [](double t) { return -kPi / 2.0 * std::sin(kPi * t); },
       .db = [](double t) { return kPi / 2.0 * std::sin(kPi * t); },
       .dgamma = [=](double t) { return half_sqrt2 * kPi * std::cos(kPi * t); }});
}

Schedule TrigUnstable() {
  return Schedule(
      "trig-unstable",
      {.a = [](double t) { return std::cos(kPi * t / 2.0); },
       .b = [](double t) { return std::sin(kPi * t / 2.0); },
       .gamma = [](double t) { return std::sin(kPi * t); },
       .da = [](double t) { return -kPi / 2.0 * std::sin(kPi * t / 2.0); },
       .db = [](double t) { return kPi / 2.0 * std::cos(kPi * t / 2.0); },
       .dgamma = [](double t) { return kPi * std::cos(kPi * t); }});
}

Schedule RegressionExperiment() {
  return Schedule(
      "paper-7-1",
      {.a = [](double t) { return std::cos(kPi * t / 2.0); },
       .b = [](double t) { return std::sin(kPi * t / 2.0); },
       .gamma = [](double t) { return std::log1p(t - t * t); },
       .da = [](double t) { return -kPi / 2.0 * std::sin(kPi * t / 2.0); },
       .db = [](double t) { return kPi / 2.0 * std::cos(kPi * t / 2.0); },
       .dgamma = [](double t) { return (1.0 - 2.0 * t) / (1.0 + t - t * t); }});
}

}  // namespace

bool SchedulePoint::IsFinite() const {
  return std::isfinite(a) && std::isfinite(b) && std::isfinite(gamma) &&
         std::isfinite(da) && std::isfinite(db) && std::isfinite(dgamma);
}

Schedule::Schedule(std::string name, Functions fns, bool singular_at_boundary)
    : name_(std::move(name)),
      fns_(std::move(fns)),
      singular_at_boundary_(singular_at_boundary),
      has_noise_(GammaPositiveOnInterior(fns_.gamma)) {}

SchedulePoint Schedule::At(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream os;
    os << "schedule '" << name_ << "' evaluated at t=" << t
       << " outside [0, 1]";
    throw DomainError(os.str());
  }
  return {.t = t,
          .a = fns_.a(t),
          .b = fns_.b(t),
          .gamma = fns_.gamma(t),
          .da = fns_.da(t),
          .db = fns_.db(t),
          .dgamma = fns_.dgamma(t)};
}

double Schedule::ClampTime(double t) const {
  if (!singular_at_boundary_) return t;
  return std::clamp(t, kInteriorClamp, 1.0 - kInteriorClamp);
}

Schedule MakeSchedule(std::string_view preset) {
  if (preset == "rectified-flow") return RectifiedFlow();
  if (preset == "linear-sqrt") return LinearSqrt();
  if (preset == "trig-squared") return TrigSquared();
  if (preset == "trig-unstable") return TrigUnstable();
  if (preset == "paper-7-1") return RegressionExperiment();
  throw ConfigError("schedule",
                    "unknown schedule preset '" + std::string(preset) + "'");
}

const std::vector<std::string>& SchedulePresetNames() {
  static const std::vector<std::string> kNames = {
      "rectified-flow", "linear-sqrt", "trig-squared", "trig-unstable",
      "paper-7-1"};
  return kNames;
}

SchedulePoint EvalSchedule(const Schedule& s, double t) { return s.At(t); }

double CapitalA(const SchedulePoint& p) {
  if (!p.IsFinite()) {
    std::ostringstream os;
    os << "non-finite schedule coefficient at t=" << p.t;
    throw EvaluationError(os.str());
  }
  return p.a * (p.a * p.db - p.da * p.b) +
         p.gamma * (p.gamma * p.db - p.dgamma * p.b);
}

double CapitalA(const Schedule& s, double t) {
  if (!(t > 0.0 && t <= 1.0)) {
    std::ostringstream os;
    os << "A(t) requires 0 < t <= 1, got t=" << t;
    throw DomainError(os.str());
  }
  return CapitalA(s.At(t));
}

std::string ValidationReport::ToString() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << (e.pass ? "pass " : "FAIL ") << e.name << " residual " << e.residual
       << "\n";
  }
  os << (pass ? "boundary conditions: pass" : "boundary conditions: FAIL")
     << "\n";
  return os.str();
}

ValidationReport ValidateBoundary(const Schedule& s, double tol) {
  if (!(tol > 0.0)) throw ArgumentError("validate_boundary: tol must be > 0");
  const auto& f = s.functions();
  ValidationReport report;
  auto add = [&](std::string name, double residual) {
    report.entries.push_back(
        {std::move(name), residual, std::isfinite(residual) && residual <= tol});
  };
  add("a(0)", std::abs(f.a(0.0) - 1.0));
  add("a(1)", std::abs(f.a(1.0)));
  add("b(0)", std::abs(f.b(0.0)));
  add("b(1)", std::abs(f.b(1.0) - 1.0));
  add("gamma(0)", std::abs(f.gamma(0.0)));
  add("gamma(1)", std::abs(f.gamma(1.0)));
  // Largest negative excursion of gamma on the open interval.
  double worst = 0.0;
  constexpr int kGrid = 10000;
  for (int i = 1; i < kGrid; ++i) {
    const double g = f.gamma(static_cast<double>(i) / kGrid);
    if (!std::isfinite(g)) {
      worst = std::numeric_limits<double>::infinity();
      break;
    }
    worst = std::max(worst, -g);
  }
  add("gamma>=0", worst);
  report.pass = std::all_of(report.entries.begin(), report.entries.end(),
                            [](const BoundaryCheck& e) { return e.pass; });
  return report;
}

namespace {

double LogLogSlope(std::span<const double> t, std::span<const double> r) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(r[i] > 0.0)) continue;
    const double x = std::log(t[i]);
    const double y = std::log(r[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  // Ratios that are exactly zero on (almost) the whole tail have decayed.
  if (n < 2) return std::numeric_limits<double>::infinity();
  const double denom = n * sxx - sx * sx;
  return (n * sxy - sx * sy) / denom;
}

}  // namespace

std::string StabilityReport::ToString() const {
  std::ostringstream os;
  os << "(1-a)/gamma: limit " << limit_a << ", decay exponent "
     << decay_exponent_a << "\n"
     << "b/gamma:     limit " << limit_b << ", decay exponent "
     << decay_exponent_b << "\n"
     << (pass ? "stability at t=0: pass" : "stability at t=0: FAIL") << "\n";
  return os.str();
}

StabilityReport CheckStabilityT0(const Schedule& s,
                                 std::span<const double> grid) {
  if (grid.size() < 4) {
    throw ArgumentError("check_stability_t0: grid needs at least 4 points");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 0.5) ||
        (i > 0 && !(grid[i] < grid[i - 1]))) {
      throw ArgumentError(
          "check_stability_t0: grid must be strictly decreasing in (0, 0.5]");
    }
  }
  const auto& f = s.functions();
  StabilityReport report;
  for (double t : grid) {
    const double g = f.gamma(t);
    if (g == 0.0 || !std::isfinite(g)) {
      std::ostringstream os;
      os << "gamma(" << t << ") = " << g << " in schedule '" << s.name()
         << "'; ratios to gamma are undefined";
      throw EvaluationError(os.str());
    }
    report.t.push_back(t);
    report.one_minus_a_over_gamma.push_back((1.0 - f.a(t)) / g);
    report.b_over_gamma.push_back(f.b(t) / g);
  }
  const std::size_t half = grid.size() / 2;
  auto tail = [&](const std::vector<double>& v) {
    return std::span<const double>(v).subspan(half);
  };
  const auto t_tail = tail(report.t);
  report.decay_exponent_a =
      LogLogSlope(t_tail, tail(report.one_minus_a_over_gamma));
  report.decay_exponent_b = LogLogSlope(t_tail, tail(report.b_over_gamma));
  report.limit_a = report.one_minus_a_over_gamma.back();
  report.limit_b = report.b_over_gamma.back();

  auto decays = [&](const std::vector<double>& v, double exponent) {
    return std::abs(v.back()) <= std::abs(v[half]) &&
           exponent >= kMinDecayExponent;
  };
  report.pass = decays(report.one_minus_a_over_gamma, report.decay_exponent_a) &&
                decays(report.b_over_gamma, report.decay_exponent_b);
  return report;
}

std::vector<double> DefaultStabilityGrid() {
  std::vector<double> grid;
  for (int k = 0; k <= 22; ++k) {
    grid.push_back(0.5 * std::pow(10.0, -k / 4.0));
  }
  return grid;
}

}  // namespace csi
