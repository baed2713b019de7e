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

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "csi/errors.hpp"
#include "csi/schedule.hpp"

namespace csi {
namespace {

constexpr double kPi = std::numbers::pi;

double Central(const Schedule::Fn& f, double t, double h = 1e-6) {
  return (f(t + h) - f(t - h)) / (2.0 * h);
}

class PresetTest : public ::testing::TestWithParam<std::string> {};

TEST_P(PresetTest, DerivativesMatchCentralDifferences) {
  const Schedule s = MakeSchedule(GetParam());
  const auto& fn = s.functions();
  const std::pair<const Schedule::Fn*, const Schedule::Fn*> pairs[] = {
      {&fn.a, &fn.da}, {&fn.b, &fn.db}, {&fn.gamma, &fn.dgamma}};
  for (int i = 1; i <= 101; ++i) {
    const double t = i / 102.0;
    for (const auto& [f, df] : pairs) {
      const double exact = (*df)(t);
      const double fd = Central(*f, t);
      // Central differences at h = 1e-6 carry ~1e-10 roundoff, so the check
      // is relative with a unit floor.
      EXPECT_LE(std::abs(fd - exact), 1e-6 * std::max(1.0, std::abs(exact)))
          << GetParam() << " t=" << t;
    }
  }
}

TEST_P(PresetTest, BoundaryConditionsHold) {
  const Schedule s = MakeSchedule(GetParam());
  const ValidationReport r = ValidateBoundary(s, 1e-12);
  EXPECT_TRUE(r.pass) << r.ToString();
  for (const auto& e : r.entries) EXPECT_LE(e.residual, 1e-12) << e.name;
}

TEST_P(PresetTest, SingleCoefficientMutationFailsValidation) {
  const Schedule s = MakeSchedule(GetParam());
  const auto base = s.functions();
  struct Mutation {
    const char* entry;
    Schedule::Functions fns;
  };
  auto bump_at = [](Schedule::Fn f, double where, double by) {
    return Schedule::Fn([f, where, by](double t) { return f(t) + (t == where ? by : 0.0); });
  };
  std::vector<Mutation> mutations;
  for (double where : {0.0, 1.0}) {
    Schedule::Functions m = base;
    m.a = bump_at(base.a, where, 1e-9);
    mutations.push_back({where == 0.0 ? "a(0)" : "a(1)", m});
    m = base;
    m.b = bump_at(base.b, where, 1e-9);
    mutations.push_back({where == 0.0 ? "b(0)" : "b(1)", m});
    m = base;
    m.gamma = bump_at(base.gamma, where, 1e-9);
    mutations.push_back({where == 0.0 ? "gamma(0)" : "gamma(1)", m});
  }
  for (const auto& mut : mutations) {
    const ValidationReport r = ValidateBoundary(Schedule("mutant", mut.fns), 1e-12);
    EXPECT_FALSE(r.pass) << mut.entry;
    bool found = false;
    for (const auto& e : r.entries) {
      if (e.name == mut.entry) {
        found = true;
        EXPECT_FALSE(e.pass);
        EXPECT_NEAR(e.residual, 1e-9, 1e-15);
      }
    }
    EXPECT_TRUE(found) << mut.entry;
  }
}

TEST_P(PresetTest, InteriorPointsAreFinite) {
  const Schedule s = MakeSchedule(GetParam());
  for (double t : {kInteriorClamp, 0.3, 0.5, 1.0 - kInteriorClamp}) {
    EXPECT_TRUE(s.At(t).IsFinite()) << t;
  }
}

INSTANTIATE_TEST_SUITE_P(AllPresets, PresetTest,
                         ::testing::Values("rectified-flow", "linear-sqrt",
                                           "trig-squared", "trig-unstable",
                                           "paper-7-1"));

TEST(Schedule, PresetNamesListEveryPreset) {
  EXPECT_EQ(SchedulePresetNames().size(), 5u);
  for (const auto& name : SchedulePresetNames()) EXPECT_EQ(MakeSchedule(name).name(), name);
}

TEST(Schedule, UnknownPresetIsConfigError) {
  try {
    MakeSchedule("cosine-magic");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field_path(), "schedule");
  }
}

TEST(Schedule, LinearSqrtAtZero) {
  const SchedulePoint p = EvalSchedule(MakeSchedule("linear-sqrt"), 0.0);
  EXPECT_EQ(p.a, 1.0);
  EXPECT_EQ(p.b, 0.0);
  EXPECT_EQ(p.gamma, 0.0);
  // The noise derivative diverges at the boundary and is flagged as such.
  EXPECT_FALSE(std::isfinite(p.dgamma));
  EXPECT_FALSE(p.IsFinite());
}

TEST(Schedule, LinearSqrtAtHalf) {
  const SchedulePoint p = EvalSchedule(MakeSchedule("linear-sqrt"), 0.5);
  EXPECT_DOUBLE_EQ(p.a, 0.5);
  EXPECT_DOUBLE_EQ(p.b, 0.5);
  EXPECT_NEAR(p.gamma, 0.7071068, 1e-7);
  EXPECT_DOUBLE_EQ(p.da, -1.0);
  EXPECT_DOUBLE_EQ(p.db, 1.0);
  EXPECT_DOUBLE_EQ(p.dgamma, 0.0);
}

TEST(Schedule, SineScheduleAtOne) {
  const SchedulePoint p = EvalSchedule(MakeSchedule("paper-7-1"), 1.0);
  EXPECT_NEAR(p.a, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.b, 1.0);
  EXPECT_DOUBLE_EQ(p.gamma, 0.0);
}

TEST(Schedule, OutOfRangeTimeIsDomainError) {
  const Schedule s = MakeSchedule("linear-sqrt");
  EXPECT_THROW(s.At(-1e-9), DomainError);
  EXPECT_THROW(s.At(1.0 + 1e-9), DomainError);
  EXPECT_THROW(EvalSchedule(s, std::nan("")), DomainError);
}

TEST(Schedule, ClampTimeOnlyForSingularSchedules) {
  const Schedule sing = MakeSchedule("linear-sqrt");
  const Schedule reg = MakeSchedule("paper-7-1");
  EXPECT_TRUE(sing.singular_at_boundary());
  EXPECT_FALSE(reg.singular_at_boundary());
  EXPECT_EQ(sing.ClampTime(0.0), kInteriorClamp);
  EXPECT_EQ(sing.ClampTime(1.0), 1.0 - kInteriorClamp);
  EXPECT_EQ(sing.ClampTime(0.3), 0.3);
  EXPECT_EQ(reg.ClampTime(0.0), 0.0);
  EXPECT_EQ(reg.ClampTime(1.0), 1.0);
}

TEST(Schedule, HasNoise) {
  EXPECT_FALSE(MakeSchedule("rectified-flow").has_noise());
  EXPECT_TRUE(MakeSchedule("linear-sqrt").has_noise());
  EXPECT_TRUE(MakeSchedule("paper-7-1").has_noise());
}

TEST(CapitalA, LinearSqrtIsIdenticallyOne) {
  const Schedule s = MakeSchedule("linear-sqrt");
  EXPECT_NEAR(CapitalA(s, 0.5), 1.0, 1e-15);
  for (int i = 1; i < 100; ++i) EXPECT_NEAR(CapitalA(s, i / 100.0), 1.0, 1e-12);
  // Limit from the right at 0.
  EXPECT_NEAR(CapitalA(s, 1e-8), 1.0, 1e-7);
}

TEST(CapitalA, RectifiedFlowIsOneMinusT) {
  const Schedule s = MakeSchedule("rectified-flow");
  for (double t : {0.01, 0.25, 0.5, 0.9, 1.0}) EXPECT_NEAR(CapitalA(s, t), 1.0 - t, 1e-15);
}

TEST(CapitalA, MatchesDefinitionForTrigPresets) {
  for (const char* name : {"trig-squared", "trig-unstable", "paper-7-1"}) {
    const Schedule s = MakeSchedule(name);
    for (double t : {0.1, 0.4, 0.77}) {
      const SchedulePoint p = s.At(t);
      const double expected =
          p.a * (p.a * p.db - p.da * p.b) + p.gamma * (p.gamma * p.db - p.dgamma * p.b);
      EXPECT_DOUBLE_EQ(CapitalA(s, t), expected) << name;
    }
  }
}

TEST(CapitalA, SineScheduleClosedForm) {
  // With a = cos, b = sin the first term is (pi/2)cos(pi t/2).
  const Schedule s = MakeSchedule("paper-7-1");
  const double t = 0.3;
  const double g = std::log1p(t - t * t);
  const double dg = (1 - 2 * t) / (1 + t - t * t);
  const double expected = kPi / 2 * std::cos(kPi * t / 2) +
                          g * (g * kPi / 2 * std::cos(kPi * t / 2) - dg * std::sin(kPi * t / 2));
  EXPECT_NEAR(CapitalA(s, t), expected, 1e-14);
}

TEST(CapitalA, DomainAndEvaluationErrors) {
  EXPECT_THROW(CapitalA(MakeSchedule("linear-sqrt"), 0.0), DomainError);
  EXPECT_THROW(CapitalA(MakeSchedule("linear-sqrt"), 1.5), DomainError);
  // gamma' is infinite at t = 1 for linear-sqrt.
  EXPECT_THROW(CapitalA(MakeSchedule("linear-sqrt"), 1.0), EvaluationError);
}

TEST(Validation, MutantB1Reports) {
  Schedule::Functions fns = MakeSchedule("linear-sqrt").functions();
  fns.b = [](double t) { return 0.9 * t; };
  const ValidationReport r = ValidateBoundary(Schedule("mutant", fns), 1e-12);
  EXPECT_FALSE(r.pass);
  bool found = false;
  for (const auto& e : r.entries) {
    if (e.name == "b(1)") {
      found = true;
      EXPECT_FALSE(e.pass);
      EXPECT_NEAR(e.residual, 0.1, 1e-15);
    }
  }
  EXPECT_TRUE(found);
  EXPECT_NE(r.ToString().find("b(1) residual 0.1"), std::string::npos) << r.ToString();
}

TEST(Validation, NegativeGammaFails) {
  Schedule::Functions fns = MakeSchedule("trig-squared").functions();
  fns.gamma = [](double t) { return -t * (1 - t); };
  const ValidationReport r = ValidateBoundary(Schedule("negative", fns), 1e-12);
  EXPECT_FALSE(r.pass);
}

TEST(Validation, NonPositiveToleranceIsArgumentError) {
  EXPECT_THROW(ValidateBoundary(MakeSchedule("linear-sqrt"), 0.0), ArgumentError);
}

TEST(Stability, LinearSqrtPasses) {
  const StabilityReport r =
      CheckStabilityT0(MakeSchedule("linear-sqrt"), DefaultStabilityGrid());
  EXPECT_TRUE(r.pass) << r.ToString();
  EXPECT_NEAR(r.decay_exponent_a, 0.5, 0.01);
  EXPECT_NEAR(r.decay_exponent_b, 0.5, 0.01);
  // (1 - a)/gamma = t / sqrt(2t(1-t)).
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    const double t = r.t[i];
    EXPECT_NEAR(r.one_minus_a_over_gamma[i], t / std::sqrt(2 * t * (1 - t)), 1e-12);
  }
}

TEST(Stability, TrigSquaredPasses) {
  EXPECT_TRUE(CheckStabilityT0(MakeSchedule("trig-squared"), DefaultStabilityGrid()).pass);
}

TEST(Stability, TrigUnstableFailsWithLimitHalf) {
  const StabilityReport r =
      CheckStabilityT0(MakeSchedule("trig-unstable"), DefaultStabilityGrid());
  EXPECT_FALSE(r.pass);
  EXPECT_NEAR(r.limit_b, 0.5, 0.01);
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    EXPECT_NEAR(r.b_over_gamma[i], 1.0 / (2.0 * std::cos(kPi * r.t[i] / 2)), 1e-9);
  }
}

TEST(Stability, RectifiedFlowIsEvaluationError) {
  EXPECT_THROW(CheckStabilityT0(MakeSchedule("rectified-flow"), DefaultStabilityGrid()),
               EvaluationError);
}

TEST(Stability, GridPreconditions) {
  const Schedule s = MakeSchedule("linear-sqrt");
  const std::vector<double> short_grid = {0.1, 0.01, 0.001};
  const std::vector<double> increasing = {0.001, 0.01, 0.1, 0.2};
  const std::vector<double> too_large = {0.9, 0.1, 0.01, 0.001};
  EXPECT_THROW(CheckStabilityT0(s, short_grid), ArgumentError);
  EXPECT_THROW(CheckStabilityT0(s, increasing), ArgumentError);
  EXPECT_THROW(CheckStabilityT0(s, too_large), ArgumentError);
}

TEST(Stability, DefaultGridIsDecreasingInHalfOpenInterval) {
  const auto g = DefaultStabilityGrid();
  ASSERT_EQ(g.size(), 23u);
  EXPECT_EQ(g.front(), 0.5);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i], g[i - 1]);
  EXPECT_GT(g.back(), 0.0);
}

}  // namespace
}  // namespace csi
