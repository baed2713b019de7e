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
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "csi/data.hpp"
#include "csi/errors.hpp"
#include "csi/estimators.hpp"
#include "csi/oracle.hpp"
#include "csi/rng.hpp"
#include "csi/schedule.hpp"

namespace csi {
namespace {

RegressionSource Experiment() {
  return RegressionSource(RegressionModel::RegressionExperiment(), -1.0, 3.0);
}

// Responds with NaN, to drive training into divergence.
class NanSource final : public DataSource {
 public:
  std::size_t condition_dim() const override { return 1; }
  std::size_t response_dim() const override { return 1; }
  Vector SampleCondition(CounterRng& rng) const override { return {rng.Uniform()}; }
  Vector SampleResponse(std::span<const double>, CounterRng&) const override {
    return {std::numeric_limits<double>::quiet_NaN()};
  }
  std::string Describe() const override { return "nan"; }
};

TrainConfig QuickTrain(std::uint64_t seed, std::size_t steps = 50) {
  return TrainConfig{.steps = steps, .batch_size = 32, .n_tuples = 2000, .seed = seed};
}

TEST(FieldModel, EvaluateBatchChecksShapes) {
  const FieldModel f = OracleDriftField(RegressionModel::RegressionExperiment(),
                                        MakeSchedule("paper-7-1"));
  EXPECT_EQ(f.kind(), FieldKind::kDrift);
  EXPECT_EQ(f.provenance(), "analytic-oracle");
  EXPECT_EQ(f.descriptor().at("kind"), "drift");
  EXPECT_EQ(f.descriptor().at("provenance"), "analytic-oracle");
  EXPECT_THROW(f.Evaluate(Vector(4, 0.0), Vector{0.0}, 0.5), ShapeError);
  EXPECT_THROW(f.EvaluateBatch(Vector(5, 0.0), Eigen::MatrixXd::Zero(2, 3), 0.5), ShapeError);
  const Eigen::MatrixXd out = f.EvaluateBatch(Vector(5, 0.0), Eigen::MatrixXd::Zero(1, 3), 0.5);
  EXPECT_EQ(out.rows(), 1);
  EXPECT_EQ(out.cols(), 3);
}

TEST(FieldModel, OracleFieldsMatchPointFormulas) {
  const RegressionModel m = RegressionModel::RegressionExperiment();
  const Schedule s = MakeSchedule("trig-squared");
  const FieldProbe p{Vector(5, 1.0), {0.4}, 0.3};
  EXPECT_DOUBLE_EQ(OracleDriftField(m, s).Evaluate(p)[0], RegressionDrift(m, s, p));
  EXPECT_DOUBLE_EQ(OracleScoreField(m, s).Evaluate(p)[0], RegressionScore(m, s, p));
  EXPECT_DOUBLE_EQ(OracleDenoiserField(m, s).Evaluate(p)[0], RegressionDenoiser(m, s, p));
  EXPECT_TRUE(OracleDriftField(m, MakeSchedule("linear-sqrt")).clamps_interior());
  EXPECT_FALSE(OracleDriftField(m, MakeSchedule("paper-7-1")).clamps_interior());
}

TEST(ScoreFromDenoiser, SyntheticDenoiserGivesMinusY) {
  const Schedule s = MakeSchedule("trig-squared");
  const FieldModel kappa = FunctionField(
      FieldKind::kDenoiser, "synthetic", 2, 1,
      [&s](std::span<const double>, std::span<const double> y, double t) {
        return Vector{s.At(t).gamma * y[0]};
      });
  const FieldModel score = ScoreFromDenoiser(kappa, s);
  EXPECT_EQ(score.kind(), FieldKind::kScore);
  EXPECT_EQ(score.provenance(), "derived(score-from-denoiser)");
  for (double t : {0.1, 0.5, 0.9}) {
    for (double y : {-1.5, 2.0}) {
      const FieldProbe p{{0.0, 0.0}, {y}, t};
      EXPECT_NEAR(score.Evaluate(p)[0], -y, 1e-14);
      EXPECT_NEAR(ScoreFromDenoiserAt(kappa, s, p)[0], -y, 1e-14);
    }
  }
}

TEST(ScoreFromDenoiser, GammaZeroIsDomainError) {
  const Schedule s = MakeSchedule("linear-sqrt");
  const FieldModel kappa = ConstantField(FieldKind::kDenoiser, 5, {0.0});
  const FieldProbe p{Vector(5, 0.0), {1.0}, 0.0};
  EXPECT_THROW(ScoreFromDenoiserAt(kappa, s, p), DomainError);
  EXPECT_THROW(ScoreFromDenoiser(kappa, s).Evaluate(p), DomainError);
}

TEST(ScoreFromDrift, OracleDriftGivesOracleScore) {
  const RegressionModel m = RegressionModel::RegressionExperiment();
  const auto src = Experiment();
  for (const char* name : {"linear-sqrt", "paper-7-1"}) {
    const Schedule s = MakeSchedule(name);
    const FieldModel derived = ScoreFromDrift(OracleDriftField(m, s), s);
    EXPECT_EQ(derived.provenance(), "derived(score-from-drift)");
    for (const auto& p : MakeProbeGrid(src, s, 200, 5)) {
      EXPECT_NEAR(derived.Evaluate(p)[0], RegressionScore(m, s, p), 1e-9) << name;
    }
  }
}

TEST(ScoreFromDrift, ZeroDriftOnLinearSqrtGivesMinusY) {
  const Schedule s = MakeSchedule("linear-sqrt");
  const FieldModel zero = ConstantField(FieldKind::kDrift, 5, {0.0});
  for (double t : {0.2, 0.7}) {
    const FieldProbe p{Vector(5, 0.0), {1.25}, t};
    EXPECT_NEAR(ScoreFromDriftAt(zero, s, p)[0], -1.25, 1e-12);
  }
}

TEST(ScoreFromDrift, VanishingCapitalAIsSingular) {
  // a = cos(pi t), b = t, gamma = 0: A(t) = cos(pi t)(cos(pi t) + pi t sin(pi t))
  // vanishes at t = 1/2.
  const double pi = std::numbers::pi;
  const Schedule mutant(
      "mutant",
      {.a = [pi](double t) { return std::cos(pi * t); },
       .b = [](double t) { return t; },
       .gamma = [](double) { return 0.0; },
       .da = [pi](double t) { return -pi * std::sin(pi * t); },
       .db = [](double) { return 1.0; },
       .dgamma = [](double) { return 0.0; }});
  const FieldModel zero = ConstantField(FieldKind::kDrift, 5, {0.0});
  EXPECT_THROW(ScoreFromDriftAt(zero, mutant, {Vector(5, 0.0), {1.0}, 0.5}),
               SingularCoefficientError);
  EXPECT_THROW(ScoreFromDrift(zero, mutant).Evaluate(Vector(5, 0.0), Vector{1.0}, 0.5),
               SingularCoefficientError);
  EXPECT_NO_THROW(ScoreFromDriftAt(zero, mutant, {Vector(5, 0.0), {1.0}, 0.3}));
}

TEST(ProbeGrid, DeterministicInteriorProbes) {
  const auto src = Experiment();
  const Schedule s = MakeSchedule("paper-7-1");
  const auto a = MakeProbeGrid(src, s, 256, 3);
  const auto b = MakeProbeGrid(src, s, 256, 3);
  ASSERT_EQ(a.size(), 256u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_GE(a[i].t, 0.05);
    EXPECT_LE(a[i].t, 0.95);
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].y, b[i].y);
    EXPECT_EQ(a[i].t, b[i].t);
  }
}

TEST(CompareFields, SelfComparisonIsZero) {
  const auto src = Experiment();
  const Schedule s = MakeSchedule("paper-7-1");
  const FieldModel drift = OracleDriftField(src.model(), s);
  const auto probes = MakeProbeGrid(src, s, 64, 1);
  const OracleComparison c = CompareFields(drift, drift, probes);
  EXPECT_EQ(c.mse, 0.0);
  EXPECT_GT(c.oracle_variance, 0.0);
  const OracleComparison off =
      CompareFields(ConstantField(FieldKind::kDrift, 5, {0.0}), drift, probes);
  EXPECT_GT(off.relative(), 0.0);
}

TEST(Fit, SingleStepHasLengthOneHistory) {
  const auto src = Experiment();
  const FitResult r = FitDrift(src, MakeSchedule("paper-7-1"),
                               NetConfig::ForField(5, 1, {16}), QuickTrain(1, 1));
  EXPECT_EQ(r.loss_history.size(), 1u);
  EXPECT_EQ(r.model.kind(), FieldKind::kDrift);
  EXPECT_EQ(r.model.provenance().rfind("fitted-net(", 0), 0u);
}

TEST(Fit, SameSeedGivesBitIdenticalCheckpoints) {
  const auto src = Experiment();
  const Schedule s = MakeSchedule("paper-7-1");
  const NetConfig cfg = NetConfig::ForField(5, 1, {16, 16});
  for (bool fresh : {false, true}) {
    TrainConfig train = QuickTrain(9, 40);
    if (fresh) train.n_tuples = 0;
    std::stringstream a, b;
    SaveCheckpoint(a, FitDrift(src, s, cfg, train).MakeCheckpoint(train));
    SaveCheckpoint(b, FitDrift(src, s, cfg, train).MakeCheckpoint(train));
    EXPECT_EQ(a.str(), b.str());
    std::stringstream c, d;
    SaveCheckpoint(c, FitDenoiser(src, s, cfg, train).MakeCheckpoint(train));
    SaveCheckpoint(d, FitDenoiser(src, s, cfg, train).MakeCheckpoint(train));
    EXPECT_EQ(c.str(), d.str());
  }
}

TEST(Fit, FinalLossNotAboveInitialForExperimentSeeds) {
  const auto src = Experiment();
  for (const char* name : {"paper-7-1", "linear-sqrt"}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const FitResult r = FitDrift(src, MakeSchedule(name), NetConfig::ForField(5, 1, {32, 32}),
                                   QuickTrain(seed, 200));
      EXPECT_LE(r.final_loss, r.initial_loss) << name << " seed " << seed;
    }
  }
}

TEST(Fit, DenoiserOnNoiselessScheduleIsDomainError) {
  const auto src = Experiment();
  EXPECT_THROW(FitDenoiser(src, MakeSchedule("rectified-flow"), NetConfig::ForField(5, 1, {8}),
                           QuickTrain(1, 5)),
               DomainError);
}

TEST(Fit, InvalidArguments) {
  const auto src = Experiment();
  const Schedule s = MakeSchedule("paper-7-1");
  TrainConfig zero_steps = QuickTrain(1, 1);
  zero_steps.steps = 0;
  EXPECT_THROW(FitDrift(src, s, NetConfig::ForField(5, 1, {8}), zero_steps), ArgumentError);
  TrainConfig zero_batch = QuickTrain(1, 1);
  zero_batch.batch_size = 0;
  EXPECT_THROW(FitDrift(src, s, NetConfig::ForField(5, 1, {8}), zero_batch), ArgumentError);
  EXPECT_THROW(FitDrift(src, s, NetConfig::ForField(4, 1, {8}), QuickTrain(1, 1)), ShapeError);
}

TEST(Fit, NonFiniteLossIsTrainingDiverged) {
  const NanSource src;
  for (bool standardize : {false, true}) {
    TrainConfig train = QuickTrain(1, 5);
    train.standardize = standardize;
    try {
      FitDrift(src, MakeSchedule("paper-7-1"), NetConfig::ForField(1, 1, {4}), train);
      FAIL() << "expected divergence";
    } catch (const TrainingDivergedError& e) {
      EXPECT_EQ(e.step(), 1u);
    }
  }
}

TEST(Fit, CheckpointRebuildsTheSameField) {
  const auto src = Experiment();
  const Schedule s = MakeSchedule("linear-sqrt");
  const TrainConfig train = QuickTrain(4, 30);
  const FitResult r = FitDrift(src, s, NetConfig::ForField(5, 1, {16}), train);
  std::stringstream ss;
  SaveCheckpoint(ss, r.MakeCheckpoint(train));
  const Checkpoint ckpt = LoadCheckpoint(ss);
  EXPECT_EQ(ckpt.role, "drift");
  EXPECT_EQ(ckpt.seed, 4u);
  const FieldModel rebuilt = FieldFromCheckpoint(ckpt, 5, s, "roundtrip");
  EXPECT_EQ(rebuilt.provenance(), "fitted-net(roundtrip)");
  EXPECT_TRUE(rebuilt.clamps_interior());
  for (const auto& p : MakeProbeGrid(src, s, 20, 2)) {
    EXPECT_EQ(rebuilt.Evaluate(p)[0], r.model.Evaluate(p)[0]);
  }
}

TEST(Fit, ShortDriftFitBeatsConstantPredictor) {
  const auto src = Experiment();
  const Schedule s = MakeSchedule("paper-7-1");
  const FitResult r = FitDrift(src, s, NetConfig::ForField(5, 1, {64, 64}),
                               TrainConfig{.steps = 1500, .batch_size = 128, .n_tuples = 20000,
                                           .seed = 3, .lr = 3e-3, .lr_final = 1e-4});
  const auto probes = MakeProbeGrid(src, s, 256, 17);
  EXPECT_LT(CompareFields(r.model, OracleDriftField(src.model(), s), probes).relative(), 0.1);
}

}  // namespace
}  // namespace csi
