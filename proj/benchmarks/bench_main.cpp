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

#include <benchmark/benchmark.h>

#include "csi/data.hpp"
#include "csi/estimators.hpp"
#include "csi/metrics.hpp"
#include "csi/net.hpp"
#include "csi/process.hpp"
#include "csi/rng.hpp"
#include "csi/samplers.hpp"
#include "csi/schedule.hpp"

namespace {

using namespace csi;

const RegressionSource& Source() {
  static const RegressionSource src(RegressionModel::RegressionExperiment(), -1.0, 3.0);
  return src;
}

void BM_ForwardBatch(benchmark::State& state) {
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  const NetParams params = InitParams(NetConfig::ForField(5, 1, {128, 128, 128}), 1);
  const Eigen::MatrixXd in = Eigen::MatrixXd::Random(7, batch);
  for (auto _ : state) benchmark::DoNotOptimize(ForwardBatch(params, in));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBatch)->Arg(256)->Arg(2000);

void BM_LossAndGradient(benchmark::State& state) {
  const NetParams params = InitParams(NetConfig::ForField(5, 1, {128, 128, 128}), 1);
  const auto tuples = DrawTrainingBatch(Source(), MakeSchedule("paper-7-1"), 256,
                                        TimeMode::UniformInterior(), 2);
  const RegressionBatch batch = MakeRegressionBatch(tuples, Objective::kDrift);
  NetParams grad = params.ZerosLike();
  for (auto _ : state) benchmark::DoNotOptimize(LossAndGradient(params, batch, grad));
}
BENCHMARK(BM_LossAndGradient);

void BM_DrawTrainingBatch(benchmark::State& state) {
  const Schedule s = MakeSchedule("paper-7-1");
  for (auto _ : state) {
    benchmark::DoNotOptimize(DrawTrainingBatch(Source(), s, 256, TimeMode::UniformInterior(), 3));
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_DrawTrainingBatch);

void BM_OdeOracle(benchmark::State& state) {
  const Schedule s = MakeSchedule("paper-7-1");
  const FieldModel drift = OracleDriftField(Source().model(), s);
  SamplerSpec spec;
  spec.method = SamplerMethod::kOdeEuler;
  spec.steps = 1000;
  spec.seed = 4;
  const Vector x(5, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(OdeFlowSample(drift, x, 500, spec));
  state.SetItemsProcessed(state.iterations() * 500 * 1000);
}
BENCHMARK(BM_OdeOracle);

void BM_SdeOracle(benchmark::State& state) {
  const Schedule s = MakeSchedule("paper-7-1");
  const FieldModel drift = OracleDriftField(Source().model(), s);
  const FieldModel score = OracleScoreField(Source().model(), s);
  SamplerSpec spec;
  spec.method = SamplerMethod::kSdeEulerMaruyama;
  spec.steps = 1000;
  spec.seed = 5;
  spec.u = UPreset("quartic", &s);
  const Vector x(5, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(SdeDiffusionSample(drift, score, x, 500, spec));
  state.SetItemsProcessed(state.iterations() * 500 * 1000);
}
BENCHMARK(BM_SdeOracle);

void BM_KsStatistic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(6, Stream::kProbe);
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = rng.Normal();
  for (auto& v : b) v = rng.Normal();
  const EmpiricalDistribution p(a), q(b);
  for (auto _ : state) benchmark::DoNotOptimize(KsStatistic(p, q));
}
BENCHMARK(BM_KsStatistic)->Arg(5000)->Arg(100000);

void BM_W2(benchmark::State& state) {
  CounterRng rng(7, Stream::kProbe);
  std::vector<double> a(5000), b(5000);
  for (auto& v : a) v = rng.Normal();
  for (auto& v : b) v = rng.Normal();
  const EmpiricalDistribution p(a), q(b);
  for (auto _ : state) benchmark::DoNotOptimize(W2(p, q));
}
BENCHMARK(BM_W2);

}  // namespace

BENCHMARK_MAIN();
