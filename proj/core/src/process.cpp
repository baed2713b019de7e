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

#include "csi/process.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "csi/errors.hpp"

namespace csi {

Vector SampleYt(const SchedulePoint& p, std::span<const double> y0,
                std::span<const double> y1, std::span<const double> eta) {
  if (y0.size() != y1.size() || y0.size() != eta.size()) {
    std::ostringstream os;
    os << "sample_yt: dimension mismatch (y0 " << y0.size() << ", y1 "
       << y1.size() << ", eta " << eta.size() << ")";
    throw ShapeError(os.str());
  }
  Vector yt(y0.size());
  for (std::size_t i = 0; i < yt.size(); ++i) {
    yt[i] = p.a * y0[i] + p.b * y1[i] + p.gamma * eta[i];
  }
  return yt;
}

namespace {

Vector NormalVector(std::size_t d, CounterRng& rng) {
  Vector v(d);
  for (double& e : v) e = rng.Normal();
  return v;
}

}  // namespace

std::vector<TrainingTuple> DrawTrainingBatch(const DataSource& src,
                                             const Schedule& s, std::size_t n,
                                             TimeMode t_mode,
                                             std::uint64_t seed,
                                             std::uint64_t first_index) {
  if (n == 0) throw ArgumentError("draw_training_batch: n must be >= 1");
  const std::size_t d = src.response_dim();
  const double fixed_t = t_mode.uniform() ? 0.0 : s.ClampTime(t_mode.t());
  std::vector<TrainingTuple> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t index = first_index + i;
    CounterRng ref_rng(seed, Stream::kReference, index);
    CounterRng data_rng(seed, Stream::kData, index);
    CounterRng noise_rng(seed, Stream::kNoise, index);

    TrainingTuple tuple;
    if (t_mode.uniform()) {
      CounterRng time_rng(seed, Stream::kTime, index);
      tuple.t = time_rng.Uniform(kInteriorClamp, 1.0 - kInteriorClamp);
    } else {
      tuple.t = fixed_t;
    }
    const SchedulePoint p = s.At(tuple.t);
    tuple.x = src.SampleCondition(data_rng);
    tuple.y1 = src.SampleResponse(tuple.x, data_rng);
    tuple.y0 = NormalVector(d, ref_rng);
    tuple.eta = NormalVector(d, noise_rng);
    tuple.gamma = p.gamma;
    tuple.yt = SampleYt(p, tuple.y0, tuple.y1, tuple.eta);
    tuple.drift_target.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      tuple.drift_target[j] =
          p.da * tuple.y0[j] + p.db * tuple.y1[j] + p.dgamma * tuple.eta[j];
    }
    tuple.denoiser_target = tuple.eta;
    tuple.denoiser_usable = p.gamma != 0.0;
    batch.push_back(std::move(tuple));
  }
  return batch;
}

Vector SampleInterpolation(const DataSource& src, const Schedule& s,
                           std::span<const double> x, double t, std::size_t n,
                           std::uint64_t seed, std::uint64_t stream_offset) {
  if (x.size() != src.condition_dim()) {
    throw ShapeError("sample_interpolation: condition dimension mismatch");
  }
  const std::size_t d = src.response_dim();
  const SchedulePoint p = s.At(t);
  Vector out;
  out.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t index = stream_offset + i;
    CounterRng ref_rng(seed, Stream::kReference, index);
    CounterRng data_rng(seed, Stream::kData, index);
    CounterRng noise_rng(seed, Stream::kNoise, index);
    const Vector y1 = src.SampleResponse(x, data_rng);
    const Vector y0 = NormalVector(d, ref_rng);
    const Vector eta = NormalVector(d, noise_rng);
    const Vector yt = SampleYt(p, y0, y1, eta);
    out.insert(out.end(), yt.begin(), yt.end());
  }
  return out;
}

void WriteBatchCsv(std::ostream& os, std::span<const TrainingTuple> batch) {
  if (batch.empty()) return;
  const std::size_t k = batch.front().x.size();
  const std::size_t d = batch.front().yt.size();
  os << "t";
  for (std::size_t i = 1; i <= k; ++i) os << ",x_" << i;
  for (const char* name : {"y0", "y1", "eta", "yt"}) {
    for (std::size_t i = 1; i <= d; ++i) os << ',' << name << '_' << i;
  }
  os << '\n';
  const auto old_precision = os.precision(17);
  for (const auto& tuple : batch) {
    os << tuple.t;
    for (const Vector* v : {&tuple.x, &tuple.y0, &tuple.y1, &tuple.eta,
                            &tuple.yt}) {
      for (double e : *v) os << ',' << e;
    }
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace csi
