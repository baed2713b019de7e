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
#include <iosfwd>
#include <span>
#include <vector>

#include "csi/data.hpp"
#include "csi/schedule.hpp"

namespace csi {

// One draw of the interpolation together with its regression targets.
struct TrainingTuple {
  Vector x;
  Vector y0;
  Vector y1;
  Vector eta;
  double t = 0.0;
  double gamma = 0.0;  // gamma(t), kept for the denoiser precondition
  Vector yt;
  Vector drift_target;     // a'(t) y0 + b'(t) y1 + gamma'(t) eta
  Vector denoiser_target;  // eta
  // False when gamma(t) = 0: the denoiser risk is undefined there.
  bool denoiser_usable = false;
};

// a y0 + b y1 + gamma eta, componentwise. Throws ShapeError on mismatch.
Vector SampleYt(const SchedulePoint& point, std::span<const double> y0,
                std::span<const double> y1, std::span<const double> eta);

class TimeMode {
 public:
  static TimeMode Fixed(double t) { return TimeMode(false, t); }
  static TimeMode UniformInterior() { return TimeMode(true, 0.0); }

  bool uniform() const { return uniform_; }
  double t() const { return t_; }

 private:
  TimeMode(bool uniform, double t) : uniform_(uniform), t_(t) {}
  bool uniform_;
  double t_;
};

// Draws n tuples. Tuple i (counting from `first_index`) reads sub-stream i of
// each of the reference, data, noise and time streams, so any slice of a
// batch can be regenerated independently and in any order.
// Fixed times are clamped into the interior for singular schedules; uniform
// times are drawn from [kInteriorClamp, 1 - kInteriorClamp].
std::vector<TrainingTuple> DrawTrainingBatch(const DataSource& src,
                                             const Schedule& s, std::size_t n,
                                             TimeMode t_mode,
                                             std::uint64_t seed,
                                             std::uint64_t first_index = 0);

// n draws of Y_t | X = x (response dimension 1 flattened, otherwise row-major
// n x d). `stream_offset` separates otherwise identical requests.
Vector SampleInterpolation(const DataSource& src, const Schedule& s,
                           std::span<const double> x, double t, std::size_t n,
                           std::uint64_t seed, std::uint64_t stream_offset = 0);

// Columns: t, x_1..x_k, y0_1..d, y1_1..d, eta_1..d, yt_1..d.
void WriteBatchCsv(std::ostream& os, std::span<const TrainingTuple> batch);

}  // namespace csi
