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

#include <cstdint>
#include <limits>
#include <random>

namespace csi {

// Named independent streams. Every random quantity in the library is drawn
// from exactly one of these, so adding draws to one stream never shifts
// another.
enum class Stream : std::uint64_t {
  kReference = 1,   // y0
  kData = 2,        // (x, y1)
  kNoise = 3,       // eta
  kTime = 4,        // t for uniform-interior batches
  kNetInit = 5,
  kShuffle = 6,
  kProbe = 7,
  kSamplerInit = 8,   // z0 of generated trajectories
  kSamplerNoise = 9,  // Brownian increments
  kBootstrap = 10,
};

// Counter-based 64-bit generator. Output n is a stateless function of
// (key, n), where the key is derived from (seed, stream, substream); any
// sub-stream can therefore be reconstructed without replaying others.
// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_;
};

std::uint64_t Mix64(std::uint64_t z);

}  // namespace csi
