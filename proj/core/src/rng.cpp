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

#include "csi/rng.hpp"

namespace csi {

std::uint64_t Mix64(std::uint64_t z) {
  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

CounterRng::CounterRng(std::uint64_t seed, Stream stream,
                       std::uint64_t substream)
    : key_(Mix64(Mix64(seed ^ 0x6a09e667f3bcc908ULL) +
                 static_cast<std::uint64_t>(stream) * kGolden) ^
           Mix64(substream + 0x3c6ef372fe94f82bULL)) {}

CounterRng::result_type CounterRng::operator()() {
  const std::uint64_t n = counter_++;
  return Mix64(key_ ^ Mix64(n * kGolden + 0xa54ff53a5f1d36f1ULL));
}

double CounterRng::Uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double CounterRng::Normal() { return normal_(*this); }

}  // namespace csi
