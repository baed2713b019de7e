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
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace csi {

// A one-dimensional sample with its order statistics cached.
class EmpiricalDistribution {
 public:
  // ArgumentError for an empty sample or non-finite values.
  explicit EmpiricalDistribution(std::vector<double> samples);

  std::size_t n() const { return samples_.size(); }
  const std::vector<double>& samples() const { return samples_; }
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> samples_;
  std::vector<double> sorted_;
};

// Quantile-coupling 2-Wasserstein distance between equal-size samples.
double W2(const EmpiricalDistribution& p, const EmpiricalDistribution& q);

// Two-sample Kolmogorov-Smirnov statistic sup |F_p - F_q|.
double KsStatistic(const EmpiricalDistribution& p, const EmpiricalDistribution& q);

// KL(p || q) between histograms on `bins` equal cells of [lo, hi], with
// values outside clipped into the edge cells and 0.5 added to every count.
double KlHistogram(const EmpiricalDistribution& p, const EmpiricalDistribution& q,
                   std::size_t bins, double lo, double hi);

struct SummaryStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  std::size_t n = 0;
};

// ArgumentError when n < 2 (variance unavailable).
SummaryStats Summarize(const EmpiricalDistribution& p);

// Deterministic stand-in for N(mean, sd^2) with n points: the quantiles at
// (i + 0.5) / n. Used to compare samples against an analytic target law.
std::vector<double> NormalQuantileSample(double mean, double sd, std::size_t n);

// Record of the metric report format {metric, t, condition_id, value, n}.
struct MetricRecord {
  std::string metric;
  double t = 0.0;
  std::string condition_id;
  double value = 0.0;
  std::size_t n = 0;

  nlohmann::json ToJson() const;
};

}  // namespace csi
