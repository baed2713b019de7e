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

#include "csi/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "csi/errors.hpp"

namespace csi {

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw ArgumentError("empirical distribution: no samples");
  for (double v : samples_) {
    if (!std::isfinite(v)) {
      throw ArgumentError("empirical distribution: non-finite sample");
    }
  }
  sorted_ = samples_;
  std::sort(sorted_.begin(), sorted_.end());
}

double W2(const EmpiricalDistribution& p, const EmpiricalDistribution& q) {
  if (p.n() != q.n()) {
    throw ArgumentError("w2_1d: sample sizes differ (" + std::to_string(p.n()) +
                        " vs " + std::to_string(q.n()) + ")");
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < p.n(); ++i) {
    const double e = p.sorted()[i] - q.sorted()[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(p.n()));
}

double KsStatistic(const EmpiricalDistribution& p,
                   const EmpiricalDistribution& q) {
  const auto& a = p.sorted();
  const auto& b = q.sorted();
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  // Walk the merged order statistics; ties advance both sides together.
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na -
                                   static_cast<double>(j) / nb));
  }
  return best;
}

double KlHistogram(const EmpiricalDistribution& p,
                   const EmpiricalDistribution& q, std::size_t bins, double lo,
                   double hi) {
  if (bins < 2) throw ArgumentError("kl_hist: bins must be >= 2");
  if (!(lo < hi)) throw ArgumentError("kl_hist: need lo < hi");
  constexpr double kAlpha = 0.5;
  auto histogram = [&](const EmpiricalDistribution& e) {
    std::vector<double> h(bins, kAlpha);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double v : e.samples()) {
      const double pos = std::floor((v - lo) / width);
      const auto cell = static_cast<std::size_t>(
          std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
      h[cell] += 1.0;
    }
    const double total = static_cast<double>(e.n()) + kAlpha * bins;
    for (double& c : h) c /= total;
    return h;
  };
  const auto hp = histogram(p);
  const auto hq = histogram(q);
  double kl = 0.0;
  for (std::size_t i = 0; i < bins; ++i) kl += hp[i] * std::log(hp[i] / hq[i]);
  // Rounding can leave a tiny negative value for near-identical histograms.
  return std::max(kl, 0.0);
}

SummaryStats Summarize(const EmpiricalDistribution& p) {
  if (p.n() < 2) throw ArgumentError("summary_stats: variance needs n >= 2");
  const auto& s = p.samples();
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  double ss = 0.0;
  for (double v : s) ss += (v - mean) * (v - mean);
  return {mean, ss / static_cast<double>(s.size() - 1), s.size()};
}

std::vector<double> NormalQuantileSample(double mean, double sd, std::size_t n) {
  if (n == 0) throw ArgumentError("normal quantile sample: n must be >= 1");
  if (!(sd > 0.0)) throw ArgumentError("normal quantile sample: sd must be > 0");
  const boost::math::normal_distribution<double> law(mean, sd);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = boost::math::quantile(
        law, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
  }
  return out;
}

nlohmann::json MetricRecord::ToJson() const {
  return {{"metric", metric},
          {"t", t},
          {"condition_id", condition_id},
          {"value", value},
          {"n", n}};
}

}  // namespace csi
