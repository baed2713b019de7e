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

#include "csi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "csi/errors.hpp"
#include "csi/rng.hpp"

namespace csi {

namespace {

void RequireFinite(const SchedulePoint& p, const char* what) {
  if (!p.IsFinite()) {
    std::ostringstream os;
    os << what << ": non-finite schedule coefficient at t=" << p.t;
    throw EvaluationError(os.str());
  }
}

void RequireScalarProbe(const RegressionModel& m, const FieldProbe& probe) {
  if (probe.y.size() != 1) {
    throw ShapeError("regression oracle: response dimension must be 1");
  }
  if (probe.x.size() != m.k) {
    throw ShapeError("regression oracle: condition dimension mismatch");
  }
}

}  // namespace

double RegressionVariance(const RegressionModel& m, const SchedulePoint& p) {
  const double v = m.noise_sd * m.noise_sd;
  return p.a * p.a + p.b * p.b * v + p.gamma * p.gamma;
}

double RegressionPhi(const RegressionModel& m, const SchedulePoint& p) {
  RequireFinite(p, "regression drift");
  const double v = m.noise_sd * m.noise_sd;
  const double denom = RegressionVariance(m, p);
  if (!(denom > 0.0)) throw EvaluationError("regression drift: zero variance");
  return (p.da * p.a + p.db * p.b * v + p.dgamma * p.gamma) / denom;
}

double RegressionDriftAt(const RegressionModel& m, const SchedulePoint& p,
                         double fx, double y) {
  return RegressionPhi(m, p) * (y - p.b * fx) + p.db * fx;
}

double RegressionScoreAt(const RegressionModel& m, const SchedulePoint& p,
                         double fx, double y) {
  const double denom = RegressionVariance(m, p);
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw EvaluationError("regression score: degenerate variance");
  }
  return -(y - p.b * fx) / denom;
}

double RegressionDrift(const RegressionModel& m, const Schedule& s,
                       const FieldProbe& probe) {
  RequireScalarProbe(m, probe);
  return RegressionDriftAt(m, s.At(probe.t), m.f(probe.x), probe.y[0]);
}

double RegressionScore(const RegressionModel& m, const Schedule& s,
                       const FieldProbe& probe) {
  RequireScalarProbe(m, probe);
  return RegressionScoreAt(m, s.At(probe.t), m.f(probe.x), probe.y[0]);
}

double RegressionDenoiser(const RegressionModel& m, const Schedule& s,
                          const FieldProbe& probe) {
  RequireScalarProbe(m, probe);
  const SchedulePoint p = s.At(probe.t);
  return -p.gamma * RegressionScoreAt(m, p, m.f(probe.x), probe.y[0]);
}

namespace {

double SilvermanBandwidth(std::span<const double> samples, std::size_t d) {
  const std::size_t m = samples.size() / d;
  double mean_sd = 0.0;
  double spread_1d = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += samples[i * d + j];
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = samples[i * d + j] - mean;
      ss += e * e;
    }
    const double sd = std::sqrt(ss / static_cast<double>(m - 1));
    mean_sd += sd / static_cast<double>(d);
    if (d == 1) {
      Vector copy(samples.begin(), samples.end());
      const auto q = [&](double frac) {
        auto it = copy.begin() + static_cast<std::ptrdiff_t>(frac * (m - 1));
        std::nth_element(copy.begin(), it, copy.end());
        return *it;
      };
      const double iqr = q(0.75) - q(0.25);
      spread_1d = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    }
  }
  if (d == 1) return 0.9 * spread_1d * std::pow(static_cast<double>(m), -0.2);
  return mean_sd *
         std::pow(static_cast<double>(m), -1.0 / (static_cast<double>(d) + 4));
}

}  // namespace

McEstimate McConditionalExpectation(const DataSource& src, const Schedule& s,
                                    const FieldProbe& probe,
                                    const McTarget& target,
                                    const McOptions& opts) {
  if (opts.m < 1000) {
    throw ArgumentError("mc oracle: m must be >= 1000");
  }
  const std::size_t d = src.response_dim();
  if (probe.y.size() != d || probe.x.size() != src.condition_dim()) {
    throw ShapeError("mc oracle: probe dimensions do not match data source");
  }
  const SchedulePoint p = s.At(probe.t);
  const std::size_t m = opts.m;

  Vector states(m * d);
  std::vector<Vector> targets(m);
  Vector y0(d), eta(d);
  for (std::size_t i = 0; i < m; ++i) {
    CounterRng ref_rng(opts.seed, Stream::kReference, i);
    CounterRng data_rng(opts.seed, Stream::kData, i);
    CounterRng noise_rng(opts.seed, Stream::kNoise, i);
    const Vector y1 = src.SampleResponse(probe.x, data_rng);
    for (std::size_t j = 0; j < d; ++j) {
      y0[j] = ref_rng.Normal();
      eta[j] = noise_rng.Normal();
    }
    for (std::size_t j = 0; j < d; ++j) {
      states[i * d + j] = p.a * y0[j] + p.b * y1[j] + p.gamma * eta[j];
    }
    targets[i] = target(p, y0, y1, eta);
  }
  const std::size_t out_dim = targets.front().size();

  const double h = opts.bandwidth ? *opts.bandwidth : SilvermanBandwidth(states, d);
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InsufficientSupportError("mc oracle: degenerate kernel bandwidth");
  }

  Vector weights(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double z = (states[i * d + j] - probe.y[j]) / h;
      r2 += z * z;
    }
    weights[i] = std::exp(-0.5 * r2);
    total += weights[i];
  }
  McEstimate est;
  est.m = m;
  est.bandwidth = h;
  est.mean_kernel_weight = total / static_cast<double>(m);
  if (!(est.mean_kernel_weight >= 1e-8)) {
    std::ostringstream os;
    os << "mc oracle: mean kernel weight " << est.mean_kernel_weight
       << " below 1e-8 at the probe";
    throw InsufficientSupportError(os.str());
  }

  auto weighted_mean = [&](auto&& index_range, Vector& out) {
    std::fill(out.begin(), out.end(), 0.0);
    double w_sum = 0.0;
    for (std::size_t i : index_range) {
      w_sum += weights[i];
      for (std::size_t j = 0; j < out_dim; ++j) {
        out[j] += weights[i] * targets[i][j];
      }
    }
    for (double& v : out) v /= w_sum;
  };

  // Only draws with non-negligible weight influence the estimate; the
  // bootstrap resamples within that support.
  std::vector<std::size_t> support;
  const double w_max = *std::max_element(weights.begin(), weights.end());
  for (std::size_t i = 0; i < m; ++i) {
    if (weights[i] > 1e-16 * w_max) support.push_back(i);
  }
  est.value.assign(out_dim, 0.0);
  weighted_mean(support, est.value);

  est.standard_error.assign(out_dim, 0.0);
  if (opts.bootstrap_reps >= 2) {
    CounterRng boot_rng(opts.seed, Stream::kBootstrap);
    std::vector<std::size_t> resample(support.size());
    Vector rep(out_dim);
    Vector sum(out_dim, 0.0), sum_sq(out_dim, 0.0);
    std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
    for (std::size_t r = 0; r < opts.bootstrap_reps; ++r) {
      for (auto& idx : resample) idx = support[pick(boot_rng)];
      weighted_mean(resample, rep);
      for (std::size_t j = 0; j < out_dim; ++j) {
        sum[j] += rep[j];
        sum_sq[j] += rep[j] * rep[j];
      }
    }
    const double reps = static_cast<double>(opts.bootstrap_reps);
    for (std::size_t j = 0; j < out_dim; ++j) {
      const double mean = sum[j] / reps;
      const double var = (sum_sq[j] - reps * mean * mean) / (reps - 1.0);
      est.standard_error[j] = std::sqrt(std::max(var, 0.0));
    }
  }
  return est;
}

McEstimate McConditionalDrift(const DataSource& src, const Schedule& s,
                              const FieldProbe& probe, const McOptions& opts) {
  const SchedulePoint p = s.At(probe.t);
  RequireFinite(p, "mc drift oracle");
  return McConditionalExpectation(
      src, s, probe,
      [](const SchedulePoint& pt, std::span<const double> y0,
         std::span<const double> y1, std::span<const double> eta) {
        Vector v(y0.size());
        for (std::size_t j = 0; j < v.size(); ++j) {
          v[j] = pt.da * y0[j] + pt.db * y1[j] + pt.dgamma * eta[j];
        }
        return v;
      },
      opts);
}

McEstimate McConditionalDenoiser(const DataSource& src, const Schedule& s,
                                 const FieldProbe& probe,
                                 const McOptions& opts) {
  return McConditionalExpectation(
      src, s, probe,
      [](const SchedulePoint&, std::span<const double>,
         std::span<const double>, std::span<const double> eta) {
        return Vector(eta.begin(), eta.end());
      },
      opts);
}

McEstimate McConditionalScore(const DataSource& src, const Schedule& s,
                              const FieldProbe& probe, const McOptions& opts) {
  const double gamma = s.At(probe.t).gamma;
  if (gamma == 0.0) {
    throw DomainError("mc score oracle: gamma(t) = 0, score undefined");
  }
  McEstimate est = McConditionalDenoiser(src, s, probe, opts);
  for (double& v : est.value) v /= -gamma;
  for (double& v : est.standard_error) v /= std::abs(gamma);
  return est;
}

}  // namespace csi
