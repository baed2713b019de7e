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

#include "csi/data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csi/errors.hpp"

namespace csi {

double RegressionExperimentF(std::span<const double> x) {
  if (x.size() != 5) {
    throw ShapeError("regression function expects a 5-dimensional condition");
  }
  return std::abs(2.0 + x[0] * x[0] / 3.0) - std::abs(x[1]) +
         std::max(x[2] * x[2] * x[2], x[3] * std::exp(x[4] / 2.0));
}

RegressionModel RegressionModel::RegressionExperiment() {
  return {.f_name = "paper-7-1-f",
          .f = RegressionExperimentF,
          .noise_sd = 1.0,
          .k = 5};
}

RegressionModel RegressionModel::Linear(Vector coefficients, double intercept) {
  const std::size_t k = coefficients.size();
  if (k == 0) throw ArgumentError("linear regression needs >= 1 coefficient");
  return {.f_name = "linear",
          .f =
              [c = std::move(coefficients), intercept](std::span<const double> x) {
                if (x.size() != c.size()) {
                  throw ShapeError("linear regression: condition dimension");
                }
                double v = intercept;
                for (std::size_t i = 0; i < c.size(); ++i) v += c[i] * x[i];
                return v;
              },
          .noise_sd = 1.0,
          .k = k};
}

RegressionModel RegressionModel::Constant(double value, std::size_t k) {
  if (k == 0) throw ArgumentError("condition dimension must be >= 1");
  return {.f_name = "custom-constant",
          .f = [value](std::span<const double>) { return value; },
          .noise_sd = 1.0,
          .k = k};
}

RegressionSource::RegressionSource(RegressionModel model, double x_low,
                                   double x_high)
    : model_(std::move(model)), x_low_(x_low), x_high_(x_high) {
  if (!(x_low < x_high)) {
    throw ArgumentError("regression source: need x_low < x_high");
  }
  if (!(model_.noise_sd >= 0.0)) {
    throw ArgumentError("regression source: noise_sd must be >= 0");
  }
}

Vector RegressionSource::SampleCondition(CounterRng& rng) const {
  Vector x(model_.k);
  for (double& v : x) v = rng.Uniform(x_low_, x_high_);
  return x;
}

Vector RegressionSource::SampleResponse(std::span<const double> x,
                                        CounterRng& rng) const {
  return {model_.f(x) + model_.noise_sd * rng.Normal()};
}

std::string RegressionSource::Describe() const {
  std::ostringstream os;
  os << "regression(f=" << model_.f_name << ", noise_sd=" << model_.noise_sd
     << ", X~U[" << x_low_ << "," << x_high_ << "]^" << model_.k << ")";
  return os.str();
}

PointMassSource::PointMassSource(Vector value) : value_(std::move(value)) {
  if (value_.empty()) throw ArgumentError("point mass needs dimension >= 1");
}

Vector PointMassSource::SampleCondition(CounterRng& rng) const {
  return {rng.Uniform()};
}

Vector PointMassSource::SampleResponse(std::span<const double>,
                                       CounterRng&) const {
  return value_;
}

std::string PointMassSource::Describe() const {
  std::ostringstream os;
  os << "point-mass(d=" << value_.size() << ")";
  return os.str();
}

}  // namespace csi
