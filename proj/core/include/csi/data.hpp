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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csi/rng.hpp"

namespace csi {

using Vector = std::vector<double>;

// Sampler for the joint law of (X, Y1). The reference Y0 ~ N(0, I_d) and the
// noise eta ~ N(0, I_d) are drawn by the caller from their own streams.
class DataSource {
 public:
  virtual ~DataSource() = default;

  virtual std::size_t condition_dim() const = 0;
  virtual std::size_t response_dim() const = 0;

  virtual Vector SampleCondition(CounterRng& rng) const = 0;
  // Draws Y1 | X = x.
  virtual Vector SampleResponse(std::span<const double> x,
                                CounterRng& rng) const = 0;

  virtual std::string Describe() const = 0;
};

using RegressionFunction = std::function<double(std::span<const double>)>;

// f(x) = |2 + x1^2/3| - |x2| + max{x3^3, x4 exp(x5/2)}, x in R^5.
double RegressionExperimentF(std::span<const double> x);

// Scalar-response regression Y1 = f(X) + noise_sd * eps, eps ~ N(0, 1).
struct RegressionModel {
  std::string f_name;
  RegressionFunction f;
  double noise_sd = 1.0;
  std::size_t k = 5;

  static RegressionModel RegressionExperiment();
  static RegressionModel Linear(Vector coefficients, double intercept = 0.0);
  static RegressionModel Constant(double value, std::size_t k);
};

// Regression data with X ~ Uniform[x_low, x_high]^k.
class RegressionSource final : public DataSource {
 public:
  RegressionSource(RegressionModel model, double x_low, double x_high);

  std::size_t condition_dim() const override { return model_.k; }
  std::size_t response_dim() const override { return 1; }
  Vector SampleCondition(CounterRng& rng) const override;
  Vector SampleResponse(std::span<const double> x,
                        CounterRng& rng) const override;
  std::string Describe() const override;

  const RegressionModel& model() const { return model_; }
  double x_low() const { return x_low_; }
  double x_high() const { return x_high_; }

 private:
  RegressionModel model_;
  double x_low_;
  double x_high_;
};

// Y1 == value regardless of the (uniform, one-dimensional) condition.
class PointMassSource final : public DataSource {
 public:
  explicit PointMassSource(Vector value);

  std::size_t condition_dim() const override { return 1; }
  std::size_t response_dim() const override { return value_.size(); }
  Vector SampleCondition(CounterRng& rng) const override;
  Vector SampleResponse(std::span<const double> x,
                        CounterRng& rng) const override;
  std::string Describe() const override;

 private:
  Vector value_;
};

}  // namespace csi
