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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "csi/process.hpp"

namespace csi {

// Architecture of a ReLU multilayer perceptron R^{k+d+1} -> R^d fed with
// the concatenation (x, y, t).
//
// The optional shift/scale vectors are fixed (untrained) affine maps: inputs
// are mapped to (in - shift) / scale before the first layer, and raw outputs
// to shift + scale * raw after the last. Empty vectors mean identity.
struct NetConfig {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<std::size_t> hidden_widths = {128, 128, 128};
  // Smooth bound |out| <= B via B * tanh(out / B); off when unset.
  std::optional<double> output_clamp;

  Vector input_shift, input_scale;
  Vector output_shift, output_scale;

  static NetConfig ForField(std::size_t k, std::size_t d,
                            std::vector<std::size_t> hidden = {128, 128, 128});

  // Throws ArgumentError when a width is zero, there is no hidden layer, or
  // the shift/scale vectors have the wrong length or a non-positive scale.
  void Validate() const;
  std::size_t ParamCount() const;
  std::size_t depth() const { return hidden_widths.size(); }

  nlohmann::json ToJson() const;
  static NetConfig FromJson(const nlohmann::json& j);
};

// Weights and biases of every layer, stored contiguously so optimizers and
// serializers can treat them as one flat vector. Layer l maps
// width(l-1) -> width(l); weights are column-major width(l) x width(l-1).
class NetParams {
 public:
  explicit NetParams(NetConfig config);  // all zeros

  const NetConfig& config() const { return config_; }
  std::size_t layer_count() const { return config_.hidden_widths.size() + 1; }
  std::size_t layer_in(std::size_t l) const;
  std::size_t layer_out(std::size_t l) const;

  Eigen::Map<Eigen::MatrixXd> Weight(std::size_t l);
  Eigen::Map<const Eigen::MatrixXd> Weight(std::size_t l) const;
  Eigen::Map<Eigen::VectorXd> Bias(std::size_t l);
  Eigen::Map<const Eigen::VectorXd> Bias(std::size_t l) const;

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  std::size_t size() const { return data_.size(); }

  bool AllFinite() const;

  // Zero-initialized parameters congruent with this one (for gradients).
  NetParams ZerosLike() const { return NetParams(config_); }

 private:
  NetConfig config_;
  std::vector<double> data_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
};

// He-scaled Gaussian weights N(0, 2/fan_in), zero biases.
NetParams InitParams(const NetConfig& config, std::uint64_t seed);

Vector Forward(const NetParams& params, std::span<const double> input);
// inputs: input_dim x n, one sample per column. Returns output_dim x n.
Eigen::MatrixXd ForwardBatch(const NetParams& params,
                             const Eigen::MatrixXd& inputs);

enum class Objective { kDrift, kDenoiser };

// Dense view of a tuple batch: network inputs (x, yt, t) per column and the
// regression target per column. The denoiser risk |eta + f|^2 is stored as
// the target -eta.
struct RegressionBatch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

// Throws ArgumentError on an empty batch and DomainError for a denoiser
// batch containing a tuple with gamma(t) = 0.
RegressionBatch MakeRegressionBatch(std::span<const TrainingTuple> tuples,
                                    Objective objective);

// Mean over columns of |target - f(input)|^2.
double Loss(const NetParams& params, const RegressionBatch& batch);
// Same loss; writes its exact gradient into `grad` (resized as needed).
double LossAndGradient(const NetParams& params, const RegressionBatch& batch,
                       NetParams& grad);

double LossDrift(const NetParams& params, std::span<const TrainingTuple> batch);
double LossDenoiser(const NetParams& params,
                    std::span<const TrainingTuple> batch);
NetParams Gradient(const NetParams& params,
                   std::span<const TrainingTuple> batch, Objective objective);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  explicit AdamState(const NetParams& params, AdamOptions options = {});

  std::uint64_t step = 0;
  AdamOptions options;
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update in place. `lr` overrides options.lr when
// set (learning-rate schedules). Throws NumericError on a non-finite
// gradient entry and ShapeError on incongruent shapes; neither state nor
// params are modified in that case.
void AdamStep(AdamState& state, NetParams& params, const NetParams& grad,
              std::optional<double> lr = std::nullopt);

// "csi-net-v1" checkpoint: one line of JSON header, then param_count
// little-endian IEEE-754 doubles.
struct Checkpoint {
  static constexpr const char* kFormat = "csi-net-v1";

  NetParams params;
  std::string role;  // drift | denoiser
  std::uint64_t seed = 0;
  std::vector<double> loss_history_tail;
  nlohmann::json metadata = nlohmann::json::object();
};

void SaveCheckpoint(std::ostream& os, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(std::istream& is);
void SaveCheckpointFile(const std::string& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpointFile(const std::string& path);

}  // namespace csi
