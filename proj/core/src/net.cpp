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

#include "csi/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "csi/errors.hpp"
#include "csi/rng.hpp"

namespace csi {

NetConfig NetConfig::ForField(std::size_t k, std::size_t d,
                              std::vector<std::size_t> hidden) {
  NetConfig cfg;
  cfg.input_dim = k + d + 1;
  cfg.output_dim = d;
  cfg.hidden_widths = std::move(hidden);
  return cfg;
}

void NetConfig::Validate() const {
  if (input_dim == 0 || output_dim == 0) {
    throw ArgumentError("net config: input and output dims must be >= 1");
  }
  if (hidden_widths.empty()) {
    throw ArgumentError("net config: need at least one hidden layer");
  }
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw ArgumentError("net config: hidden widths must be >= 1");
  }
  if (output_clamp && !(*output_clamp > 0.0)) {
    throw ArgumentError("net config: output_clamp must be > 0");
  }
  auto check_affine = [](const Vector& shift, const Vector& scale,
                         std::size_t dim, const char* name) {
    if (shift.empty() && scale.empty()) return;
    if (shift.size() != dim || scale.size() != dim) {
      throw ArgumentError(std::string("net config: ") + name +
                          " shift/scale length mismatch");
    }
    for (double s : scale) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw ArgumentError(std::string("net config: ") + name +
                            " scale must be positive");
      }
    }
  };
  check_affine(input_shift, input_scale, input_dim, "input");
  check_affine(output_shift, output_scale, output_dim, "output");
}

std::size_t NetConfig::ParamCount() const {
  std::size_t count = 0;
  std::size_t in = input_dim;
  for (std::size_t w : hidden_widths) {
    count += w * in + w;
    in = w;
  }
  return count + output_dim * in + output_dim;
}

nlohmann::json NetConfig::ToJson() const {
  nlohmann::json j;
  j["input_dim"] = input_dim;
  j["output_dim"] = output_dim;
  j["hidden_widths"] = hidden_widths;
  j["output_clamp"] =
      output_clamp ? nlohmann::json(*output_clamp) : nlohmann::json(nullptr);
  j["input_shift"] = input_shift;
  j["input_scale"] = input_scale;
  j["output_shift"] = output_shift;
  j["output_scale"] = output_scale;
  return j;
}

NetConfig NetConfig::FromJson(const nlohmann::json& j) {
  NetConfig cfg;
  cfg.input_dim = j.at("input_dim").get<std::size_t>();
  cfg.output_dim = j.at("output_dim").get<std::size_t>();
  cfg.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  if (j.contains("output_clamp") && !j["output_clamp"].is_null()) {
    cfg.output_clamp = j["output_clamp"].get<double>();
  }
  cfg.input_shift = j.value("input_shift", Vector{});
  cfg.input_scale = j.value("input_scale", Vector{});
  cfg.output_shift = j.value("output_shift", Vector{});
  cfg.output_scale = j.value("output_scale", Vector{});
  cfg.Validate();
  return cfg;
}

NetParams::NetParams(NetConfig config) : config_(std::move(config)) {
  config_.Validate();
  data_.assign(config_.ParamCount(), 0.0);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    weight_offset_.push_back(offset);
    offset += layer_out(l) * layer_in(l);
    bias_offset_.push_back(offset);
    offset += layer_out(l);
  }
}

std::size_t NetParams::layer_in(std::size_t l) const {
  return l == 0 ? config_.input_dim : config_.hidden_widths[l - 1];
}

std::size_t NetParams::layer_out(std::size_t l) const {
  return l + 1 == layer_count() ? config_.output_dim : config_.hidden_widths[l];
}

Eigen::Map<Eigen::MatrixXd> NetParams::Weight(std::size_t l) {
  return {data_.data() + weight_offset_[l],
          static_cast<Eigen::Index>(layer_out(l)),
          static_cast<Eigen::Index>(layer_in(l))};
}

Eigen::Map<const Eigen::MatrixXd> NetParams::Weight(std::size_t l) const {
  return {data_.data() + weight_offset_[l],
          static_cast<Eigen::Index>(layer_out(l)),
          static_cast<Eigen::Index>(layer_in(l))};
}

Eigen::Map<Eigen::VectorXd> NetParams::Bias(std::size_t l) {
  return {data_.data() + bias_offset_[l],
          static_cast<Eigen::Index>(layer_out(l))};
}

Eigen::Map<const Eigen::VectorXd> NetParams::Bias(std::size_t l) const {
  return {data_.data() + bias_offset_[l],
          static_cast<Eigen::Index>(layer_out(l))};
}

bool NetParams::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

NetParams InitParams(const NetConfig& config, std::uint64_t seed) {
  NetParams params(config);
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    CounterRng rng(seed, Stream::kNetInit, l);
    const double sd = std::sqrt(2.0 / static_cast<double>(params.layer_in(l)));
    auto w = params.Weight(l);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = sd * rng.Normal();
    }
  }
  return params;
}

namespace {

void CheckInputRows(const NetParams& params, Eigen::Index rows) {
  if (static_cast<std::size_t>(rows) != params.config().input_dim) {
    std::ostringstream os;
    os << "net forward: input length " << rows << " != input_dim "
       << params.config().input_dim;
    throw ShapeError(os.str());
  }
}

Eigen::MatrixXd StandardizeInputs(const NetConfig& cfg,
                                  const Eigen::MatrixXd& inputs) {
  if (cfg.input_shift.empty()) return inputs;
  const Eigen::Map<const Eigen::VectorXd> shift(
      cfg.input_shift.data(), static_cast<Eigen::Index>(cfg.input_dim));
  const Eigen::Map<const Eigen::VectorXd> scale(
      cfg.input_scale.data(), static_cast<Eigen::Index>(cfg.input_dim));
  return (inputs.colwise() - shift).array().colwise() / scale.array();
}

// Hidden activations are kept for backprop: acts[0] is the standardized
// input, acts[l+1] the output of hidden layer l.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> acts;
  Eigen::MatrixXd output;
};

ForwardTrace Trace(const NetParams& params, const Eigen::MatrixXd& inputs) {
  CheckInputRows(params, inputs.rows());
  const NetConfig& cfg = params.config();
  const std::size_t layers = params.layer_count();
  ForwardTrace trace;
  trace.acts.reserve(layers);
  trace.acts.push_back(StandardizeInputs(cfg, inputs));
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    Eigen::MatrixXd z = params.Weight(l) * trace.acts.back();
    z.colwise() += params.Bias(l);
    trace.acts.push_back(z.cwiseMax(0.0));
  }
  Eigen::MatrixXd out = params.Weight(layers - 1) * trace.acts.back();
  out.colwise() += params.Bias(layers - 1);
  if (!cfg.output_shift.empty()) {
    const Eigen::Map<const Eigen::VectorXd> shift(
        cfg.output_shift.data(), static_cast<Eigen::Index>(cfg.output_dim));
    const Eigen::Map<const Eigen::VectorXd> scale(
        cfg.output_scale.data(), static_cast<Eigen::Index>(cfg.output_dim));
    out = (out.array().colwise() * scale.array()).matrix();
    out.colwise() += shift;
  }
  if (cfg.output_clamp) {
    const double bound = *cfg.output_clamp;
    out = (bound * (out.array() / bound).tanh()).matrix();
  }
  trace.output = std::move(out);
  return trace;
}

}  // namespace

Eigen::MatrixXd ForwardBatch(const NetParams& params,
                             const Eigen::MatrixXd& inputs) {
  return Trace(params, inputs).output;
}

Vector Forward(const NetParams& params, std::span<const double> input) {
  CheckInputRows(params, static_cast<Eigen::Index>(input.size()));
  Eigen::MatrixXd in = Eigen::Map<const Eigen::MatrixXd>(
      input.data(), static_cast<Eigen::Index>(input.size()), 1);
  const Eigen::MatrixXd out = ForwardBatch(params, in);
  return Vector(out.data(), out.data() + out.size());
}

RegressionBatch MakeRegressionBatch(std::span<const TrainingTuple> tuples,
                                    Objective objective) {
  if (tuples.empty()) throw ArgumentError("empty training batch");
  const std::size_t k = tuples.front().x.size();
  const std::size_t d = tuples.front().yt.size();
  const auto n = static_cast<Eigen::Index>(tuples.size());
  RegressionBatch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(k + d + 1), n);
  batch.targets.resize(static_cast<Eigen::Index>(d), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const TrainingTuple& tup = tuples[static_cast<std::size_t>(c)];
    if (tup.x.size() != k || tup.yt.size() != d) {
      throw ShapeError("training batch: inconsistent tuple dimensions");
    }
    if (objective == Objective::kDenoiser && !tup.denoiser_usable) {
      std::ostringstream os;
      os << "denoiser risk undefined: gamma(t)=0 at t=" << tup.t;
      throw DomainError(os.str());
    }
    Eigen::Index r = 0;
    for (double v : tup.x) batch.inputs(r++, c) = v;
    for (double v : tup.yt) batch.inputs(r++, c) = v;
    batch.inputs(r, c) = tup.t;
    for (std::size_t j = 0; j < d; ++j) {
      batch.targets(static_cast<Eigen::Index>(j), c) =
          objective == Objective::kDrift ? tup.drift_target[j]
                                         : -tup.denoiser_target[j];
    }
  }
  return batch;
}

double Loss(const NetParams& params, const RegressionBatch& batch) {
  if (batch.size() == 0) throw ArgumentError("empty training batch");
  const Eigen::MatrixXd out = ForwardBatch(params, batch.inputs);
  return (batch.targets - out).squaredNorm() / static_cast<double>(batch.size());
}

double LossAndGradient(const NetParams& params, const RegressionBatch& batch,
                       NetParams& grad) {
  if (batch.size() == 0) throw ArgumentError("empty training batch");
  if (grad.size() != params.size()) grad = params.ZerosLike();
  const NetConfig& cfg = params.config();
  const ForwardTrace trace = Trace(params, batch.inputs);
  const double n = static_cast<double>(batch.size());
  const Eigen::MatrixXd residual = batch.targets - trace.output;
  const double loss = residual.squaredNorm() / n;

  // d loss / d output
  Eigen::MatrixXd delta = (-2.0 / n) * residual;
  if (cfg.output_clamp) {
    const double bound = *cfg.output_clamp;
    delta.array() *= 1.0 - (trace.output.array() / bound).square();
  }
  if (!cfg.output_scale.empty()) {
    const Eigen::Map<const Eigen::VectorXd> scale(
        cfg.output_scale.data(), static_cast<Eigen::Index>(cfg.output_dim));
    delta.array().colwise() *= scale.array();
  }

  for (std::size_t l = params.layer_count(); l-- > 0;) {
    const Eigen::MatrixXd& input = trace.acts[l];
    grad.Weight(l).noalias() = delta * input.transpose();
    grad.Bias(l) = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = params.Weight(l).transpose() * delta;
    // ReLU'(z) = 1 for z > 0 and 0 otherwise, including z = 0.
    back.array() *= (input.array() > 0.0).cast<double>();
    delta = std::move(back);
  }
  return loss;
}

double LossDrift(const NetParams& params, std::span<const TrainingTuple> batch) {
  return Loss(params, MakeRegressionBatch(batch, Objective::kDrift));
}

double LossDenoiser(const NetParams& params,
                    std::span<const TrainingTuple> batch) {
  return Loss(params, MakeRegressionBatch(batch, Objective::kDenoiser));
}

NetParams Gradient(const NetParams& params,
                   std::span<const TrainingTuple> batch, Objective objective) {
  NetParams grad = params.ZerosLike();
  LossAndGradient(params, MakeRegressionBatch(batch, objective), grad);
  return grad;
}

AdamState::AdamState(const NetParams& params, AdamOptions opts)
    : options(opts), m(params.size(), 0.0), v(params.size(), 0.0) {}

void AdamStep(AdamState& state, NetParams& params, const NetParams& grad,
              std::optional<double> lr) {
  if (grad.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam: gradient/moment shapes do not match parameters");
  }
  const auto g = grad.flat();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      std::ostringstream os;
      os << "adam: non-finite gradient entry at index " << i;
      throw NumericError(os.str());
    }
  }
  const AdamOptions& o = state.options;
  const double rate = lr.value_or(o.lr);
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  auto p = params.flat();
  for (std::size_t i = 0; i < g.size(); ++i) {
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * g[i];
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    p[i] -= rate * m_hat / (std::sqrt(v_hat) + o.eps);
  }
}

namespace {

std::uint64_t ToLittleEndian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
    return r;
  }
  return v;
}

}  // namespace

void SaveCheckpoint(std::ostream& os, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = Checkpoint::kFormat;
  header["role"] = ckpt.role;
  header["seed"] = ckpt.seed;
  header["config"] = ckpt.params.config().ToJson();
  header["param_count"] = ckpt.params.size();
  header["loss_history_tail"] = ckpt.loss_history_tail;
  header["metadata"] = ckpt.metadata;
  os << header.dump() << '\n';
  for (double v : ckpt.params.flat()) {
    const std::uint64_t bits = ToLittleEndian(std::bit_cast<std::uint64_t>(v));
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    os.write(bytes, 8);
  }
  if (!os) throw IoError("checkpoint: write failed");
}

Checkpoint LoadCheckpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("checkpoint: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (header.value("format", "") != Checkpoint::kFormat) {
    throw IoError("checkpoint: unsupported format '" +
                  header.value("format", "") + "'");
  }
  try {
    NetParams params(NetConfig::FromJson(header.at("config")));
    if (header.at("param_count").get<std::size_t>() != params.size()) {
      throw IoError("checkpoint: param_count does not match config");
    }
    for (double& v : params.flat()) {
      char bytes[8];
      if (!is.read(bytes, 8)) throw IoError("checkpoint: truncated payload");
      std::uint64_t bits;
      std::memcpy(&bits, bytes, 8);
      v = std::bit_cast<double>(ToLittleEndian(bits));
    }
    return Checkpoint{
        .params = std::move(params),
        .role = header.value("role", ""),
        .seed = header.value("seed", std::uint64_t{0}),
        .loss_history_tail = header.value("loss_history_tail", std::vector<double>{}),
        .metadata = header.value("metadata", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad header field: ") + e.what());
  } catch (const ArgumentError& e) {
    throw IoError(std::string("checkpoint: bad network config: ") + e.what());
  }
}

void SaveCheckpointFile(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  SaveCheckpoint(os, ckpt);
}

Checkpoint LoadCheckpointFile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return LoadCheckpoint(is);
}

}  // namespace csi
