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

#include "csi/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "csi/errors.hpp"
#include "csi/hash.hpp"
#include "csi/process.hpp"
#include "csi/rng.hpp"

namespace csi {

std::string HexId(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* ToString(FieldKind kind) {
  switch (kind) {
    case FieldKind::kDrift: return "drift";
    case FieldKind::kDenoiser: return "denoiser";
    case FieldKind::kScore: return "score";
  }
  return "?";
}

FieldModel::FieldModel(FieldKind kind, std::string provenance,
                       std::size_t condition_dim, std::size_t response_dim,
                       BatchEvaluator evaluator, bool clamps_interior,
                       nlohmann::json descriptor)
    : kind_(kind),
      provenance_(std::move(provenance)),
      condition_dim_(condition_dim),
      response_dim_(response_dim),
      evaluator_(std::make_shared<const BatchEvaluator>(std::move(evaluator))),
      clamps_interior_(clamps_interior),
      descriptor_(std::move(descriptor)) {
  descriptor_["kind"] = ToString(kind_);
  descriptor_["provenance"] = provenance_;
}

Eigen::MatrixXd FieldModel::EvaluateBatch(std::span<const double> x,
                                          const Eigen::MatrixXd& states,
                                          double t) const {
  if (x.size() != condition_dim_ ||
      static_cast<std::size_t>(states.rows()) != response_dim_) {
    std::ostringstream os;
    os << ToString(kind_) << " field: expected condition dim " << condition_dim_
       << " and state dim " << response_dim_ << ", got " << x.size() << " and "
       << states.rows();
    throw ShapeError(os.str());
  }
  Eigen::MatrixXd out(states.rows(), states.cols());
  (*evaluator_)(x, states, t, out);
  return out;
}

Vector FieldModel::Evaluate(std::span<const double> x,
                            std::span<const double> y, double t) const {
  Eigen::MatrixXd states = Eigen::Map<const Eigen::MatrixXd>(
      y.data(), static_cast<Eigen::Index>(y.size()), 1);
  const Eigen::MatrixXd out = EvaluateBatch(x, states, t);
  return Vector(out.data(), out.data() + out.size());
}

Vector FieldModel::Evaluate(const FieldProbe& probe) const {
  return Evaluate(probe.x, probe.y, probe.t);
}

namespace {

nlohmann::json AnalyticDescriptor(const RegressionModel& m, const Schedule& s) {
  return {{"schedule", s.name()},
          {"model", {{"f", m.f_name}, {"noise_sd", m.noise_sd}, {"k", m.k}}}};
}

void RequireScalar(const Eigen::MatrixXd& states) {
  if (states.rows() != 1) {
    throw ShapeError("regression oracle fields are scalar-response");
  }
}

}  // namespace

FieldModel OracleDriftField(const RegressionModel& m, const Schedule& s) {
  return FieldModel(
      FieldKind::kDrift, "analytic-oracle", m.k, 1,
      [m, s](std::span<const double> x, const Eigen::MatrixXd& states, double t,
             Eigen::MatrixXd& out) {
        RequireScalar(states);
        const SchedulePoint p = s.At(t);
        const double fx = m.f(x);
        const double phi = RegressionPhi(m, p);
        out = (phi * (states.array() - p.b * fx) + p.db * fx).matrix();
      },
      s.singular_at_boundary(), AnalyticDescriptor(m, s));
}

FieldModel OracleScoreField(const RegressionModel& m, const Schedule& s) {
  return FieldModel(
      FieldKind::kScore, "analytic-oracle", m.k, 1,
      [m, s](std::span<const double> x, const Eigen::MatrixXd& states, double t,
             Eigen::MatrixXd& out) {
        RequireScalar(states);
        const SchedulePoint p = s.At(t);
        const double fx = m.f(x);
        const double var = RegressionVariance(m, p);
        if (!(var > 0.0)) throw EvaluationError("regression score: zero variance");
        out = (-(states.array() - p.b * fx) / var).matrix();
      },
      s.singular_at_boundary(), AnalyticDescriptor(m, s));
}

FieldModel OracleDenoiserField(const RegressionModel& m, const Schedule& s) {
  return FieldModel(
      FieldKind::kDenoiser, "analytic-oracle", m.k, 1,
      [m, s](std::span<const double> x, const Eigen::MatrixXd& states, double t,
             Eigen::MatrixXd& out) {
        RequireScalar(states);
        const SchedulePoint p = s.At(t);
        const double fx = m.f(x);
        const double var = RegressionVariance(m, p);
        if (!(var > 0.0)) throw EvaluationError("regression denoiser: zero variance");
        out = (p.gamma * (states.array() - p.b * fx) / var).matrix();
      },
      s.singular_at_boundary(), AnalyticDescriptor(m, s));
}

FieldModel ConstantField(FieldKind kind, std::size_t condition_dim,
                         Vector value) {
  const std::size_t d = value.size();
  nlohmann::json desc = {{"value", value}};
  return FieldModel(
      kind, "constant", condition_dim, d,
      [v = std::move(value)](std::span<const double>,
                             const Eigen::MatrixXd& states, double,
                             Eigen::MatrixXd& out) {
        const Eigen::Map<const Eigen::VectorXd> col(
            v.data(), static_cast<Eigen::Index>(v.size()));
        out = col.replicate(1, states.cols());
      },
      false, std::move(desc));
}

FieldModel FunctionField(FieldKind kind, std::string provenance,
                         std::size_t condition_dim, std::size_t response_dim,
                         PointFunction fn, bool clamps_interior) {
  return FieldModel(
      kind, std::move(provenance), condition_dim, response_dim,
      [fn = std::move(fn)](std::span<const double> x,
                           const Eigen::MatrixXd& states, double t,
                           Eigen::MatrixXd& out) {
        const auto d = static_cast<std::size_t>(states.rows());
        for (Eigen::Index c = 0; c < states.cols(); ++c) {
          const Vector v =
              fn(x, std::span<const double>(states.col(c).data(), d), t);
          if (v.size() != d) throw ShapeError("function field: output size");
          for (std::size_t j = 0; j < d; ++j) {
            out(static_cast<Eigen::Index>(j), c) = v[j];
          }
        }
      },
      clamps_interior);
}

FieldModel NetField(FieldKind kind, std::shared_ptr<const NetParams> params,
                    std::size_t condition_dim, std::string id,
                    bool clamps_interior) {
  const NetConfig& cfg = params->config();
  if (cfg.input_dim != condition_dim + cfg.output_dim + 1) {
    throw ShapeError("net field: input_dim must equal k + d + 1");
  }
  const std::size_t d = cfg.output_dim;
  return FieldModel(
      kind, "fitted-net(" + id + ")", condition_dim, d,
      [params, condition_dim, d](std::span<const double> x,
                                 const Eigen::MatrixXd& states, double t,
                                 Eigen::MatrixXd& out) {
        const auto k = static_cast<Eigen::Index>(condition_dim);
        Eigen::MatrixXd inputs(k + static_cast<Eigen::Index>(d) + 1,
                               states.cols());
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), k);
        inputs.topRows(k) = xv.replicate(1, states.cols());
        inputs.middleRows(k, static_cast<Eigen::Index>(d)) = states;
        inputs.bottomRows(1).setConstant(t);
        out = ForwardBatch(*params, inputs);
      },
      clamps_interior, {{"checkpoint", id}});
}

FieldModel ScoreFromDenoiser(const FieldModel& denoiser, const Schedule& s) {
  if (denoiser.kind() != FieldKind::kDenoiser) {
    throw ArgumentError("score_from_denoiser needs a denoiser field");
  }
  nlohmann::json desc = {{"schedule", s.name()},
                         {"source", denoiser.descriptor()}};
  return FieldModel(
      FieldKind::kScore, "derived(score-from-denoiser)",
      denoiser.condition_dim(), denoiser.response_dim(),
      [denoiser, s](std::span<const double> x, const Eigen::MatrixXd& states,
                    double t, Eigen::MatrixXd& out) {
        const double gamma = s.At(t).gamma;
        if (gamma == 0.0 || !std::isfinite(gamma)) {
          std::ostringstream os;
          os << "score from denoiser: gamma(" << t << ") = " << gamma;
          throw DomainError(os.str());
        }
        out = denoiser.EvaluateBatch(x, states, t) / -gamma;
      },
      denoiser.clamps_interior() || s.singular_at_boundary(), std::move(desc));
}

FieldModel ScoreFromDrift(const FieldModel& drift, const Schedule& s) {
  if (drift.kind() != FieldKind::kDrift) {
    throw ArgumentError("score_from_drift needs a drift field");
  }
  nlohmann::json desc = {{"schedule", s.name()}, {"source", drift.descriptor()}};
  return FieldModel(
      FieldKind::kScore, "derived(score-from-drift)", drift.condition_dim(),
      drift.response_dim(),
      [drift, s](std::span<const double> x, const Eigen::MatrixXd& states,
                 double t, Eigen::MatrixXd& out) {
        const SchedulePoint p = s.At(t);
        const double A = CapitalA(p);
        if (!(std::abs(A) >= kSingularCoefficientTol)) {
          std::ostringstream os;
          os << "score from drift: |A(" << t << ")| = " << std::abs(A)
             << " < " << kSingularCoefficientTol;
          throw SingularCoefficientError(os.str());
        }
        out = (p.b / A) * drift.EvaluateBatch(x, states, t) - (p.db / A) * states;
      },
      drift.clamps_interior() || s.singular_at_boundary(), std::move(desc));
}

Vector ScoreFromDenoiserAt(const FieldModel& denoiser, const Schedule& s,
                           const FieldProbe& probe) {
  return ScoreFromDenoiser(denoiser, s).Evaluate(probe);
}

Vector ScoreFromDriftAt(const FieldModel& drift, const Schedule& s,
                        const FieldProbe& probe) {
  return ScoreFromDrift(drift, s).Evaluate(probe);
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"steps", steps},         {"batch_size", batch_size},
          {"n_tuples", n_tuples},   {"seed", seed},
          {"lr", lr},               {"lr_final", lr_final},
          {"standardize", standardize}};
}

Checkpoint FitResult::MakeCheckpoint(const TrainConfig& train) const {
  constexpr std::size_t kTail = 100;
  const std::size_t from =
      loss_history.size() > kTail ? loss_history.size() - kTail : 0;
  Checkpoint ckpt{.params = *params,
                  .role = ToString(model.kind()),
                  .seed = train.seed,
                  .loss_history_tail = std::vector<double>(
                      loss_history.begin() + static_cast<std::ptrdiff_t>(from),
                      loss_history.end())};
  ckpt.metadata = {{"train", train.ToJson()},
                   {"initial_loss", initial_loss},
                   {"final_loss", final_loss},
                   {"provenance", model.provenance()}};
  return ckpt;
}

namespace {

void RowMoments(const Eigen::MatrixXd& m, Vector& mean, Vector& sd) {
  const auto rows = static_cast<std::size_t>(m.rows());
  mean.assign(rows, 0.0);
  sd.assign(rows, 1.0);
  const double n = static_cast<double>(m.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = m.row(static_cast<Eigen::Index>(r));
    mean[r] = row.mean();
    const double var =
        n > 1 ? (row.array() - mean[r]).square().sum() / (n - 1.0) : 0.0;
    // A constant feature keeps unit scale.
    sd[r] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
}

RegressionBatch GatherColumns(const RegressionBatch& full,
                              std::span<const std::size_t> cols) {
  RegressionBatch b;
  const auto n = static_cast<Eigen::Index>(cols.size());
  b.inputs.resize(full.inputs.rows(), n);
  b.targets.resize(full.targets.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto src = static_cast<Eigen::Index>(cols[static_cast<std::size_t>(c)]);
    b.inputs.col(c) = full.inputs.col(src);
    b.targets.col(c) = full.targets.col(src);
  }
  return b;
}

std::string ParamsId(const NetParams& params) {
  const auto flat = params.flat();
  return HexId(Fnv1a64(std::string_view(
      reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(double))));
}

FitResult Fit(const DataSource& src, const Schedule& s, const NetConfig& cfg_in,
              const TrainConfig& train, Objective objective) {
  if (train.steps == 0) throw ArgumentError("train: steps must be >= 1");
  if (train.batch_size == 0) throw ArgumentError("train: batch_size must be >= 1");
  if (!(train.lr > 0.0) || !(train.lr_final > 0.0)) {
    throw ArgumentError("train: learning rates must be > 0");
  }
  if (objective == Objective::kDenoiser && !s.has_noise()) {
    throw DomainError("denoiser risk undefined: schedule '" + s.name() +
                      "' has gamma = 0 on (0, 1)");
  }
  const std::size_t k = src.condition_dim();
  const std::size_t d = src.response_dim();
  NetConfig cfg = cfg_in;
  if (cfg.input_dim != k + d + 1 || cfg.output_dim != d) {
    throw ShapeError("net config does not match data source dimensions");
  }

  // Fixed training sample, or a pilot sample for standardization when
  // training on fresh draws.
  constexpr std::size_t kPilot = 4096;
  constexpr std::uint64_t kPilotOffset = std::uint64_t{1} << 62;
  const bool fixed_sample = train.n_tuples > 0;
  const auto tuples = DrawTrainingBatch(
      src, s, fixed_sample ? train.n_tuples : kPilot, TimeMode::UniformInterior(),
      train.seed, fixed_sample ? 0 : kPilotOffset);
  const RegressionBatch full = MakeRegressionBatch(tuples, objective);

  if (train.standardize) {
    RowMoments(full.inputs, cfg.input_shift, cfg.input_scale);
    RowMoments(full.targets, cfg.output_shift, cfg.output_scale);
  }
  auto params = std::make_shared<NetParams>(InitParams(cfg, train.seed));
  NetParams grad = params->ZerosLike();
  AdamState adam(*params, AdamOptions{.lr = train.lr});

  FitResult result{.model = ConstantField(FieldKind::kDrift, k, Vector(d, 0.0)),
                   .params = nullptr,
                   .loss_history = {}};
  result.initial_loss = Loss(*params, full);
  result.loss_history.reserve(train.steps);

  std::vector<std::size_t> order(full.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::uint64_t epoch = 0;
  std::vector<std::size_t> picked(train.batch_size);

  for (std::size_t step = 0; step < train.steps; ++step) {
    RegressionBatch mini;
    if (fixed_sample) {
      for (std::size_t i = 0; i < train.batch_size; ++i) {
        if (cursor == order.size()) {
          CounterRng shuffle_rng(train.seed, Stream::kShuffle, epoch++);
          std::shuffle(order.begin(), order.end(), shuffle_rng);
          cursor = 0;
        }
        picked[i] = order[cursor++];
      }
      mini = GatherColumns(full, picked);
    } else {
      mini = MakeRegressionBatch(
          DrawTrainingBatch(src, s, train.batch_size, TimeMode::UniformInterior(),
                            train.seed, step * train.batch_size),
          objective);
    }
    const double loss = LossAndGradient(*params, mini, grad);
    if (!std::isfinite(loss)) throw TrainingDivergedError(step + 1, loss);
    result.loss_history.push_back(loss);
    const double progress =
        static_cast<double>(step) / static_cast<double>(train.steps);
    const double lr =
        train.lr_final + 0.5 * (train.lr - train.lr_final) *
                             (1.0 + std::cos(std::numbers::pi * progress));
    try {
      AdamStep(adam, *params, grad, lr);
    } catch (const NumericError&) {
      throw TrainingDivergedError(step + 1, loss);
    }
  }
  result.final_loss = Loss(*params, full);
  if (!std::isfinite(result.final_loss)) {
    throw TrainingDivergedError(train.steps, result.final_loss);
  }
  const FieldKind kind =
      objective == Objective::kDrift ? FieldKind::kDrift : FieldKind::kDenoiser;
  result.model =
      NetField(kind, params, k, ParamsId(*params), s.singular_at_boundary());
  result.params = std::move(params);
  return result;
}

}  // namespace

FitResult FitDrift(const DataSource& src, const Schedule& s,
                   const NetConfig& cfg, const TrainConfig& train) {
  return Fit(src, s, cfg, train, Objective::kDrift);
}

FitResult FitDenoiser(const DataSource& src, const Schedule& s,
                      const NetConfig& cfg, const TrainConfig& train) {
  return Fit(src, s, cfg, train, Objective::kDenoiser);
}

FieldModel FieldFromCheckpoint(const Checkpoint& ckpt, std::size_t condition_dim,
                               const Schedule& s, const std::string& id) {
  FieldKind kind;
  if (ckpt.role == "drift") {
    kind = FieldKind::kDrift;
  } else if (ckpt.role == "denoiser") {
    kind = FieldKind::kDenoiser;
  } else {
    throw ArgumentError("checkpoint role '" + ckpt.role +
                        "' is not drift or denoiser");
  }
  return NetField(kind, std::make_shared<const NetParams>(ckpt.params),
                  condition_dim, id, s.singular_at_boundary());
}

std::vector<FieldProbe> MakeProbeGrid(const DataSource& src, const Schedule& s,
                                      std::size_t n, std::uint64_t seed) {
  std::vector<FieldProbe> probes;
  probes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, Stream::kProbe, i);
    FieldProbe probe;
    probe.x = src.SampleCondition(rng);
    probe.t = rng.Uniform(0.05, 0.95);
    probe.y = SampleInterpolation(src, s, probe.x, probe.t, 1, seed ^ 0x70726f6265ULL, i);
    probes.push_back(std::move(probe));
  }
  return probes;
}

OracleComparison CompareFields(const FieldModel& estimate,
                               const FieldModel& oracle,
                               std::span<const FieldProbe> probes) {
  if (probes.empty()) throw ArgumentError("compare fields: no probes");
  std::vector<Vector> truth;
  truth.reserve(probes.size());
  double se = 0.0;
  for (const FieldProbe& p : probes) {
    Vector expected = oracle.Evaluate(p);
    const Vector got = estimate.Evaluate(p);
    for (std::size_t j = 0; j < got.size(); ++j) {
      se += (got[j] - expected[j]) * (got[j] - expected[j]);
    }
    truth.push_back(std::move(expected));
  }
  const double n = static_cast<double>(probes.size());
  OracleComparison cmp;
  cmp.mse = se / n;
  // Total variance across components.
  const std::size_t d = truth.front().size();
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (const auto& v : truth) mean += v[j];
    mean /= n;
    double ss = 0.0;
    for (const auto& v : truth) ss += (v[j] - mean) * (v[j] - mean);
    cmp.oracle_variance += n > 1 ? ss / (n - 1.0) : 0.0;
  }
  return cmp;
}

}  // namespace csi
