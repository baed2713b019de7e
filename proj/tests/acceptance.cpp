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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Set CSI_ACCEPTANCE_SKIP_FITTED=1 to skip the learned-field
// criteria (they take several minutes on one core).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "csi/data.hpp"
#include "csi/errors.hpp"
#include "csi/estimators.hpp"
#include "csi/experiment.hpp"
#include "csi/metrics.hpp"
#include "csi/net.hpp"
#include "csi/oracle.hpp"
#include "csi/process.hpp"
#include "csi/rng.hpp"
#include "csi/samplers.hpp"
#include "csi/schedule.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace csi;

int g_failures = 0;

void Report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

// Runs a criterion body, turning an escaped exception into a FAIL line.
void Criterion(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    Report(false, name, std::string("exception: ") + e.what());
  }
}

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("csi-acceptance-" + name);
  fs::remove_all(p);
  return p;
}

const json& FindRecord(const json& records, const std::string& metric, double t,
                       const std::string& cid) {
  for (const auto& r : records) {
    if (r.at("metric") == metric && r.at("condition_id") == cid &&
        std::abs(r.at("t").get<double>() - t) < 1e-9) {
      return r;
    }
  }
  throw std::runtime_error("missing metric record " + metric);
}

std::string ReadWithoutTimestamp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("# generated_at=", 0) == 0) continue;
    ss << line << '\n';
  }
  return ss.str();
}

using Snapshot = std::map<std::string, std::string>;

// Output files of a run with timestamp lines removed. The manifest is left
// out because it records wall-clock time.
Snapshot TakeSnapshot(const ReportBundle& run) {
  Snapshot snap;
  for (const auto& f : run.files) {
    if (f != "run_manifest.json") snap[f] = ReadWithoutTimestamp(run.output_dir / f);
  }
  return snap;
}

const double kFig1Means[] = {2.0, 28.0 / 3.0};

// Checks terminal moments and marginal KS for one reproduce-fig1 style run.
void CheckFig1(const ReportBundle& run, const std::string& prefix, bool check_marginals) {
  const json& records = run.summary.at("records");
  const std::vector<std::string> methods = {"ode-euler", "sde-euler-maruyama"};
  for (int c = 0; c < 2; ++c) {
    const std::string cid = "X" + std::to_string(c);
    for (const auto& m : methods) {
      const double mean = FindRecord(records, m + ".mean", 1.0, cid).at("value");
      const double var = FindRecord(records, m + ".variance", 1.0, cid).at("value");
      const bool ok = std::abs(mean - kFig1Means[c]) <= 0.06 && std::abs(var - 1.0) <= 0.10;
      Report(ok, prefix + ".terminal_moments." + cid + "." + m,
             Fmt("mean %.4f (target %.4f +- 0.06), variance %.4f (target 1 +- 0.10)", mean,
                 kFig1Means[c], var));
    }
  }
  if (!check_marginals) return;
  double worst = 0.0;
  std::string where;
  for (int c = 0; c < 2; ++c) {
    const std::string cid = "X" + std::to_string(c);
    for (const auto& m : methods) {
      for (double t : {0.2, 0.4, 0.6, 0.8}) {
        const double ks = FindRecord(records, m + ".ks_vs_interpolation", t, cid).at("value");
        if (ks > worst) {
          worst = ks;
          where = Fmt("%s %s t=%.1f", cid.c_str(), m.c_str(), t);
        }
      }
    }
  }
  Report(worst <= 0.04, prefix + ".marginal_ks",
         Fmt("max KS %.4f at %s (limit 0.04)", worst, where.c_str()));
}

void OracleReproduction(ReportBundle& fig1) {
  Criterion("fig1.oracle", [&] {
    ExperimentConfig cfg = BuiltinConfig("reproduce-fig1");
    cfg.output_dir = Scratch("fig1").string();
    const auto start = std::chrono::steady_clock::now();
    fig1 = RunExperiment(cfg);
    const double secs = Seconds(start);
    Report(secs < 60.0, "fig1.oracle.runtime", Fmt("%.2f s (limit 60 s)", secs));
    CheckFig1(fig1, "fig1.oracle", true);
  });
}

void AnalyticIdentities() {
  const auto start = std::chrono::steady_clock::now();
  const RegressionSource src(RegressionModel::RegressionExperiment(), -1.0, 3.0);
  const RegressionModel& model = src.model();

  for (const char* name : {"linear-sqrt", "paper-7-1"}) {
    Criterion(std::string("identity.score_from_drift.") + name, [&] {
      const Schedule s = MakeSchedule(name);
      const auto probes = MakeProbeGrid(src, s, 1000, 11);
      double worst = 0.0;
      for (const auto& p : probes) {
        const SchedulePoint pt = s.At(p.t);
        const double big_a = CapitalA(pt);
        const double lhs = pt.b / big_a * RegressionDrift(model, s, p) - pt.db / big_a * p.y[0];
        worst = std::max(worst, std::abs(lhs - RegressionScore(model, s, p)));
      }
      Report(worst <= 1e-9, std::string("identity.score_from_drift.") + name,
             Fmt("max residual %.3e over 1000 probes (limit 1e-9)", worst));
    });
  }

  for (const auto& name : SchedulePresetNames()) {
    Criterion("boundary.score_t1e-6." + name, [&] {
      const Schedule s = MakeSchedule(name);
      const auto grid = DefaultStabilityGrid();
      bool stable = false;
      try {
        stable = CheckStabilityT0(s, grid).pass;
      } catch (const EvaluationError&) {
        stable = false;
      }
      if (!stable) return;  // only stability-passing presets are covered
      CounterRng rng(7, Stream::kProbe);
      double worst = 0.0;
      for (int i = 0; i < 100; ++i) {
        const Vector x = src.SampleCondition(rng);
        const double y = 4.0 * rng.Normal();
        const FieldProbe p{x, {y}, 1e-6};
        worst = std::max(worst, std::abs(RegressionScore(model, s, p) + y));
      }
      Report(worst <= 1e-3, "boundary.score_t1e-6." + name,
             Fmt("max |s + y| %.3e over 100 probes (limit 1e-3)", worst));
    });
  }

  Criterion("boundary.drift_t0.paper-7-1", [&] {
    const Schedule s = MakeSchedule("paper-7-1");
    const double db0 = s.At(0.0).db;
    CounterRng rng(8, Stream::kProbe);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vector x = src.SampleCondition(rng);
      const double y = 4.0 * rng.Normal();
      const double drift = RegressionDrift(model, s, FieldProbe{x, {y}, 0.0});
      worst = std::max(worst, std::abs(drift - db0 * model.f(x)));
    }
    Report(worst <= 1e-9, "boundary.drift_t0.paper-7-1",
           Fmt("max |drift - b'(0) f(x)| %.3e (limit 1e-9)", worst));
  });

  Criterion("schedule.boundary_residuals", [&] {
    bool ok = true;
    double worst = 0.0;
    std::string failing;
    for (const auto& name : SchedulePresetNames()) {
      const ValidationReport r = ValidateBoundary(MakeSchedule(name), 1e-12);
      for (const auto& e : r.entries) worst = std::max(worst, std::abs(e.residual));
      if (!r.pass) {
        ok = false;
        failing += name + " ";
      }
    }
    Report(ok, "schedule.boundary_residuals",
           Fmt("max residual %.3e over %zu presets (limit 1e-12)%s%s", worst,
               SchedulePresetNames().size(), ok ? "" : ", failing: ", failing.c_str()));
  });

  Criterion("schedule.trig_unstable_fails_stability", [&] {
    const StabilityReport r = CheckStabilityT0(MakeSchedule("trig-unstable"), DefaultStabilityGrid());
    const bool ok = !r.pass && std::abs(r.limit_b - 0.5) <= 0.01;
    Report(ok, "schedule.trig_unstable_fails_stability",
           Fmt("check %s, limiting b/gamma %.5f (target 0.5 +- 0.01)", r.pass ? "passed" : "failed",
               r.limit_b));
  });

  const double secs = Seconds(start);
  Report(secs < 5.0, "identities.runtime", Fmt("%.3f s (limit 5 s)", secs));
}

void NumericalCorrectness() {
  Criterion("net.backprop_vs_finite_differences", [] {
    const RegressionSource src(RegressionModel::RegressionExperiment(), -1.0, 3.0);
    const Schedule s = MakeSchedule("paper-7-1");
    double worst = 0.0;
    for (std::uint64_t r = 0; r < 10; ++r) {
      NetConfig cfg = NetConfig::ForField(5, 1, {16, 12});
      const NetParams params = InitParams(cfg, 100 + r);
      const auto tuples = DrawTrainingBatch(src, s, 32, TimeMode::UniformInterior(), 200 + r);
      const RegressionBatch batch =
          MakeRegressionBatch(tuples, r % 2 ? Objective::kDenoiser : Objective::kDrift);
      NetParams grad = params.ZerosLike();
      LossAndGradient(params, batch, grad);
      NetParams probe = params;
      CounterRng rng(300 + r, Stream::kProbe);
      const double h = 1e-6;
      for (int c = 0; c < 50; ++c) {
        const auto i = static_cast<std::size_t>(rng.Uniform() * params.size());
        const double orig = probe.flat()[i];
        probe.flat()[i] = orig + h;
        const double up = Loss(probe, batch);
        probe.flat()[i] = orig - h;
        const double down = Loss(probe, batch);
        probe.flat()[i] = orig;
        const double fd = (up - down) / (2 * h);
        const double g = grad.flat()[i];
        const double scale = std::max({std::abs(g), std::abs(fd), 1e-7});
        worst = std::max(worst, std::abs(g - fd) / scale);
      }
    }
    Report(worst <= 1e-4, "net.backprop_vs_finite_differences",
           Fmt("max relative error %.3e over 10 nets x 50 coordinates (limit 1e-4)", worst));
  });

  Criterion("sde.noise_calibration", [] {
    const double c = 0.3;
    const FieldModel zero_drift = ConstantField(FieldKind::kDrift, 1, {0.0});
    const FieldModel zero_score = ConstantField(FieldKind::kScore, 1, {0.0});
    SamplerSpec spec;
    spec.method = SamplerMethod::kSdeEulerMaruyama;
    spec.steps = 1000;
    spec.seed = 31;
    spec.u = UPreset("const(0.3)");
    const auto trajs = SdeDiffusionSample(zero_drift, zero_score, Vector{0.0}, 10000, spec);
    Vector increments;
    for (const auto& tr : trajs) increments.push_back(tr.terminal[0] - tr.states.front()[0]);
    const SummaryStats st = Summarize(EmpiricalDistribution(increments));
    const double se = st.variance * std::sqrt(2.0 / static_cast<double>(st.n - 1));
    const double z = (st.variance - 2 * c) / se;
    Report(std::abs(z) <= 4.0, "sde.noise_calibration",
           Fmt("variance %.5f vs 2c = %.2f, %.2f SE (limit 4), 10000 trajectories", st.variance,
               2 * c, z));
  });

  Criterion("oracle.tweedie_mc", [] {
    const RegressionSource src(RegressionModel::RegressionExperiment(), -1.0, 3.0);
    const Schedule s = MakeSchedule("paper-7-1");
    const McTarget signal = [](const SchedulePoint& pt, std::span<const double> y0,
                               std::span<const double> y1, std::span<const double>) {
      return Vector{pt.a * y0[0] + pt.b * y1[0]};
    };
    const double times[] = {0.2, 0.35, 0.5, 0.65, 0.8};
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      CounterRng rng(500 + i, Stream::kProbe);
      const Vector x = src.SampleCondition(rng);
      const Vector y = SampleInterpolation(src, s, x, times[i], 1, 600 + i);
      const FieldProbe p{x, y, times[i]};
      const std::uint64_t seed = 700u + i;
      // Half of Silverman's bandwidth (undersmoothing) so the kernel bias is
      // small next to the bootstrap standard error.
      const double h =
          McConditionalExpectation(src, s, p, signal, {.m = 200000, .bootstrap_reps = 0, .seed = seed})
              .bandwidth;
      const McEstimate est = McConditionalExpectation(
          src, s, p, signal, {.m = 200000, .bandwidth = 0.5 * h, .seed = seed});
      const double gamma = s.At(p.t).gamma;
      const double expected = y[0] + gamma * gamma * RegressionScore(src.model(), s, p);
      worst = std::max(worst, std::abs(est.value[0] - expected) / est.standard_error[0]);
    }
    Report(worst <= 4.0, "oracle.tweedie_mc",
           Fmt("max deviation %.2f bootstrap SE over 5 probes (limit 4)", worst));
  });
}

void LearnedFields(ReportBundle& fitted, ReportBundle& rate) {
  Criterion("fitted.drift", [&] {
    ExperimentConfig cfg = BuiltinConfig("reproduce-fig1-fitted");
    cfg.output_dir = Scratch("fitted").string();
    const auto start = std::chrono::steady_clock::now();
    fitted = RunExperiment(cfg);
    const double secs = Seconds(start);
    const json& drift = fitted.summary.at("fields").at("drift");
    const double rel = drift.at("oracle_relative_mse");
    Report(rel <= 0.05, "fitted.drift.oracle_relative_mse",
           Fmt("%.4f of oracle variance (limit 0.05); 1e5 tuples, %zu steps, %.0f s", rel,
               cfg.fields.train.steps, secs));
    const json& records = fitted.summary.at("records");
    for (int c = 0; c < 2; ++c) {
      const std::string cid = "X" + std::to_string(c);
      const double mean = FindRecord(records, "ode-euler.mean", 1.0, cid).at("value");
      Report(std::abs(mean - kFig1Means[c]) <= 0.15, "fitted.ode_terminal_mean." + cid,
             Fmt("%.4f (target %.4f +- 0.15)", mean, kFig1Means[c]));
    }
  });

  Criterion("rate_study.slope", [&] {
    ExperimentConfig cfg = BuiltinConfig("rate-study-default");
    cfg.output_dir = Scratch("rate").string();
    rate = RunRateStudy(cfg);
    const double slope = rate.summary.at("slope_drift");
    Report(slope < 0.0, "rate_study.slope_drift",
           Fmt("log-log slope %.3f over n = 512..8192 (must be < 0)", slope));
  });
}

// Reruns each builtin into the directory of its first run (the output
// directory is part of the config) and compares the outputs.
void Determinism(const ReportBundle& fig1, const ReportBundle& fitted, const ReportBundle& rate,
                 bool skip_fitted) {
  for (const auto& name : BuiltinConfigNames()) {
    Criterion("determinism." + name, [&] {
      ExperimentConfig cfg = BuiltinConfig(name);
      const bool is_rate = name == "rate-study-default";
      const bool is_fitted = cfg.fields.source == "fitted" && !is_rate;
      if (is_fitted && skip_fitted) {
        std::printf("SKIP determinism.%s: fitted criteria disabled\n", name.c_str());
        return;
      }
      auto run = [&] { return is_rate ? RunRateStudy(cfg) : RunExperiment(cfg); };
      ReportBundle first;
      if (name == "reproduce-fig1" && !fig1.files.empty()) {
        first = fig1;
      } else if (is_fitted && !fitted.files.empty()) {
        first = fitted;
      } else if (is_rate && !rate.files.empty()) {
        first = rate;
      } else {
        cfg.output_dir = Scratch(name).string();
        first = run();
      }
      cfg.output_dir = first.output_dir.string();
      const Snapshot before = TakeSnapshot(first);
      const Snapshot after = TakeSnapshot(run());
      std::string differing;
      for (const auto& [file, content] : before) {
        const auto it = after.find(file);
        if (it == after.end() || it->second != content) differing += " " + file;
      }
      if (after.size() != before.size()) differing += " <file list>";
      std::string detail = Fmt("%zu files compared", before.size());
      if (!differing.empty()) detail += ", differing:" + differing;
      Report(differing.empty(), "determinism." + name, detail);
    });
  }
}

}  // namespace

int main() {
  const char* skip = std::getenv("CSI_ACCEPTANCE_SKIP_FITTED");
  const bool skip_fitted = skip != nullptr && std::string(skip) == "1";

  ReportBundle fig1, fitted, rate;
  OracleReproduction(fig1);
  AnalyticIdentities();
  NumericalCorrectness();
  if (skip_fitted) {
    std::printf("SKIP fitted.*: CSI_ACCEPTANCE_SKIP_FITTED=1\n");
  } else {
    LearnedFields(fitted, rate);
  }
  Determinism(fig1, fitted, rate, skip_fitted);

  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
