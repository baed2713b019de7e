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

// csi: command-line front end for the conditional stochastic interpolation
// library. Every subcommand reads an ExperimentConfig (a JSON file or a
// builtin), runs, and writes CSV/JSON under the output directory.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "csi/errors.hpp"
#include "csi/experiment.hpp"
#include "csi/metrics.hpp"
#include "csi/schedule.hpp"

namespace {

struct RunOptions {
  std::string config_path;
  std::string builtin;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void AddRunOptions(CLI::App* cmd, RunOptions& opts, const std::string& default_builtin) {
  auto* config = cmd->add_option("--config", opts.config_path, "ExperimentConfig JSON file")
                     ->check(CLI::ExistingFile);
  auto* builtin = cmd->add_option("--builtin", opts.builtin, "builtin config name");
  config->excludes(builtin);
  if (!default_builtin.empty()) builtin->default_str(default_builtin);
  cmd->add_option("--seed", opts.seed, "master seed (overrides config and CSI_SEED)");
  cmd->add_option("--out", opts.out, "output directory");
}

csi::ExperimentConfig LoadConfig(const RunOptions& opts, const std::string& default_builtin) {
  csi::ExperimentConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = csi::ExperimentConfig::FromFile(opts.config_path);
  } else if (!opts.builtin.empty()) {
    cfg = csi::BuiltinConfig(opts.builtin);
  } else if (!default_builtin.empty()) {
    cfg = csi::BuiltinConfig(default_builtin);
  } else {
    throw csi::ConfigError("config", "pass --config <path> or --builtin <name>");
  }
  cfg.seed = csi::ResolveSeed(opts.seed, cfg.seed, std::getenv("CSI_SEED"));
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  return cfg;
}

void Report(const csi::ReportBundle& bundle) {
  std::cout << "wrote " << bundle.files.size() << " files to "
            << bundle.output_dir.string() << '\n';
}

int ValidateSchedule(const std::string& name, double tol, bool strict) {
  const csi::Schedule s = csi::MakeSchedule(name);
  const csi::ValidationReport boundary = csi::ValidateBoundary(s, tol);
  std::cout << "schedule " << s.name() << '\n' << boundary.ToString();
  bool stable = true;
  try {
    const auto grid = csi::DefaultStabilityGrid();
    const csi::StabilityReport stability = csi::CheckStabilityT0(s, grid);
    std::cout << stability.ToString();
    stable = stability.pass;
  } catch (const csi::EvaluationError& e) {
    std::cout << "stability: not applicable (" << e.what() << ")\n";
    stable = false;
  }
  if (!boundary.pass) return 1;
  return strict && !stable ? 1 : 0;
}

void PrintMetrics(const std::string& path_a, const std::string& path_b,
                  std::size_t bins) {
  const csi::EmpiricalDistribution a(csi::ReadLastColumn(path_a));
  const csi::EmpiricalDistribution b(csi::ReadLastColumn(path_b));
  const csi::SummaryStats sa = csi::Summarize(a);
  const csi::SummaryStats sb = csi::Summarize(b);
  const double lo = std::min(a.sorted().front(), b.sorted().front());
  const double hi = std::max(a.sorted().back(), b.sorted().back());
  nlohmann::json j;
  j["n_a"] = a.n();
  j["n_b"] = b.n();
  j["mean_a"] = sa.mean;
  j["mean_b"] = sb.mean;
  j["variance_a"] = sa.variance;
  j["variance_b"] = sb.variance;
  j["ks"] = csi::KsStatistic(a, b);
  j["w2"] = a.n() == b.n() ? nlohmann::json(csi::W2(a, b)) : nlohmann::json(nullptr);
  j["kl"] = hi > lo ? nlohmann::json(csi::KlHistogram(a, b, bins, lo, hi))
                    : nlohmann::json(0.0);
  std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional stochastic interpolation: simulate, fit, sample, measure"};
  app.require_subcommand(1);

  std::string schedule_name;
  double tol = 1e-12;
  bool strict = false;
  auto* validate = app.add_subcommand("validate-schedule",
                                      "check boundary conditions and stability near t=0");
  validate->add_option("--schedule", schedule_name, "schedule preset")->required();
  validate->add_option("--tol", tol, "boundary residual tolerance");
  validate->add_flag("--strict", strict, "exit nonzero when the stability check fails");

  RunOptions simulate_opts, fit_opts, sample_opts, fig1_opts, rate_opts;
  auto* simulate = app.add_subcommand("simulate", "draw training tuples and interpolation marginals");
  AddRunOptions(simulate, simulate_opts, "");
  auto* fit = app.add_subcommand("fit", "fit drift (and denoiser) networks");
  AddRunOptions(fit, fit_opts, "");
  auto* sample = app.add_subcommand("sample", "run ODE/SDE samplers and write trajectories");
  AddRunOptions(sample, sample_opts, "");
  auto* fig1 = app.add_subcommand("reproduce-fig1",
                                  "run the two-condition regression experiment");
  AddRunOptions(fig1, fig1_opts, "reproduce-fig1");
  auto* rate = app.add_subcommand("rate-study", "oracle error against training sample size");
  AddRunOptions(rate, rate_opts, "rate-study-default");

  std::string metrics_a, metrics_b;
  std::size_t bins = 50;
  auto* metrics = app.add_subcommand("metrics", "compare two one-dimensional sample CSVs");
  metrics->add_option("a", metrics_a, "first sample CSV (last column is used)")
      ->required()->check(CLI::ExistingFile);
  metrics->add_option("b", metrics_b, "second sample CSV")->required()->check(CLI::ExistingFile);
  metrics->add_option("--bins", bins, "histogram bins for KL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage errors share the config-error exit code
  }

  try {
    if (validate->parsed()) return ValidateSchedule(schedule_name, tol, strict);
    if (metrics->parsed()) {
      PrintMetrics(metrics_a, metrics_b, bins);
      return 0;
    }
    if (simulate->parsed()) Report(csi::RunSimulate(LoadConfig(simulate_opts, "")));
    if (fit->parsed()) Report(csi::RunFit(LoadConfig(fit_opts, "")));
    if (sample->parsed()) Report(csi::RunSample(LoadConfig(sample_opts, "")));
    if (fig1->parsed()) Report(csi::RunExperiment(LoadConfig(fig1_opts, "reproduce-fig1")));
    if (rate->parsed()) {
      const csi::ReportBundle bundle =
          csi::RunRateStudy(LoadConfig(rate_opts, "rate-study-default"));
      Report(bundle);
      std::cout << "slope_drift " << bundle.summary["slope_drift"].get<double>()
                << "\nslope_score " << bundle.summary["slope_score"].get<double>() << '\n';
    }
  } catch (const csi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const csi::Error& e) {
    std::cerr << csi::ToString(e.kind()) << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
