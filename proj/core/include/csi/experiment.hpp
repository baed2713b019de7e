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
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "csi/data.hpp"
#include "csi/estimators.hpp"
#include "csi/samplers.hpp"
#include "csi/schedule.hpp"

namespace csi {

struct DataModelConfig {
  std::string f = "paper-7-1-f";  // paper-7-1-f | linear | custom-constant
  double noise_sd = 1.0;
  std::size_t k = 5;
  double x_low = -1.0;
  double x_high = 3.0;
  Vector linear_coefficients;  // f = "linear"
  double intercept = 0.0;      // f = "linear"
  double constant = 0.0;       // f = "custom-constant"
};

struct FieldSourceConfig {
  std::string source = "oracle";  // oracle | fitted
  // Score used by SDE samplers: from-drift | from-denoiser | oracle.
  std::string score = "from-drift";
  std::vector<std::size_t> hidden_widths = {128, 128, 128};
  std::optional<double> output_clamp;
  TrainConfig train;
  // When set, fitted fields are loaded from these csi-net-v1 files instead
  // of trained.
  std::string drift_checkpoint;
  std::string denoiser_checkpoint;
};

struct SamplerConfig {
  std::string method = "ode-euler";
  std::size_t steps = 1000;
  std::string u = "quartic";
  double t_end = 1.0;
};

struct RateStudyConfig {
  std::vector<std::size_t> n_grid;
  std::size_t steps = 3000;
  std::size_t batch_size = 128;
  std::vector<std::size_t> hidden_widths = {64, 64};
  std::size_t probes = 256;
};

struct ExperimentConfig {
  std::string name = "custom";
  std::string schedule = "paper-7-1";
  DataModelConfig data;
  FieldSourceConfig fields;
  std::vector<SamplerConfig> samplers;
  std::vector<Vector> conditions;
  std::size_t n_samples = 5000;
  std::vector<double> record_times = {0.2, 0.4, 0.6, 0.8, 1.0};
  std::optional<std::uint64_t> seed;
  std::string output_dir = "csi-out";
  RateStudyConfig rate_study;

  // Throws ConfigError naming the offending field path.
  void Validate() const;

  nlohmann::json ToJson() const;
  // Unknown keys and type mismatches raise ConfigError with the field path.
  static ExperimentConfig FromJson(const nlohmann::json& j);
  static ExperimentConfig FromFile(const std::filesystem::path& path);
};

// reproduce-fig1, reproduce-fig1-fitted, marginal-check, rate-study-default.
ExperimentConfig BuiltinConfig(std::string_view name);
const std::vector<std::string>& BuiltinConfigNames();

// Seed precedence: flag, then config, then the CSI_SEED environment value,
// then 0. ConfigError when CSI_SEED is not an unsigned integer.
std::uint64_t ResolveSeed(std::optional<std::uint64_t> flag,
                          std::optional<std::uint64_t> config,
                          const char* env_value);

// FNV-1a over the canonical (sorted-key) JSON of the config, as 16 hex
// digits.
std::string ConfigHash(const ExperimentConfig& cfg);

std::unique_ptr<RegressionSource> MakeDataSource(const DataModelConfig& data);

struct ReportBundle {
  std::filesystem::path output_dir;
  std::vector<std::string> files;  // relative to output_dir
  nlohmann::json summary;
};

// Every CSV the runner writes starts with one "# generated_at=<UTC time>"
// line followed by the column header. Nothing else in the outputs depends on
// wall-clock time except the manifest's generated_at field.
ReportBundle RunExperiment(const ExperimentConfig& cfg);
ReportBundle RunRateStudy(const ExperimentConfig& cfg);
ReportBundle RunSimulate(const ExperimentConfig& cfg);
ReportBundle RunFit(const ExperimentConfig& cfg);
ReportBundle RunSample(const ExperimentConfig& cfg);

// Least-squares slope of log(y) against log(x).
double LogLogSlope(std::span<const double> x, std::span<const double> y);

// Reads the last column of a CSV written by this library (comment lines
// starting with '#' and the header row are skipped).
std::vector<double> ReadLastColumn(const std::filesystem::path& path);

}  // namespace csi
