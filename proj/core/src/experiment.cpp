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

#include "csi/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "csi/errors.hpp"
#include "csi/hash.hpp"
#include "csi/metrics.hpp"
#include "csi/net.hpp"
#include "csi/oracle.hpp"
#include "csi/process.hpp"
#include "csi/rng.hpp"

namespace csi {

namespace {

using nlohmann::json;

// Reads one JSON object, remembering which keys were consumed so unknown
// (likely misspelled) keys can be reported with their full path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(Name(), "expected an object");
  }

  template <typename T>
  bool Get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return false;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(Field(key), std::string("wrong type: ") + e.what());
    }
    return true;
  }

  const json* Child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string Field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(Field(key), "unknown key");
    }
  }

 private:
  std::string Name() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string Indexed(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

bool IsKnownU(const std::string& u) {
  try {
    // "gamma" needs a schedule; any preset works for the name check.
    const Schedule probe = MakeSchedule("linear-sqrt");
    UPreset(u, &probe);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

}  // namespace

void ExperimentConfig::Validate() const {
  try {
    MakeSchedule(schedule);
  } catch (const ConfigError& e) {
    throw ConfigError("schedule", "unknown schedule preset '" + schedule + "'");
  }
  if (data.f != "paper-7-1-f" && data.f != "linear" &&
      data.f != "custom-constant") {
    throw ConfigError("data.f", "unknown regression function '" + data.f + "'");
  }
  if (data.f == "paper-7-1-f" && data.k != 5) {
    throw ConfigError("data.k", "paper-7-1-f needs k = 5");
  }
  if (data.f == "linear" && data.linear_coefficients.size() != data.k) {
    throw ConfigError("data.linear_coefficients", "length must equal data.k");
  }
  if (data.k == 0) throw ConfigError("data.k", "must be >= 1");
  if (!(data.noise_sd > 0.0)) throw ConfigError("data.noise_sd", "must be > 0");
  if (!(data.x_low < data.x_high)) {
    throw ConfigError("data.x_low", "must be below data.x_high");
  }
  if (fields.source != "oracle" && fields.source != "fitted") {
    throw ConfigError("fields.source", "expected 'oracle' or 'fitted'");
  }
  if (fields.score != "from-drift" && fields.score != "from-denoiser" &&
      fields.score != "oracle") {
    throw ConfigError("fields.score",
                      "expected 'from-drift', 'from-denoiser' or 'oracle'");
  }
  if (fields.hidden_widths.empty()) {
    throw ConfigError("fields.hidden_widths", "need at least one hidden layer");
  }
  for (std::size_t i = 0; i < fields.hidden_widths.size(); ++i) {
    if (fields.hidden_widths[i] == 0) {
      throw ConfigError(Indexed("fields.hidden_widths", i), "must be >= 1");
    }
  }
  if (fields.train.steps == 0) throw ConfigError("fields.train.steps", "must be >= 1");
  if (fields.train.batch_size == 0) {
    throw ConfigError("fields.train.batch_size", "must be >= 1");
  }
  if (!(fields.train.lr > 0.0)) throw ConfigError("fields.train.lr", "must be > 0");
  if (!(fields.train.lr_final > 0.0)) {
    throw ConfigError("fields.train.lr_final", "must be > 0");
  }
  if (conditions.empty()) throw ConfigError("conditions", "must be nonempty");
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (conditions[i].size() != data.k) {
      throw ConfigError(Indexed("conditions", i),
                        "length must equal data.k = " + std::to_string(data.k));
    }
  }
  if (n_samples < 2) throw ConfigError("n_samples", "must be >= 2");
  for (std::size_t i = 0; i < record_times.size(); ++i) {
    if (!(record_times[i] > 0.0 && record_times[i] <= 1.0)) {
      throw ConfigError(Indexed("record_times", i), "must be in (0, 1]");
    }
    if (i > 0 && !(record_times[i] > record_times[i - 1])) {
      throw ConfigError("record_times", "must be strictly increasing");
    }
  }
  for (std::size_t i = 0; i < samplers.size(); ++i) {
    const SamplerConfig& sc = samplers[i];
    const std::string path = Indexed("samplers", i);
    try {
      ParseSamplerMethod(sc.method);
    } catch (const ConfigError&) {
      throw ConfigError(path + ".method", "unknown sampler method '" + sc.method + "'");
    }
    if (sc.steps == 0) throw ConfigError(path + ".steps", "must be >= 1");
    if (!IsKnownU(sc.u)) {
      throw ConfigError(path + ".u", "unknown diffusion preset '" + sc.u + "'");
    }
    if (!(sc.t_end > 0.0 && sc.t_end <= 1.0)) {
      throw ConfigError(path + ".t_end", "must be in (0, 1]");
    }
    std::vector<double> times;
    for (double t : record_times) {
      if (t <= sc.t_end) times.push_back(t);
    }
    try {
      RecordStepsForTimes(times, sc.steps, sc.t_end);
    } catch (const ArgumentError& e) {
      throw ConfigError("record_times", std::string(e.what()) + " of " + path);
    }
  }
  const auto& grid = rate_study.n_grid;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw ConfigError("rate_study.n_grid", "must be strictly increasing");
    }
  }
}

json ExperimentConfig::ToJson() const {
  json j;
  j["name"] = name;
  j["schedule"] = schedule;
  j["data"] = {{"f", data.f},
               {"noise_sd", data.noise_sd},
               {"k", data.k},
               {"x_low", data.x_low},
               {"x_high", data.x_high},
               {"linear_coefficients", data.linear_coefficients},
               {"intercept", data.intercept},
               {"constant", data.constant}};
  json train = fields.train.ToJson();
  train.erase("seed");  // derived from the run seed
  j["fields"] = {{"source", fields.source},
                 {"score", fields.score},
                 {"hidden_widths", fields.hidden_widths},
                 {"output_clamp", fields.output_clamp ? json(*fields.output_clamp)
                                                      : json(nullptr)},
                 {"train", train},
                 {"drift_checkpoint", fields.drift_checkpoint},
                 {"denoiser_checkpoint", fields.denoiser_checkpoint}};
  j["samplers"] = json::array();
  for (const auto& s : samplers) {
    j["samplers"].push_back(
        {{"method", s.method}, {"steps", s.steps}, {"u", s.u}, {"t_end", s.t_end}});
  }
  j["conditions"] = conditions;
  j["n_samples"] = n_samples;
  j["record_times"] = record_times;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["output_dir"] = output_dir;
  j["rate_study"] = {{"n_grid", rate_study.n_grid},
                     {"steps", rate_study.steps},
                     {"batch_size", rate_study.batch_size},
                     {"hidden_widths", rate_study.hidden_widths},
                     {"probes", rate_study.probes}};
  return j;
}

ExperimentConfig ExperimentConfig::FromJson(const json& j) {
  ExperimentConfig cfg;
  ObjectReader root(j, "");
  root.Get("name", cfg.name);
  root.Get("schedule", cfg.schedule);
  if (const json* data = root.Child("data")) {
    ObjectReader r(*data, "data");
    r.Get("f", cfg.data.f);
    r.Get("noise_sd", cfg.data.noise_sd);
    r.Get("k", cfg.data.k);
    r.Get("x_low", cfg.data.x_low);
    r.Get("x_high", cfg.data.x_high);
    r.Get("linear_coefficients", cfg.data.linear_coefficients);
    r.Get("intercept", cfg.data.intercept);
    r.Get("constant", cfg.data.constant);
    r.Finish();
  }
  if (const json* fields = root.Child("fields")) {
    ObjectReader r(*fields, "fields");
    r.Get("source", cfg.fields.source);
    r.Get("score", cfg.fields.score);
    r.Get("hidden_widths", cfg.fields.hidden_widths);
    if (const json* clamp = r.Child("output_clamp"); clamp && !clamp->is_null()) {
      if (!clamp->is_number()) {
        throw ConfigError("fields.output_clamp", "expected a number or null");
      }
      cfg.fields.output_clamp = clamp->get<double>();
    }
    r.Get("drift_checkpoint", cfg.fields.drift_checkpoint);
    r.Get("denoiser_checkpoint", cfg.fields.denoiser_checkpoint);
    if (const json* train = r.Child("train")) {
      ObjectReader t(*train, "fields.train");
      t.Get("steps", cfg.fields.train.steps);
      t.Get("batch_size", cfg.fields.train.batch_size);
      t.Get("n_tuples", cfg.fields.train.n_tuples);
      t.Get("lr", cfg.fields.train.lr);
      t.Get("lr_final", cfg.fields.train.lr_final);
      t.Get("standardize", cfg.fields.train.standardize);
      t.Finish();
    }
    r.Finish();
  }
  if (const json* samplers = root.Child("samplers")) {
    if (!samplers->is_array()) throw ConfigError("samplers", "expected an array");
    for (std::size_t i = 0; i < samplers->size(); ++i) {
      ObjectReader r((*samplers)[i], Indexed("samplers", i));
      SamplerConfig sc;
      r.Get("method", sc.method);
      r.Get("steps", sc.steps);
      r.Get("u", sc.u);
      r.Get("t_end", sc.t_end);
      r.Finish();
      cfg.samplers.push_back(sc);
    }
  }
  root.Get("conditions", cfg.conditions);
  root.Get("n_samples", cfg.n_samples);
  root.Get("record_times", cfg.record_times);
  if (const json* seed = root.Child("seed"); seed && !seed->is_null()) {
    if (!seed->is_number_unsigned()) {
      throw ConfigError("seed", "expected an unsigned 64-bit integer");
    }
    cfg.seed = seed->get<std::uint64_t>();
  }
  root.Get("output_dir", cfg.output_dir);
  if (const json* rate = root.Child("rate_study")) {
    ObjectReader r(*rate, "rate_study");
    r.Get("n_grid", cfg.rate_study.n_grid);
    r.Get("steps", cfg.rate_study.steps);
    r.Get("batch_size", cfg.rate_study.batch_size);
    r.Get("hidden_widths", cfg.rate_study.hidden_widths);
    r.Get("probes", cfg.rate_study.probes);
    r.Finish();
  }
  root.Finish();
  cfg.Validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::FromFile(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return FromJson(j);
}

ExperimentConfig BuiltinConfig(std::string_view name) {
  ExperimentConfig cfg;
  cfg.name = std::string(name);
  cfg.schedule = "paper-7-1";
  cfg.conditions = {Vector(5, 0.0), Vector(5, 2.0)};
  cfg.n_samples = 5000;
  cfg.record_times = {0.2, 0.4, 0.6, 0.8, 1.0};
  cfg.seed = 20240229;
  cfg.samplers = {{.method = "ode-euler", .steps = 1000, .u = "zero"},
                  {.method = "sde-euler-maruyama", .steps = 1000, .u = "quartic"}};
  cfg.output_dir = "csi-out/" + cfg.name;
  if (name == "reproduce-fig1") {
    cfg.fields.source = "oracle";
    cfg.fields.score = "oracle";
  } else if (name == "reproduce-fig1-fitted") {
    cfg.fields.source = "fitted";
    cfg.fields.score = "from-drift";
    cfg.fields.train = TrainConfig{.steps = 20000,
                                   .batch_size = 256,
                                   .n_tuples = 100000,
                                   .lr = 1e-3,
                                   .lr_final = 1e-5};
    cfg.n_samples = 2000;
  } else if (name == "marginal-check") {
    cfg.fields.source = "oracle";
    cfg.fields.score = "from-drift";
    cfg.record_times = {0.2, 0.4, 0.6, 0.8};
  } else if (name == "rate-study-default") {
    cfg.fields.source = "fitted";
    cfg.rate_study.n_grid = {512, 1024, 2048, 4096, 8192};
    cfg.samplers.clear();
  } else {
    throw ConfigError("builtin", "unknown builtin config '" + std::string(name) + "'");
  }
  cfg.Validate();
  return cfg;
}

const std::vector<std::string>& BuiltinConfigNames() {
  static const std::vector<std::string> kNames = {
      "reproduce-fig1", "reproduce-fig1-fitted", "marginal-check",
      "rate-study-default"};
  return kNames;
}

std::uint64_t ResolveSeed(std::optional<std::uint64_t> flag,
                          std::optional<std::uint64_t> config,
                          const char* env_value) {
  if (flag) return *flag;
  if (config) return *config;
  if (env_value != nullptr && *env_value != '\0') {
    const std::string s(env_value);
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      if (s.find_first_not_of("0123456789") != std::string::npos) throw 0;
      v = std::stoull(s, &used);
    } catch (...) {
      throw ConfigError("CSI_SEED", "expected an unsigned integer, got '" + s + "'");
    }
    return v;
  }
  return 0;
}

std::string ConfigHash(const ExperimentConfig& cfg) {
  return HexId(Fnv1a64(cfg.ToJson().dump()));
}

std::unique_ptr<RegressionSource> MakeDataSource(const DataModelConfig& data) {
  RegressionModel model;
  if (data.f == "paper-7-1-f") {
    model = RegressionModel::RegressionExperiment();
  } else if (data.f == "linear") {
    model = RegressionModel::Linear(data.linear_coefficients, data.intercept);
  } else if (data.f == "custom-constant") {
    model = RegressionModel::Constant(data.constant, data.k);
  } else {
    throw ConfigError("data.f", "unknown regression function '" + data.f + "'");
  }
  model.noise_sd = data.noise_sd;
  return std::make_unique<RegressionSource>(std::move(model), data.x_low,
                                            data.x_high);
}

double LogLogSlope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ArgumentError("log-log slope needs >= 2 paired points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw ArgumentError("log-log slope needs positive values");
    }
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> ReadLastColumn(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<double> out;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto comma = line.rfind(',');
    const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": not a number: '" + cell + "'");
    }
  }
  return out;
}

namespace {

std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes files under one output directory and remembers their names.
class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : root_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  }

  // Opens a CSV and writes the timestamp line.
  std::ofstream Csv(const std::string& name) {
    std::ofstream os = Open(name);
    os << "# generated_at=" << UtcTimestamp() << '\n';
    return os;
  }

  std::ofstream Open(const std::string& name, bool binary = false) {
    std::ofstream os(root_ / name, binary ? std::ios::binary : std::ios::out);
    if (!os) throw IoError("cannot write '" + (root_ / name).string() + "'");
    files_.push_back(name);
    return os;
  }

  void WriteJson(const std::string& name, const json& j) {
    std::ofstream os = Open(name);
    os << j.dump(2) << '\n';
  }

  const std::filesystem::path& root() const { return root_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return Mix64(seed ^ Mix64(a * 0x9e3779b97f4a7c15ULL + b));
}

// Derived-seed tags.
constexpr std::uint64_t kTagFitDrift = 101;
constexpr std::uint64_t kTagFitDenoiser = 102;
constexpr std::uint64_t kTagInterpolation = 103;
constexpr std::uint64_t kTagSampler = 104;
constexpr std::uint64_t kTagProbes = 105;
constexpr std::uint64_t kTagBatch = 106;

std::string TimeTag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "t%.3f", t);
  return buf;
}

std::string ConditionId(std::size_t i) { return "X" + std::to_string(i); }

struct Fields {
  FieldModel drift;
  std::optional<FieldModel> score;
  json info = json::object();
};

NetConfig MakeNetConfig(const ExperimentConfig& cfg, std::size_t k) {
  NetConfig net = NetConfig::ForField(k, 1, cfg.fields.hidden_widths);
  net.output_clamp = cfg.fields.output_clamp;
  return net;
}

json FitInfo(const FitResult& fit, const FieldModel& oracle,
             std::span<const FieldProbe> probes) {
  const OracleComparison cmp = CompareFields(fit.model, oracle, probes);
  return {{"provenance", fit.model.provenance()},
          {"steps", fit.loss_history.size()},
          {"initial_loss", fit.initial_loss},
          {"final_loss", fit.final_loss},
          {"oracle_mse", cmp.mse},
          {"oracle_variance", cmp.oracle_variance},
          {"oracle_relative_mse", cmp.relative()}};
}

Fields BuildFields(const ExperimentConfig& cfg, std::uint64_t seed,
                   const Schedule& s, const RegressionSource& src, OutputDir& out,
                   bool need_score) {
  const RegressionModel& model = src.model();
  const std::size_t k = model.k;
  if (cfg.fields.source == "oracle") {
    Fields f{.drift = OracleDriftField(model, s), .score = std::nullopt};
    if (need_score) {
      if (cfg.fields.score == "oracle") {
        f.score = OracleScoreField(model, s);
      } else if (cfg.fields.score == "from-drift") {
        f.score = ScoreFromDrift(f.drift, s);
      } else {
        f.score = ScoreFromDenoiser(OracleDenoiserField(model, s), s);
      }
    }
    return f;
  }

  const auto probes = MakeProbeGrid(src, s, 256, DeriveSeed(seed, kTagProbes));
  json info = json::object();
  auto fit_or_load = [&](bool drift_role) -> FieldModel {
    const std::string& path =
        drift_role ? cfg.fields.drift_checkpoint : cfg.fields.denoiser_checkpoint;
    const std::string role = drift_role ? "drift" : "denoiser";
    if (!path.empty()) {
      const Checkpoint ckpt = LoadCheckpointFile(path);
      if (ckpt.role != role) {
        throw ConfigError(std::string("fields.") + role + "_checkpoint",
                          "checkpoint role is '" + ckpt.role + "'");
      }
      info[role] = {{"checkpoint", path}};
      return FieldFromCheckpoint(ckpt, k, s, std::filesystem::path(path).filename().string());
    }
    TrainConfig train = cfg.fields.train;
    train.seed = DeriveSeed(seed, drift_role ? kTagFitDrift : kTagFitDenoiser);
    const NetConfig net = MakeNetConfig(cfg, k);
    FitResult fit = drift_role ? FitDrift(src, s, net, train)
                               : FitDenoiser(src, s, net, train);
    const std::string name = role + ".ckpt";
    {
      std::ofstream os = out.Open(name, /*binary=*/true);
      SaveCheckpoint(os, fit.MakeCheckpoint(train));
    }
    info[role] = FitInfo(fit, drift_role ? OracleDriftField(model, s)
                                         : OracleDenoiserField(model, s),
                         probes);
    info[role]["checkpoint"] = name;
    return fit.model;
  };

  Fields f{.drift = fit_or_load(true), .score = std::nullopt};
  if (need_score) {
    if (cfg.fields.score == "from-drift") {
      f.score = ScoreFromDrift(f.drift, s);
    } else if (cfg.fields.score == "from-denoiser") {
      f.score = ScoreFromDenoiser(fit_or_load(false), s);
    } else {
      f.score = OracleScoreField(model, s);
    }
    // Score quality is measured where the score is finite for every shipped
    // preset (interior probes).
    const OracleComparison cmp =
        CompareFields(*f.score, OracleScoreField(model, s), probes);
    info["score"] = {{"provenance", f.score->provenance()},
                     {"oracle_mse", cmp.mse},
                     {"oracle_variance", cmp.oracle_variance},
                     {"oracle_relative_mse", cmp.relative()}};
  }
  f.info = std::move(info);
  return f;
}

bool NeedsScore(const ExperimentConfig& cfg) {
  for (const auto& sc : cfg.samplers) {
    if (ParseSamplerMethod(sc.method) == SamplerMethod::kSdeEulerMaruyama) return true;
  }
  return false;
}

SamplerSpec MakeSpec(const SamplerConfig& sc, const Schedule& s,
                     std::span<const double> record_times, std::uint64_t seed) {
  SamplerSpec spec;
  spec.method = ParseSamplerMethod(sc.method);
  spec.steps = sc.steps;
  spec.u = UPreset(sc.u, &s);
  spec.seed = seed;
  spec.t_end = sc.t_end;
  std::vector<double> times;
  for (double t : record_times) {
    if (t <= sc.t_end) times.push_back(t);
  }
  spec.record_steps = RecordStepsForTimes(times, sc.steps, sc.t_end);
  spec.record_steps.push_back(sc.steps);
  return spec;
}

void WriteSamplesCsv(OutputDir& out, const std::string& name,
                     std::span<const double> samples) {
  std::ofstream os = out.Csv(name);
  os << "sample_id,z_1\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    os << i << ',' << samples[i] << '\n';
  }
}

ExperimentConfig WithSeed(const ExperimentConfig& cfg, std::uint64_t& seed) {
  ExperimentConfig resolved = cfg;
  seed = ResolveSeed(std::nullopt, cfg.seed, std::getenv("CSI_SEED"));
  resolved.seed = seed;
  resolved.Validate();
  return resolved;
}

void WriteManifest(OutputDir& out, const ExperimentConfig& cfg,
                   const std::string& command) {
  json manifest;
  manifest["format"] = "csi-run-v1";
  manifest["command"] = command;
  manifest["config"] = cfg.ToJson();
  manifest["config_hash"] = ConfigHash(cfg);
  manifest["seed"] = *cfg.seed;
  manifest["generated_at"] = UtcTimestamp();
  std::vector<std::string> files = out.files();
  files.push_back("run_manifest.json");
  manifest["files"] = files;
  out.WriteJson("run_manifest.json", manifest);
}

void AddRecord(json& records, std::string metric, double t,
               const std::string& condition, double value, std::size_t n) {
  records.push_back(MetricRecord{std::move(metric), t, condition, value, n}.ToJson());
}

}  // namespace

ReportBundle RunExperiment(const ExperimentConfig& in) {
  std::uint64_t seed = 0;
  const ExperimentConfig cfg = WithSeed(in, seed);
  const Schedule s = MakeSchedule(cfg.schedule);
  const auto src = MakeDataSource(cfg.data);
  const RegressionModel& model = src->model();
  OutputDir out(cfg.output_dir);

  const Fields fields = BuildFields(cfg, seed, s, *src, out, NeedsScore(cfg));

  json records = json::array();
  json conditions = json::array();
  for (std::size_t c = 0; c < cfg.conditions.size(); ++c) {
    const Vector& x = cfg.conditions[c];
    const std::string cid = ConditionId(c);
    const double fx = model.f(x);
    conditions.push_back({{"id", cid}, {"x", x}, {"f_x", fx}});

    // Interpolation draws per record time.
    std::vector<Vector> interp;
    for (std::size_t ti = 0; ti < cfg.record_times.size(); ++ti) {
      const double t = cfg.record_times[ti];
      interp.push_back(SampleInterpolation(
          *src, s, x, t, cfg.n_samples, DeriveSeed(seed, kTagInterpolation, c),
          static_cast<std::uint64_t>(ti) << 32));
      WriteSamplesCsv(out, "samples_" + cid + "_interpolation_" + TimeTag(t) + ".csv",
                      interp.back());
    }

    std::vector<std::pair<std::string, std::vector<Vector>>> processes;
    processes.emplace_back("interpolation", interp);
    for (std::size_t si = 0; si < cfg.samplers.size(); ++si) {
      const SamplerConfig& sc = cfg.samplers[si];
      const SamplerSpec spec =
          MakeSpec(sc, s, cfg.record_times, DeriveSeed(seed, kTagSampler, c * 64 + si));
      const auto trajs = Sample(fields.drift, fields.score ? &*fields.score : nullptr,
                                x, cfg.n_samples, spec);
      std::vector<Vector> per_time;
      for (double t : cfg.record_times) {
        per_time.push_back(t <= sc.t_end ? StatesAt(trajs, t) : Vector{});
        if (per_time.back().empty()) continue;
        WriteSamplesCsv(out, "samples_" + cid + "_" + sc.method + "_" + TimeTag(t) + ".csv",
                        per_time.back());
      }
      processes.emplace_back(sc.method, std::move(per_time));
    }

    for (std::size_t ti = 0; ti < cfg.record_times.size(); ++ti) {
      const double t = cfg.record_times[ti];
      const SchedulePoint p = s.At(t);
      const double target_mean = p.b * fx;
      const double target_sd = std::sqrt(RegressionVariance(model, p));
      const EmpiricalDistribution target(
          NormalQuantileSample(target_mean, target_sd, cfg.n_samples));
      const EmpiricalDistribution reference(interp[ti]);
      AddRecord(records, "target.mean", t, cid, target_mean, cfg.n_samples);
      AddRecord(records, "target.variance", t, cid, target_sd * target_sd,
                cfg.n_samples);
      for (const auto& [name, per_time] : processes) {
        if (per_time[ti].empty()) continue;
        const EmpiricalDistribution sample(per_time[ti]);
        const SummaryStats stats = Summarize(sample);
        const std::size_t n = sample.n();
        AddRecord(records, name + ".mean", t, cid, stats.mean, n);
        AddRecord(records, name + ".variance", t, cid, stats.variance, n);
        AddRecord(records, name + ".w2_vs_target", t, cid, W2(sample, target), n);
        AddRecord(records, name + ".ks_vs_target", t, cid,
                  KsStatistic(sample, target), n);
        if (name == "interpolation") continue;
        AddRecord(records, name + ".ks_vs_interpolation", t, cid,
                  KsStatistic(sample, reference), n);
        AddRecord(records, name + ".w2_vs_interpolation", t, cid,
                  W2(sample, reference), n);
        AddRecord(records, name + ".kl_vs_interpolation", t, cid,
                  KlHistogram(reference, sample, 50, target_mean - 6.0 * target_sd,
                              target_mean + 6.0 * target_sd),
                  n);
      }
    }
  }

  json metrics = {{"records", records}, {"fields", fields.info}};
  out.WriteJson("metrics.json", metrics);
  json summary = {{"config_hash", ConfigHash(cfg)},
                  {"seed", seed},
                  {"conditions", conditions},
                  {"fields", fields.info},
                  {"records", records}};
  WriteManifest(out, cfg, "run");
  return {out.root(), out.files(), std::move(summary)};
}

ReportBundle RunRateStudy(const ExperimentConfig& in) {
  std::uint64_t seed = 0;
  const ExperimentConfig cfg = WithSeed(in, seed);
  const auto& grid = cfg.rate_study.n_grid;
  if (grid.size() < 2) {
    throw ArgumentError("rate_study: n_grid needs at least 2 entries");
  }
  const Schedule s = MakeSchedule(cfg.schedule);
  const auto src = MakeDataSource(cfg.data);
  const RegressionModel& model = src->model();
  OutputDir out(cfg.output_dir);

  const auto probes =
      MakeProbeGrid(*src, s, cfg.rate_study.probes, DeriveSeed(seed, kTagProbes));
  const FieldModel oracle_drift = OracleDriftField(model, s);
  const FieldModel oracle_score = OracleScoreField(model, s);
  NetConfig net = NetConfig::ForField(model.k, 1, cfg.rate_study.hidden_widths);
  net.output_clamp = cfg.fields.output_clamp;

  std::vector<double> ns, mse_drift, mse_score;
  json rows = json::array();
  for (std::size_t n : grid) {
    TrainConfig train = cfg.fields.train;
    train.n_tuples = n;
    train.steps = cfg.rate_study.steps;
    train.batch_size = cfg.rate_study.batch_size;
    // The same seed for every n: samples are nested prefixes of one stream.
    train.seed = DeriveSeed(seed, kTagFitDrift);
    const FitResult fit = FitDrift(*src, s, net, train);
    const double md = CompareFields(fit.model, oracle_drift, probes).mse;
    const double ms =
        CompareFields(ScoreFromDrift(fit.model, s), oracle_score, probes).mse;
    ns.push_back(static_cast<double>(n));
    mse_drift.push_back(md);
    mse_score.push_back(ms);
    rows.push_back({{"n", n}, {"oracle_mse_drift", md}, {"oracle_mse_score", ms}});
  }
  const double slope_drift = LogLogSlope(ns, mse_drift);
  const double slope_score = LogLogSlope(ns, mse_score);
  {
    std::ofstream os = out.Csv("rate_study.csv");
    os << "n,oracle_mse_drift,oracle_mse_score\n" << std::setprecision(17);
    for (std::size_t i = 0; i < ns.size(); ++i) {
      os << grid[i] << ',' << mse_drift[i] << ',' << mse_score[i] << '\n';
    }
  }
  json summary = {{"rows", rows},
                  {"slope_drift", slope_drift},
                  {"slope_score", slope_score},
                  {"config_hash", ConfigHash(cfg)},
                  {"seed", seed}};
  out.WriteJson("rate_study.json", summary);
  WriteManifest(out, cfg, "rate-study");
  return {out.root(), out.files(), std::move(summary)};
}

ReportBundle RunSimulate(const ExperimentConfig& in) {
  std::uint64_t seed = 0;
  const ExperimentConfig cfg = WithSeed(in, seed);
  const Schedule s = MakeSchedule(cfg.schedule);
  const auto src = MakeDataSource(cfg.data);
  OutputDir out(cfg.output_dir);
  const auto batch = DrawTrainingBatch(*src, s, cfg.n_samples, TimeMode::UniformInterior(),
                                       DeriveSeed(seed, kTagBatch));
  {
    std::ofstream os = out.Csv("training_batch.csv");
    WriteBatchCsv(os, batch);
  }
  for (std::size_t c = 0; c < cfg.conditions.size(); ++c) {
    for (std::size_t ti = 0; ti < cfg.record_times.size(); ++ti) {
      const double t = cfg.record_times[ti];
      const Vector samples = SampleInterpolation(
          *src, s, cfg.conditions[c], t, cfg.n_samples,
          DeriveSeed(seed, kTagInterpolation, c), static_cast<std::uint64_t>(ti) << 32);
      WriteSamplesCsv(out,
                      "samples_" + ConditionId(c) + "_interpolation_" + TimeTag(t) + ".csv",
                      samples);
    }
  }
  WriteManifest(out, cfg, "simulate");
  json summary = {{"tuples", batch.size()}, {"config_hash", ConfigHash(cfg)}, {"seed", seed}};
  return {out.root(), out.files(), std::move(summary)};
}

ReportBundle RunFit(const ExperimentConfig& in) {
  std::uint64_t seed = 0;
  ExperimentConfig cfg = WithSeed(in, seed);
  cfg.fields.source = "fitted";
  const Schedule s = MakeSchedule(cfg.schedule);
  const auto src = MakeDataSource(cfg.data);
  OutputDir out(cfg.output_dir);
  const bool need_score = cfg.fields.score != "oracle";
  const Fields fields = BuildFields(cfg, seed, s, *src, out, need_score);
  out.WriteJson("fit_report.json", fields.info);
  WriteManifest(out, cfg, "fit");
  return {out.root(), out.files(), fields.info};
}

ReportBundle RunSample(const ExperimentConfig& in) {
  std::uint64_t seed = 0;
  const ExperimentConfig cfg = WithSeed(in, seed);
  if (cfg.samplers.empty()) throw ConfigError("samplers", "must be nonempty");
  const Schedule s = MakeSchedule(cfg.schedule);
  const auto src = MakeDataSource(cfg.data);
  OutputDir out(cfg.output_dir);
  const Fields fields = BuildFields(cfg, seed, s, *src, out, NeedsScore(cfg));
  json terminal_stats = json::array();
  for (std::size_t c = 0; c < cfg.conditions.size(); ++c) {
    const std::string cid = ConditionId(c);
    for (std::size_t si = 0; si < cfg.samplers.size(); ++si) {
      const SamplerConfig& sc = cfg.samplers[si];
      const SamplerSpec spec =
          MakeSpec(sc, s, cfg.record_times, DeriveSeed(seed, kTagSampler, c * 64 + si));
      const auto trajs = Sample(fields.drift, fields.score ? &*fields.score : nullptr,
                                cfg.conditions[c], cfg.n_samples, spec);
      {
        std::ofstream os = out.Csv("trajectories_" + cid + "_" + sc.method + ".csv");
        WriteTrajectoriesCsv(os, trajs);
      }
      {
        std::ofstream os = out.Csv("terminal_" + cid + "_" + sc.method + ".csv");
        WriteTerminalCsv(os, trajs);
      }
      Vector terminal;
      for (const auto& tr : trajs) terminal.push_back(tr.terminal.front());
      const SummaryStats st = Summarize(EmpiricalDistribution(terminal));
      terminal_stats.push_back({{"condition_id", cid},
                                {"method", sc.method},
                                {"mean", st.mean},
                                {"variance", st.variance},
                                {"n", st.n}});
    }
  }
  json summary = {{"terminal", terminal_stats}, {"fields", fields.info}};
  out.WriteJson("sample_summary.json", summary);
  WriteManifest(out, cfg, "sample");
  return {out.root(), out.files(), std::move(summary)};
}

}  // namespace csi
