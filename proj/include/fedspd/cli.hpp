// Copyright 2026 The fedspd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Configuration, orchestration and artifact emission for the fedspd tool.
//
// Config files are sectioned key = value text ("[section]" headers, '#' or
// ';' comments). Every key is documented in docs/config.md. Keys are
// addressed as "section.key" in overrides and error messages.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedspd/engine.hpp"

namespace fedspd::cli {

inline constexpr const char* kOutputDirEnv = "FEDSPD_OUTPUT_DIR";
inline constexpr const char* kDefaultOutputDir = "fedspd-out";

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitDataIntegrity = 3,
  kExitRuntime = 4,
};

enum class DataSource { kAdult, kLibsvm, kSynthetic };

struct DataConfig {
  DataSource source = DataSource::kAdult;
  std::string train_path = "data/adult/adult.data";
  std::string test_path = "data/adult/adult.test";
  std::size_t dim = 0;              // libsvm only; 0 infers
  std::string train_sha256;         // optional integrity pins
  std::string test_sha256;
  // Synthetic generator.
  std::size_t synthetic_dim = 10;
  std::size_t synthetic_samples = 1000;
  std::size_t synthetic_test_samples = 0;
  double synthetic_margin = 0.0;
  double synthetic_label_noise = 0.0;
  std::uint64_t synthetic_seed = 7;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ExperimentConfig {
  engine::Algorithm algorithm = engine::Algorithm::kFedSpdDp;
  std::vector<std::uint64_t> seeds = {1};
  unsigned threads = 1;
  std::size_t metric_stride = 1;
  bool record_wallclock = false;
  std::string output_dir;  // empty: environment, then the built-in default
  std::size_t num_clients = 100;
  engine::HyperParams hp;
  std::optional<double> total_budget = 1.0;
  std::optional<double> per_round_eps;
  bool privacy_enabled = true;
  double delta = 1e-4;
  int tau_max = privacy::kDefaultTauMax;
  DataConfig data;
  bool h_criterion = false;  // attach the centralized reference and report H
  double reference_tolerance = 1e-9;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Parses config text. Unknown sections or keys and malformed values raise
// InvalidInput naming the key path; syntax errors raise ParseError.
ExperimentConfig ParseConfig(const std::string& text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// Canonical form: every key, fixed order, 17 significant digits.
std::string SerializeConfig(const ExperimentConfig& config);

// Applies "section.key=value". Unknown keys raise InvalidInput.
void ApplyOverride(ExperimentConfig& config, const std::string& assignment);
void SetValue(ExperimentConfig& config, const std::string& key_path, const std::string& value);

// Checks every precondition reachable from the config before any compute.
// Throws InvalidInput with one line per violation, each naming its key path.
void ValidateConfig(const ExperimentConfig& config);

engine::ExperimentSpec ToSpec(const ExperimentConfig& config, std::uint64_t seed);

// SHA-256 of the canonical serialization, lowercase hex.
std::string ConfigHash(const ExperimentConfig& config);
std::string Sha256Hex(const std::string& bytes);
std::string Sha256File(const std::filesystem::path& path);

std::filesystem::path ResolveOutputDir(const std::string& configured);

// ---- artifacts -----------------------------------------------------------

inline constexpr const char* kCsvColumns[] = {
    "round",           "alfv",        "test_accuracy", "consensus_gap", "spent_eps_closed",
    "spent_eps_ledger", "noise_sigma", "gamma",         "wallclock_ms"};

std::string FormatDouble(double v);
std::string FormatRoundCsv(const std::vector<bench::RoundRecord>& records);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `column`; SchemaError naming it when absent.
  std::size_t Column(const std::string& column) const;
};
CsvTable ParseCsv(const std::string& text);
CsvTable ReadCsv(const std::filesystem::path& path);

void WriteTextFile(const std::filesystem::path& path, const std::string& text);
std::string ReadTextFile(const std::filesystem::path& path);

// ---- plotting ------------------------------------------------------------

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label = "round";
  std::string y_label;
  std::vector<Series> series;
};

// Static SVG line plot; identical input gives identical bytes.
std::string RenderSvg(const PlotSpec& plot);

// ---- data ----------------------------------------------------------------

struct LoadedData {
  Dataset train;
  Dataset test;
  std::string train_sha256;
  std::string test_sha256;
};

// Loads the configured data. Missing files, hash mismatches and malformed
// rows raise DataIntegrityError.
LoadedData LoadData(const DataConfig& data);

// ---- commands ------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  engine::RunResult result;
  std::string csv;
  std::filesystem::path csv_path;
};

struct RunOutput {
  std::filesystem::path dir;
  std::vector<SeedRun> runs;
  std::string summary_json;
};

// Executes every seed, writes run_seed<k>.csv, config.ini and summary.json.
RunOutput RunConfig(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    const LoadedData& data, std::ostream& log);

struct SweepOutput {
  std::filesystem::path dir;
  std::vector<std::pair<std::string, RunOutput>> runs;
  std::filesystem::path merged_csv;
};

// Axis is one of total_budget, K, Q, algorithm, per_round_eps.
SweepOutput RunSweep(const ExperimentConfig& config, const std::string& axis,
                     const std::vector<std::string>& values,
                     const std::filesystem::path& out_dir, const LoadedData& data,
                     std::ostream& log);

struct AccountantQuery {
  std::size_t local_steps = 5;
  std::size_t batch_size = 10;
  std::size_t shard_size = 325;
  double client_prob = 0.2;
  double rounds = 100;
  std::optional<double> eps;      // per-round
  std::optional<double> eps_bar;  // total
  double delta = 1e-4;
  double c0 = privacy::kDefaultC0;
  int tau_max = privacy::kDefaultTauMax;
};

struct AccountantRow {
  SamplingMode mode;
  double q = 0.0;
  double eps_round = 0.0;
  double eps_bar_closed = 0.0;
  double eps_bar_ledger = 0.0;
};

std::vector<AccountantRow> Accountant(const AccountantQuery& query);
std::string FormatAccountant(const AccountantQuery& query,
                             const std::vector<AccountantRow>& rows);

// Renders seed-averaged curves of `figure` (a CSV column or an alias such as
// "accuracy") found under `artifact_dir`. Returns the written SVG path.
std::filesystem::path PlotArtifacts(const std::filesystem::path& artifact_dir,
                                    const std::string& figure,
                                    const std::filesystem::path& output = {});

struct PrepOutput {
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::string train_sha256;
  std::string test_sha256;
  std::size_t dim = 0;
};

// Materializes the preprocessed dataset as libsvm files plus manifest.json.
PrepOutput PrepData(const DataConfig& data, const std::filesystem::path& out_dir);

// Entry point shared by the binary and the tests. Maps exceptions to exit
// codes and prints errors to `err`.
int Main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fedspd::cli
