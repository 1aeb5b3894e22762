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

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedspd/cli.hpp"
#include "fedspd/datastore.hpp"
#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd::cli {

namespace {

using Json = nlohmann::ordered_json;

Json JsonNumber(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

// Preconditions that depend on the loaded data (shard sizes).
void ValidateAgainstData(const ExperimentConfig& c, const Dataset& train) {
  std::vector<std::string> p;
  const std::size_t m = train.size();
  if (c.num_clients > m) {
    p.push_back("clients.N: " + std::to_string(c.num_clients) + " clients exceed the " +
                std::to_string(m) + " training samples");
  } else {
    const std::size_t smallest = m / c.num_clients;
    const auto& hp = c.hp;
    if (hp.sampling == SamplingMode::kWithoutReplacement && hp.batch_size > smallest) {
      p.push_back("optimizer.b: WOR batch exceeds the smallest shard (" +
                  std::to_string(smallest) + " samples)");
    }
    const bool multi_step = c.algorithm == engine::Algorithm::kFedSpdDp ||
                            c.algorithm == engine::Algorithm::kDpFedAvg;
    const std::size_t touched = multi_step ? hp.local_steps * hp.batch_size : hp.batch_size;
    if (c.privacy_enabled && hp.sampling == SamplingMode::kWithoutReplacement &&
        c.algorithm != engine::Algorithm::kDpAdmm && touched >= smallest) {
      p.push_back("optimizer.Q, optimizer.b: WOR sampling ratio Q*b/m must stay below 1 (Q*b=" +
                  std::to_string(touched) + ", smallest shard m=" + std::to_string(smallest) +
                  ")");
    }
  }
  if (!p.empty()) {
    std::string msg = "invalid configuration for the loaded data:";
    for (const auto& line : p) msg += "\n  - " + line;
    throw InvalidInput(msg);
  }
}

std::string SeedCsvName(std::uint64_t seed) { return "run_seed" + std::to_string(seed) + ".csv"; }

}  // namespace

RunOutput RunConfig(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    const LoadedData& data, std::ostream& log) {
  ValidateConfig(config);
  ValidateAgainstData(config, data.train);
  RunOutput output;
  output.dir = out_dir;
  std::filesystem::create_directories(out_dir);
  const std::string config_text = SerializeConfig(config);
  const std::string hash = Sha256Hex(config_text);

  Json runs = Json::array();
  double acc_sum = 0.0, alfv_sum = 0.0;
  for (std::uint64_t seed : config.seeds) {
    const engine::ExperimentSpec spec = ToSpec(config, seed);
    engine::Federation fed = engine::BuildFederation(spec, data.train);
    std::optional<bench::ReferenceSolution> reference;
    if (config.h_criterion) {
      std::vector<const Dataset*> shards;
      for (const auto& c : fed.clients) shards.push_back(&c.shard);
      reference = bench::SolveReference(shards, config.hp.lambda_r, config.reference_tolerance);
    }
    engine::ExperimentData ed{&data.train, &data.test, reference ? &*reference : nullptr};
    SeedRun run;
    run.seed = seed;
    run.result = engine::RunExperiment(spec, std::move(fed), ed);
    run.csv = FormatRoundCsv(run.result.records);
    run.csv_path = out_dir / SeedCsvName(seed);
    WriteTextFile(run.csv_path, run.csv);

    const auto& last = run.result.records.back();
    Json entry;
    entry["seed"] = seed;
    entry["csv"] = SeedCsvName(seed);
    entry["csv_sha256"] = Sha256Hex(run.csv);
    entry["final_test_accuracy"] = JsonNumber(last.test_accuracy);
    entry["final_alfv"] = JsonNumber(last.alfv);
    entry["final_consensus_gap"] = JsonNumber(last.consensus_gap);
    entry["spent_eps_closed"] = JsonNumber(run.result.spent_eps_closed_final);
    entry["spent_eps_ledger"] = JsonNumber(run.result.spent_eps_ledger_final);
    entry["spent_eps_ledger_max"] = JsonNumber(run.result.spent_eps_ledger_max_final);
    entry["eps_round"] = JsonNumber(run.result.mean_eps_round);
    entry["data_sampling_ratio"] = JsonNumber(run.result.mean_q);
    entry["gamma_condition_first_violation_round"] =
        run.result.gamma_condition_violation_round
            ? Json(*run.result.gamma_condition_violation_round)
            : Json(nullptr);
    entry["max_dual_norm"] = JsonNumber(run.result.max_dual_norm);
    if (reference) {
      entry["final_h_criterion"] = JsonNumber(last.h_criterion.value_or(NAN));
      entry["reference_converged"] = reference->converged;
    }
    runs.push_back(entry);
    acc_sum += last.test_accuracy;
    alfv_sum += last.alfv;
    log << engine::ToString(config.algorithm) << " seed " << seed << ": accuracy "
        << FormatDouble(last.test_accuracy) << ", ALFV " << FormatDouble(last.alfv)
        << ", ledger eps " << FormatDouble(run.result.spent_eps_ledger_final) << " -> "
        << run.csv_path.string() << "\n";
    output.runs.push_back(std::move(run));
  }

  Json summary;
  summary["config_hash"] = hash;
  summary["algorithm"] = engine::ToString(config.algorithm);
  summary["seeds"] = config.seeds;
  Json dj;
  dj["train_rows"] = data.train.size();
  dj["test_rows"] = data.test.size();
  dj["dim"] = data.train.dim();
  dj["train_sha256"] = data.train_sha256;
  dj["test_sha256"] = data.test_sha256;
  summary["data"] = dj;
  summary["runs"] = runs;
  const double n = static_cast<double>(config.seeds.size());
  summary["mean_final_test_accuracy"] = JsonNumber(acc_sum / n);
  summary["mean_final_alfv"] = JsonNumber(alfv_sum / n);
  summary["config"] = config_text;
  output.summary_json = summary.dump(2) + "\n";
  WriteTextFile(out_dir / "config.ini", config_text);
  WriteTextFile(out_dir / "summary.json", output.summary_json);
  return output;
}

SweepOutput RunSweep(const ExperimentConfig& config, const std::string& axis,
                     const std::vector<std::string>& values,
                     const std::filesystem::path& out_dir, const LoadedData& data,
                     std::ostream& log) {
  static const std::map<std::string, std::string> kAxes = {
      {"total_budget", "privacy.total_budget"}, {"per_round_eps", "privacy.per_round_eps"},
      {"K", "clients.K"}, {"Q", "optimizer.Q"}, {"algorithm", "run.algorithm"}};
  const auto it = kAxes.find(axis);
  if (it == kAxes.end()) {
    throw InvalidInput("sweep axis '" + axis +
                       "' is not one of total_budget, K, Q, algorithm, per_round_eps");
  }
  if (values.empty()) throw InvalidInput("sweep needs at least one value");
  // Validate every point before computing any of them.
  std::vector<ExperimentConfig> points;
  for (const auto& v : values) {
    ExperimentConfig point = config;
    SetValue(point, it->second, v);
    ValidateConfig(point);
    ValidateAgainstData(point, data.train);
    points.push_back(std::move(point));
  }
  SweepOutput output;
  output.dir = out_dir;
  std::ostringstream merged;
  merged << "axis,value,seed";
  for (const char* c : kCsvColumns) merged << ',' << c;
  merged << "\n";
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::filesystem::path dir = out_dir / (axis + "=" + values[k]);
    RunOutput run = RunConfig(points[k], dir, data, log);
    for (const auto& seed_run : run.runs) {
      const CsvTable table = ParseCsv(seed_run.csv);
      for (const auto& row : table.rows) {
        merged << axis << ',' << values[k] << ',' << seed_run.seed;
        for (const auto& cell : row) merged << ',' << cell;
        merged << "\n";
      }
    }
    output.runs.emplace_back(values[k], std::move(run));
  }
  output.merged_csv = out_dir / "sweep.csv";
  WriteTextFile(output.merged_csv, merged.str());
  return output;
}

std::vector<AccountantRow> Accountant(const AccountantQuery& query) {
  if (query.eps.has_value() == query.eps_bar.has_value()) {
    throw InvalidInput("give exactly one of --eps (per round) and --eps-bar (total)");
  }
  if (query.rounds < 0) throw InvalidInput("T must be nonnegative");
  if (!(query.client_prob > 0.0 && query.client_prob <= 1.0)) {
    throw InvalidInput("p must lie in (0, 1]");
  }
  std::vector<AccountantRow> rows;
  for (SamplingMode mode : {SamplingMode::kWithoutReplacement, SamplingMode::kWithReplacement}) {
    privacy::SamplingProfile profile;
    profile.mode = mode;
    profile.local_steps = query.local_steps;
    profile.batch_size = query.batch_size;
    profile.shard_size = query.shard_size;
    profile.client_prob = query.client_prob;
    AccountantRow row;
    row.mode = mode;
    row.q = privacy::DataSamplingRatio(profile);
    const auto amp = privacy::Amplification::Subsampled(row.q);
    if (query.rounds == 0) {
      rows.push_back(row);
      continue;
    }
    row.eps_round = query.eps ? *query.eps
                              : privacy::PerRoundEpsilon(*query.eps_bar, amp, query.client_prob,
                                                         query.rounds, query.c0);
    row.eps_bar_closed = privacy::TotalPrivacyLossClosedForm(
        row.eps_round, amp, query.client_prob, query.rounds, query.c0);
    row.eps_bar_ledger =
        privacy::SpentEpsilon(query.client_prob * query.rounds, amp, row.eps_round, query.delta,
                              query.delta, query.tau_max);
    rows.push_back(row);
  }
  return rows;
}

std::string FormatAccountant(const AccountantQuery& query,
                             const std::vector<AccountantRow>& rows) {
  std::ostringstream o;
  o << std::setprecision(12);
  o << "Q=" << query.local_steps << " b=" << query.batch_size << " m=" << query.shard_size
    << " p=" << query.client_prob << " T=" << query.rounds << " delta=" << query.delta << "\n";
  o << std::left << std::setw(10) << "sampling" << std::setw(16) << "q" << std::setw(16)
    << "eps_round" << std::setw(16) << "eps_bar_closed" << "eps_bar_ledger\n";
  o << std::setprecision(10);
  for (const auto& r : rows) {
    o << std::left << std::setw(10) << (r.mode == SamplingMode::kWithoutReplacement ? "WOR" : "WR")
      << std::setw(16) << r.q << std::setw(16) << r.eps_round << std::setw(16) << r.eps_bar_closed
      << r.eps_bar_ledger << "\n";
  }
  return o.str();
}

namespace {

std::string ResolveFigureColumn(const std::string& figure) {
  static const std::map<std::string, std::string> kAliases = {
      {"accuracy", "test_accuracy"},   {"privacy", "spent_eps_ledger"},
      {"privacy_closed", "spent_eps_closed"}, {"sigma", "noise_sigma"},
      {"consensus", "consensus_gap"}};
  const auto it = kAliases.find(figure);
  return it == kAliases.end() ? figure : it->second;
}

double Cell(const std::string& s) {
  if (s == "nan" || s.empty()) return NAN;
  if (s == "inf") return INFINITY;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw SchemaError("non-numeric cell '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw SchemaError("non-numeric cell '" + s + "'");
  }
}

// Seed-averaged series keyed by label, in first-seen order.
struct Accumulator {
  std::vector<std::string> order;
  std::map<std::string, std::map<double, std::pair<double, int>>> sums;

  void Add(const std::string& label, double x, double y) {
    if (!sums.count(label)) order.push_back(label);
    auto& cell = sums[label][x];
    if (std::isfinite(y)) {
      cell.first += y;
      cell.second += 1;
    }
  }

  std::vector<Series> Build() const {
    std::vector<Series> out;
    for (const auto& label : order) {
      Series s;
      s.label = label;
      for (const auto& [x, acc] : sums.at(label)) {
        s.x.push_back(x);
        s.y.push_back(acc.second ? acc.first / acc.second : NAN);
      }
      out.push_back(std::move(s));
    }
    return out;
  }
};

}  // namespace

std::filesystem::path PlotArtifacts(const std::filesystem::path& artifact_dir,
                                    const std::string& figure,
                                    const std::filesystem::path& output) {
  const std::string column = ResolveFigureColumn(figure);
  Accumulator acc;
  std::string title;
  const auto sweep = artifact_dir / "sweep.csv";
  if (std::filesystem::exists(sweep)) {
    const CsvTable t = ReadCsv(sweep);
    const std::size_t axis = t.Column("axis"), value = t.Column("value");
    const std::size_t round = t.Column("round"), y = t.Column(column);
    for (const auto& row : t.rows) {
      acc.Add(row[axis] + "=" + row[value], Cell(row[round]), Cell(row[y]));
      title = row[axis];
    }
    title = column + " by " + title + " (seed mean)";
  } else {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(artifact_dir)) {
      for (const auto& e : std::filesystem::directory_iterator(artifact_dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("run_seed", 0) == 0 && e.path().extension() == ".csv") {
          files.push_back(e.path());
        }
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw SchemaError("no sweep.csv or run_seed*.csv artifacts in " + artifact_dir.string());
    }
    for (const auto& f : files) {
      const CsvTable t = ReadCsv(f);
      const std::size_t round = t.Column("round"), y = t.Column(column);
      for (const auto& row : t.rows) acc.Add("seed mean", Cell(row[round]), Cell(row[y]));
    }
    title = column + " (seed mean)";
  }
  PlotSpec plot;
  plot.title = title;
  plot.y_label = column;
  plot.series = acc.Build();
  const auto path = output.empty() ? artifact_dir / ("plot_" + figure + ".svg") : output;
  WriteTextFile(path, RenderSvg(plot));
  return path;
}

PrepOutput PrepData(const DataConfig& data, const std::filesystem::path& out_dir) {
  const LoadedData loaded = LoadData(data);
  PrepOutput out;
  out.dim = loaded.train.dim();
  out.train_path = out_dir / "train.libsvm";
  out.test_path = out_dir / "test.libsvm";
  const std::string train = datastore::FormatLibsvm(loaded.train);
  const std::string test = datastore::FormatLibsvm(loaded.test);
  WriteTextFile(out.train_path, train);
  WriteTextFile(out.test_path, test);
  out.train_sha256 = Sha256Hex(train);
  out.test_sha256 = Sha256Hex(test);
  Json manifest;
  manifest["dim"] = out.dim;
  manifest["train"] = {{"file", "train.libsvm"}, {"rows", loaded.train.size()},
                       {"sha256", out.train_sha256}, {"source_sha256", loaded.train_sha256}};
  manifest["test"] = {{"file", "test.libsvm"}, {"rows", loaded.test.size()},
                      {"sha256", out.test_sha256}, {"source_sha256", loaded.test_sha256}};
  WriteTextFile(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return out;
}

namespace {

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct CommonRunArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  std::string seeds;
  unsigned threads = 0;
};

void AddCommon(CLI::App* cmd, CommonRunArgs& a) {
  cmd->add_option("config", a.config_path, "experiment config file")->required();
  cmd->add_option("--set", a.sets, "override a key, e.g. --set optimizer.Q=1 (repeatable)");
  cmd->add_option("--out", a.out, "output directory (default: $FEDSPD_OUTPUT_DIR or ./fedspd-out)");
  cmd->add_option("--seeds", a.seeds, "comma-separated seeds, overrides run.seeds");
  cmd->add_option("--threads", a.threads, "client threads, overrides run.threads");
}

ExperimentConfig BuildConfig(const CommonRunArgs& a) {
  ExperimentConfig config = LoadConfig(a.config_path);
  for (const auto& s : a.sets) ApplyOverride(config, s);
  if (!a.out.empty()) config.output_dir = a.out;
  if (!a.seeds.empty()) SetValue(config, "run.seeds", a.seeds);
  if (a.threads) config.threads = a.threads;
  ValidateConfig(config);
  return config;
}

}  // namespace

int Main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fedspd: federated stochastic primal-dual learning with differential privacy"};
  app.require_subcommand(1);

  CommonRunArgs run_args;
  auto* run = app.add_subcommand("run", "run an experiment for every configured seed");
  AddCommon(run, run_args);

  CommonRunArgs sweep_args;
  std::string axis, values;
  auto* sweep = app.add_subcommand("sweep", "run one experiment set per axis value");
  AddCommon(sweep, sweep_args);
  sweep->add_option("--axis", axis, "total_budget, K, Q, algorithm or per_round_eps")->required();
  sweep->add_option("--values", values, "comma-separated axis values")->required();

  AccountantQuery aq;
  std::optional<double> eps, eps_bar;
  auto* acct = app.add_subcommand("accountant", "print privacy-loss figures for a setting");
  acct->add_option("--Q", aq.local_steps, "local steps")->capture_default_str();
  acct->add_option("--b", aq.batch_size, "mini-batch size")->capture_default_str();
  acct->add_option("--m", aq.shard_size, "local shard size")->capture_default_str();
  acct->add_option("--p", aq.client_prob, "client participation probability")->capture_default_str();
  acct->add_option("--T", aq.rounds, "rounds")->capture_default_str();
  acct->add_option("--eps", eps, "per-round epsilon");
  acct->add_option("--eps-bar", eps_bar, "total budget");
  acct->add_option("--delta", aq.delta, "delta")->capture_default_str();
  acct->add_option("--c0", aq.c0, "closed-form constant")->capture_default_str();
  acct->add_option("--tau-max", aq.tau_max, "largest moment order")->capture_default_str();

  std::string plot_dir, figure = "accuracy", plot_out;
  auto* plot = app.add_subcommand("plot", "render seed-averaged SVG curves from artifacts");
  plot->add_option("artifact_dir", plot_dir, "run or sweep output directory")->required();
  plot->add_option("--figure", figure,
                   "accuracy, alfv, privacy, privacy_closed, sigma, gamma, consensus or a CSV column")
      ->capture_default_str();
  plot->add_option("--output", plot_out, "SVG path (default: <dir>/plot_<figure>.svg)");

  std::string prep_config, prep_out;
  std::vector<std::string> prep_sets;
  auto* prep = app.add_subcommand("prep-data", "write the preprocessed dataset as libsvm + hashes");
  prep->add_option("--config", prep_config, "config whose [data] section to use");
  prep->add_option("--set", prep_sets, "override a data key, e.g. --set data.train_path=...");
  prep->add_option("--out", prep_out, "output directory");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return kExitValidation;
    }

    if (*run) {
      const ExperimentConfig config = BuildConfig(run_args);
      const LoadedData data = LoadData(config.data);
      const auto dir = ResolveOutputDir(config.output_dir);
      RunConfig(config, dir, data, out);
      out << "summary: " << (dir / "summary.json").string() << "\n";
    } else if (*sweep) {
      const ExperimentConfig config = BuildConfig(sweep_args);
      const LoadedData data = LoadData(config.data);
      const auto dir = ResolveOutputDir(config.output_dir);
      const auto result = RunSweep(config, axis, SplitList(values), dir, data, out);
      out << "merged: " << result.merged_csv.string() << "\n";
    } else if (*acct) {
      aq.eps = eps;
      aq.eps_bar = eps_bar;
      out << FormatAccountant(aq, Accountant(aq));
    } else if (*plot) {
      out << PlotArtifacts(plot_dir, figure, plot_out).string() << "\n";
    } else if (*prep) {
      ExperimentConfig config = prep_config.empty() ? ExperimentConfig{} : LoadConfig(prep_config);
      for (const auto& s : prep_sets) ApplyOverride(config, s);
      const auto dir = prep_out.empty() ? ResolveOutputDir(config.output_dir) / "data"
                                        : std::filesystem::path(prep_out);
      const PrepOutput r = PrepData(config.data, dir);
      out << "dim " << r.dim << "\n"
          << r.train_path.string() << "  sha256 " << r.train_sha256 << "\n"
          << r.test_path.string() << "  sha256 " << r.test_sha256 << "\n";
    }
    return kExitOk;
  } catch (const InvalidInput& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataIntegrityError& e) {
    err << "data integrity error: " << e.what() << "\n";
    return kExitDataIntegrity;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitDataIntegrity;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace fedspd::cli
