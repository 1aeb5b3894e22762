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

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "fedspd/cli.hpp"
#include "fedspd/errors.hpp"

namespace fedspd::cli {

namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string Unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

[[noreturn]] void BadValue(const std::string& key, const std::string& value,
                           const std::string& expected) {
  throw InvalidInput(key + ": invalid value '" + value + "' (expected " + expected + ")");
}

double ParseDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    BadValue(key, v, "a real number");
  }
  return out;
}

std::uint64_t ParseUnsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    BadValue(key, v, "a nonnegative integer");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  BadValue(key, v, "true or false");
}

std::optional<double> ParseOptionalDouble(const std::string& key, const std::string& v) {
  if (v.empty() || v == "none") return std::nullopt;
  return ParseDouble(key, v);
}

std::string Bool(bool b) { return b ? "true" : "false"; }

std::string SeedsToString(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::vector<std::uint64_t> ParseSeeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) seeds.push_back(ParseUnsigned(key, Trim(item)));
  return seeds;
}

const char* SourceName(DataSource s) {
  switch (s) {
    case DataSource::kAdult: return "adult";
    case DataSource::kLibsvm: return "libsvm";
    case DataSource::kSynthetic: return "synthetic";
  }
  return "adult";
}

struct Key {
  const char* path;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

#define FEDSPD_DOUBLE(path, field)                                                    \
  Key{path, [](ExperimentConfig& c, const std::string& v) { c.field = ParseDouble(path, v); }, \
      [](const ExperimentConfig& c) -> std::optional<std::string> { return FormatDouble(c.field); }}
#define FEDSPD_SIZE(path, field)                                                       \
  Key{path,                                                                            \
      [](ExperimentConfig& c, const std::string& v) {                                  \
        c.field = static_cast<decltype(c.field)>(ParseUnsigned(path, v));              \
      },                                                                               \
      [](const ExperimentConfig& c) -> std::optional<std::string> {                    \
        return std::to_string(c.field);                                                \
      }}
#define FEDSPD_BOOL(path, field)                                                       \
  Key{path, [](ExperimentConfig& c, const std::string& v) { c.field = ParseBool(path, v); }, \
      [](const ExperimentConfig& c) -> std::optional<std::string> { return Bool(c.field); }}
#define FEDSPD_STRING(path, field)                                                     \
  Key{path, [](ExperimentConfig& c, const std::string& v) { c.field = v; },            \
      [](const ExperimentConfig& c) -> std::optional<std::string> { return c.field; }}

const std::vector<Key>& Keys() {
  static const std::vector<Key> keys = {
      Key{"run.algorithm",
          [](ExperimentConfig& c, const std::string& v) {
            try {
              c.algorithm = engine::ParseAlgorithm(v);
            } catch (const InvalidInput&) {
              BadValue("run.algorithm", v, "fedspd_dp, dp_sgd, dp_fedavg or dp_admm");
            }
          },
          [](const ExperimentConfig& c) -> std::optional<std::string> {
            return engine::ToString(c.algorithm);
          }},
      Key{"run.seeds",
          [](ExperimentConfig& c, const std::string& v) { c.seeds = ParseSeeds("run.seeds", v); },
          [](const ExperimentConfig& c) -> std::optional<std::string> {
            return SeedsToString(c.seeds);
          }},
      FEDSPD_SIZE("run.threads", threads),
      FEDSPD_SIZE("run.metric_stride", metric_stride),
      FEDSPD_BOOL("run.record_wallclock", record_wallclock),
      FEDSPD_STRING("run.output_dir", output_dir),
      FEDSPD_BOOL("run.h_criterion", h_criterion),
      FEDSPD_DOUBLE("run.reference_tolerance", reference_tolerance),

      Key{"data.source",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "adult") c.data.source = DataSource::kAdult;
            else if (v == "libsvm") c.data.source = DataSource::kLibsvm;
            else if (v == "synthetic") c.data.source = DataSource::kSynthetic;
            else BadValue("data.source", v, "adult, libsvm or synthetic");
          },
          [](const ExperimentConfig& c) -> std::optional<std::string> {
            return SourceName(c.data.source);
          }},
      FEDSPD_STRING("data.train_path", data.train_path),
      FEDSPD_STRING("data.test_path", data.test_path),
      FEDSPD_SIZE("data.dim", data.dim),
      FEDSPD_STRING("data.train_sha256", data.train_sha256),
      FEDSPD_STRING("data.test_sha256", data.test_sha256),
      FEDSPD_SIZE("data.synthetic_dim", data.synthetic_dim),
      FEDSPD_SIZE("data.synthetic_samples", data.synthetic_samples),
      FEDSPD_SIZE("data.synthetic_test_samples", data.synthetic_test_samples),
      FEDSPD_DOUBLE("data.synthetic_margin", data.synthetic_margin),
      FEDSPD_DOUBLE("data.synthetic_label_noise", data.synthetic_label_noise),
      FEDSPD_SIZE("data.synthetic_seed", data.synthetic_seed),

      FEDSPD_SIZE("clients.N", num_clients),
      FEDSPD_SIZE("clients.K", hp.clients_per_round),

      FEDSPD_SIZE("optimizer.T", hp.rounds),
      FEDSPD_SIZE("optimizer.Q", hp.local_steps),
      FEDSPD_SIZE("optimizer.b", hp.batch_size),
      FEDSPD_DOUBLE("optimizer.rho", hp.rho),
      FEDSPD_DOUBLE("optimizer.lambda_R", hp.lambda_r),
      FEDSPD_DOUBLE("optimizer.G", hp.clip_bound),
      Key{"optimizer.sampling",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "wor") c.hp.sampling = SamplingMode::kWithoutReplacement;
            else if (v == "wr") c.hp.sampling = SamplingMode::kWithReplacement;
            else BadValue("optimizer.sampling", v, "wor or wr");
          },
          [](const ExperimentConfig& c) -> std::optional<std::string> {
            return c.hp.sampling == SamplingMode::kWithoutReplacement ? "wor" : "wr";
          }},
      FEDSPD_BOOL("optimizer.project_dual", hp.project_dual),

      FEDSPD_DOUBLE("analysis.d_X", hp.d_x),
      FEDSPD_DOUBLE("analysis.d_lambda", hp.d_lambda),
      FEDSPD_DOUBLE("analysis.phi", hp.phi),
      FEDSPD_DOUBLE("analysis.beta", hp.beta),

      Key{"privacy.mode",
          [](ExperimentConfig& c, const std::string& v) {
            if (v == "dp") c.privacy_enabled = true;
            else if (v == "none") c.privacy_enabled = false;
            else BadValue("privacy.mode", v, "dp or none");
          },
          [](const ExperimentConfig& c) -> std::optional<std::string> {
            return c.privacy_enabled ? "dp" : "none";
          }},
      Key{"privacy.total_budget",
          [](ExperimentConfig& c, const std::string& v) {
            c.total_budget = ParseOptionalDouble("privacy.total_budget", v);
            if (c.total_budget) c.per_round_eps.reset();
          },
          [](const ExperimentConfig& c) -> std::optional<std::string> {
            if (!c.total_budget) return std::nullopt;
            return FormatDouble(*c.total_budget);
          }},
      Key{"privacy.per_round_eps",
          [](ExperimentConfig& c, const std::string& v) {
            c.per_round_eps = ParseOptionalDouble("privacy.per_round_eps", v);
            if (c.per_round_eps) c.total_budget.reset();
          },
          [](const ExperimentConfig& c) -> std::optional<std::string> {
            if (!c.per_round_eps) return std::nullopt;
            return FormatDouble(*c.per_round_eps);
          }},
      FEDSPD_DOUBLE("privacy.delta", delta),
      FEDSPD_DOUBLE("privacy.c0", hp.c0),
      Key{"privacy.tau_max",
          [](ExperimentConfig& c, const std::string& v) {
            c.tau_max = static_cast<int>(ParseUnsigned("privacy.tau_max", v));
          },
          [](const ExperimentConfig& c) -> std::optional<std::string> {
            return std::to_string(c.tau_max);
          }},

      FEDSPD_DOUBLE("baselines.fedavg_clip", hp.fedavg_clip),
      FEDSPD_DOUBLE("baselines.dpsgd_clip", hp.dpsgd_clip),
  };
  return keys;
}

#undef FEDSPD_DOUBLE
#undef FEDSPD_SIZE
#undef FEDSPD_BOOL
#undef FEDSPD_STRING

const Key* FindKey(const std::string& path) {
  for (const auto& k : Keys()) {
    if (path == k.path) return &k;
  }
  return nullptr;
}

}  // namespace

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void SetValue(ExperimentConfig& config, const std::string& key_path, const std::string& value) {
  const Key* key = FindKey(key_path);
  if (key == nullptr) throw InvalidInput(key_path + ": unknown configuration key");
  key->set(config, value);
}

void ApplyOverride(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw InvalidInput("override '" + assignment + "' is not of the form section.key=value");
  }
  SetValue(config, Trim(assignment.substr(0, eq)), Unquote(Trim(assignment.substr(eq + 1))));
}

ExperimentConfig ParseConfig(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  int budget_keys = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = Trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = Trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError("empty section name", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    if (section.empty()) throw ParseError("key outside of any [section]", line_no);
    const std::string path = section + "." + Trim(line.substr(0, eq));
    if (!seen.insert(path).second) throw ParseError(path + ": duplicate key", line_no);
    const std::string value = Unquote(Trim(line.substr(eq + 1)));
    if ((path == "privacy.total_budget" || path == "privacy.per_round_eps") && !value.empty() &&
        value != "none") {
      ++budget_keys;
    }
    try {
      SetValue(config, path, value);
    } catch (const InvalidInput& e) {
      throw InvalidInput("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (budget_keys > 1) {
    throw InvalidInput(
        "privacy.total_budget, privacy.per_round_eps: set exactly one of the two");
  }
  return config;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string SerializeConfig(const ExperimentConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& key : Keys()) {
    const std::string path = key.path;
    const auto dot = path.find('.');
    const std::string sec = path.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    const auto value = key.get(config);
    if (value) out << path.substr(dot + 1) << " = " << *value << "\n";
  }
  return out.str();
}

void ValidateConfig(const ExperimentConfig& c) {
  std::vector<std::string> p;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) p.push_back(what);
  };
  const auto& hp = c.hp;
  require(!c.seeds.empty(), "run.seeds: at least one seed is required");
  require(std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() == c.seeds.size(),
          "run.seeds: seeds must be distinct");
  require(c.threads >= 1, "run.threads: must be >= 1");
  require(c.metric_stride >= 1, "run.metric_stride: must be >= 1");
  require(c.reference_tolerance > 0.0, "run.reference_tolerance: must be positive");
  require(c.num_clients >= 1, "clients.N: must be >= 1");
  require(hp.clients_per_round >= 1, "clients.K: must be >= 1");
  require(hp.clients_per_round <= c.num_clients, "clients.K: must not exceed clients.N");
  require(hp.rounds >= 1, "optimizer.T: must be >= 1");
  require(hp.local_steps >= 1, "optimizer.Q: must be >= 1");
  require(hp.batch_size >= 1, "optimizer.b: must be >= 1");
  require(hp.rho > 0.0, "optimizer.rho: must be positive");
  require(hp.lambda_r >= 0.0, "optimizer.lambda_R: must be nonnegative");
  require(hp.clip_bound > 0.0, "optimizer.G: must be positive");
  require(hp.d_x > 0.0, "analysis.d_X: must be positive");
  require(hp.d_lambda > 0.0, "analysis.d_lambda: must be positive");
  require(hp.phi > 0.0, "analysis.phi: must be positive");
  require(hp.beta > 0.0, "analysis.beta: must be positive");
  require(hp.c0 > 0.0, "privacy.c0: must be positive");
  require(hp.fedavg_clip >= 0.0, "baselines.fedavg_clip: must be nonnegative");
  require(hp.dpsgd_clip >= 0.0, "baselines.dpsgd_clip: must be nonnegative");
  if (c.privacy_enabled) {
    require(c.total_budget.has_value() != c.per_round_eps.has_value(),
            "privacy.total_budget, privacy.per_round_eps: set exactly one of the two");
    if (c.total_budget) require(*c.total_budget > 0.0, "privacy.total_budget: must be positive");
    if (c.per_round_eps) require(*c.per_round_eps > 0.0, "privacy.per_round_eps: must be positive");
    require(c.delta > 0.0 && c.delta < 1.0, "privacy.delta: must lie in (0, 1)");
    require(c.tau_max >= 1, "privacy.tau_max: must be >= 1");
  }
  switch (c.data.source) {
    case DataSource::kAdult:
      require(!c.data.train_path.empty(), "data.train_path: required for adult");
      require(!c.data.test_path.empty(), "data.test_path: required for adult");
      break;
    case DataSource::kLibsvm:
      require(!c.data.train_path.empty(), "data.train_path: required for libsvm");
      break;
    case DataSource::kSynthetic:
      require(c.data.synthetic_dim >= 1, "data.synthetic_dim: must be >= 1");
      require(c.data.synthetic_samples >= 1, "data.synthetic_samples: must be >= 1");
      require(c.data.synthetic_margin >= 0.0 && c.data.synthetic_margin < 1.0,
              "data.synthetic_margin: must lie in [0, 1)");
      require(c.data.synthetic_label_noise >= 0.0 && c.data.synthetic_label_noise <= 1.0,
              "data.synthetic_label_noise: must lie in [0, 1]");
      break;
  }
  if (!p.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& line : p) msg += "\n  - " + line;
    throw InvalidInput(msg);
  }
}

engine::ExperimentSpec ToSpec(const ExperimentConfig& c, std::uint64_t seed) {
  engine::ExperimentSpec spec;
  spec.algorithm = c.algorithm;
  spec.hp = c.hp;
  spec.num_clients = c.num_clients;
  spec.seed = seed;
  spec.threads = c.threads;
  spec.metric_stride = c.metric_stride;
  spec.record_wallclock = c.record_wallclock;
  spec.privacy.delta = c.delta;
  spec.privacy.tau_max = c.tau_max;
  if (!c.privacy_enabled) {
    spec.privacy.kind = engine::PrivacySetting::Kind::kNone;
  } else if (c.per_round_eps) {
    spec.privacy.kind = engine::PrivacySetting::Kind::kPerRound;
    spec.privacy.value = *c.per_round_eps;
  } else {
    spec.privacy.kind = engine::PrivacySetting::Kind::kTotalBudget;
    spec.privacy.value = c.total_budget.value_or(0.0);
  }
  return spec;
}

std::string Sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string Sha256File(const std::filesystem::path& path) { return Sha256Hex(ReadTextFile(path)); }

std::string ConfigHash(const ExperimentConfig& config) {
  return Sha256Hex(SerializeConfig(config));
}

std::filesystem::path ResolveOutputDir(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return kDefaultOutputDir;
}

}  // namespace fedspd::cli
