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

#include <fstream>
#include <sstream>

#include "fedspd/cli.hpp"
#include "fedspd/datastore.hpp"
#include "fedspd/errors.hpp"

namespace fedspd::cli {

std::string FormatRoundCsv(const std::vector<bench::RoundRecord>& records) {
  std::ostringstream out;
  for (std::size_t c = 0; c < std::size(kCsvColumns); ++c) {
    out << (c ? "," : "") << kCsvColumns[c];
  }
  out << "\n";
  for (const auto& r : records) {
    out << r.round << ',' << FormatDouble(r.alfv) << ',' << FormatDouble(r.test_accuracy) << ','
        << FormatDouble(r.consensus_gap) << ',' << FormatDouble(r.spent_eps_closed) << ','
        << FormatDouble(r.spent_eps_ledger) << ',' << FormatDouble(r.noise_sigma) << ','
        << FormatDouble(r.gamma) << ',' << FormatDouble(r.wallclock_ms) << "\n";
  }
  return out.str();
}

std::size_t CsvTable::Column(const std::string& column) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == column) return i;
  }
  throw SchemaError("missing column '" + column + "'");
}

CsvTable ParseCsv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      table.header = split(line);
      first = false;
      continue;
    }
    auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw SchemaError("row " + std::to_string(table.rows.size() + 1) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw SchemaError("CSV has no header row");
  return table;
}

CsvTable ReadCsv(const std::filesystem::path& path) { return ParseCsv(ReadTextFile(path)); }

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataIntegrityError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void CheckPin(const std::string& path, const std::string& pin, const std::string& actual,
              const char* key) {
  if (!pin.empty() && pin != actual) {
    throw DataIntegrityError(std::string(key) + ": " + path + " has SHA-256 " + actual +
                             ", expected " + pin);
  }
}

std::string HashIfExists(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataIntegrityError("missing data file " + path);
  return Sha256File(path);
}

}  // namespace

LoadedData LoadData(const DataConfig& data) {
  LoadedData out;
  try {
    switch (data.source) {
      case DataSource::kAdult: {
        out.train_sha256 = HashIfExists(data.train_path);
        out.test_sha256 = HashIfExists(data.test_path);
        CheckPin(data.train_path, data.train_sha256, out.train_sha256, "data.train_sha256");
        CheckPin(data.test_path, data.test_sha256, out.test_sha256, "data.test_sha256");
        auto adult = datastore::LoadAdult(data.train_path, data.test_path);
        out.train = std::move(adult.train);
        out.test = std::move(adult.test);
        break;
      }
      case DataSource::kLibsvm: {
        out.train_sha256 = HashIfExists(data.train_path);
        CheckPin(data.train_path, data.train_sha256, out.train_sha256, "data.train_sha256");
        const std::optional<std::size_t> dim =
            data.dim ? std::optional<std::size_t>(data.dim) : std::nullopt;
        out.train = datastore::LoadLibsvm(data.train_path, dim);
        if (!data.test_path.empty()) {
          out.test_sha256 = HashIfExists(data.test_path);
          CheckPin(data.test_path, data.test_sha256, out.test_sha256, "data.test_sha256");
          out.test = datastore::LoadLibsvm(data.test_path, out.train.dim());
        }
        break;
      }
      case DataSource::kSynthetic: {
        RandomStream rng(data.synthetic_seed, 0);
        datastore::SyntheticSpec spec;
        spec.dim = data.synthetic_dim;
        spec.samples = data.synthetic_samples + data.synthetic_test_samples;
        spec.margin = data.synthetic_margin;
        spec.label_noise = data.synthetic_label_noise;
        const Dataset all = datastore::GenerateSynthetic(spec, rng);
        std::vector<std::size_t> train_idx(data.synthetic_samples), test_idx;
        for (std::size_t i = 0; i < train_idx.size(); ++i) train_idx[i] = i;
        for (std::size_t i = data.synthetic_samples; i < all.size(); ++i) test_idx.push_back(i);
        out.train = all.Subset(train_idx);
        out.test = all.Subset(test_idx);
        out.train_sha256 = Sha256Hex(datastore::FormatLibsvm(out.train));
        out.test_sha256 = Sha256Hex(datastore::FormatLibsvm(out.test));
        break;
      }
    }
  } catch (const ParseError& e) {
    throw DataIntegrityError(e.what());
  }
  if (out.train.empty()) throw DataIntegrityError("training set is empty");
  return out;
}

}  // namespace fedspd::cli
