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

#include "fedspd/datastore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string_view>

#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd::datastore {
namespace {

struct AdultColumn {
  const char* name;
  bool continuous;
};

constexpr AdultColumn kAdultColumns[] = {
    {"age", true},           {"workclass", false},     {"fnlwgt", true},
    {"education", false},    {"education-num", true},  {"marital-status", false},
    {"occupation", false},   {"relationship", false},  {"race", false},
    {"sex", false},          {"capital-gain", true},   {"capital-loss", true},
    {"hours-per-week", true}, {"native-country", false},
};
constexpr std::size_t kAdultFeatureColumns = std::size(kAdultColumns);
constexpr std::string_view kMissing = "?";

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> SplitCsv(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.emplace_back(Trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool ParseDouble(std::string_view text, double& out) {
  text = Trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

struct RawTable {
  std::vector<std::vector<std::string>> rows;  // feature fields
  std::vector<int> labels;
};

RawTable ReadAdultFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataIntegrityError("cannot open Adult file " + path.string());
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = Trim(line);
    if (trimmed.empty() || trimmed.front() == '|') continue;
    auto fields = SplitCsv(trimmed);
    if (first_content) {
      first_content = false;
      double age;
      if (!fields.empty() && !ParseDouble(fields.front(), age)) continue;  // header
    }
    if (fields.size() != kAdultFeatureColumns + 1) {
      throw ParseError(path.string() + ": expected " +
                           std::to_string(kAdultFeatureColumns + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    std::string label = fields.back();
    if (!label.empty() && label.back() == '.') label.pop_back();
    if (label == ">50K") {
      table.labels.push_back(1);
    } else if (label == "<=50K") {
      table.labels.push_back(-1);
    } else {
      throw ParseError(path.string() + ": unknown label '" + label + "'", line_no);
    }
    fields.pop_back();
    for (std::size_t c = 0; c < kAdultFeatureColumns; ++c) {
      double v;
      if (kAdultColumns[c].continuous && fields[c] != kMissing &&
          !ParseDouble(fields[c], v)) {
        throw ParseError(path.string() + ": non-numeric value '" + fields[c] +
                             "' in column " + kAdultColumns[c].name,
                         line_no);
      }
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

// Most frequent non-missing value; ties resolve to the lexicographically
// smallest so the result does not depend on row order.
std::string ColumnMode(const RawTable& table, std::size_t column) {
  std::map<std::string, std::size_t> counts;
  for (const auto& row : table.rows) {
    if (row[column] != kMissing) ++counts[row[column]];
  }
  if (counts.empty()) {
    throw DataIntegrityError(std::string("column ") + kAdultColumns[column].name +
                             " has no observed values");
  }
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

}  // namespace

AdultData LoadAdult(const std::filesystem::path& train_path,
                    const std::filesystem::path& test_path,
                    const AdultOptions& options) {
  RawTable train = ReadAdultFile(train_path);
  RawTable test = ReadAdultFile(test_path);
  if (options.expected_train_rows && train.rows.size() != *options.expected_train_rows) {
    throw DataIntegrityError("Adult train file has " + std::to_string(train.rows.size()) +
                             " rows, expected " +
                             std::to_string(*options.expected_train_rows));
  }
  if (options.expected_test_rows && test.rows.size() != *options.expected_test_rows) {
    throw DataIntegrityError("Adult test file has " + std::to_string(test.rows.size()) +
                             " rows, expected " +
                             std::to_string(*options.expected_test_rows));
  }
  if (train.rows.empty()) throw DataIntegrityError("Adult train file is empty");

  // Imputation with training modes.
  for (std::size_t c = 0; c < kAdultFeatureColumns; ++c) {
    const std::string mode = ColumnMode(train, c);
    for (RawTable* t : {&train, &test}) {
      for (auto& row : t->rows) {
        if (row[c] == kMissing) row[c] = mode;
      }
    }
  }

  // Feature layout: columns in file order, categorical ones expanded over
  // the sorted training categories.
  struct Block {
    std::size_t offset;
    double min = 0.0, max = 0.0;                // continuous
    std::map<std::string, std::size_t> levels;  // categorical
  };
  std::vector<Block> blocks(kAdultFeatureColumns);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < kAdultFeatureColumns; ++c) {
    Block& block = blocks[c];
    block.offset = names.size();
    if (kAdultColumns[c].continuous) {
      block.min = std::numeric_limits<double>::infinity();
      block.max = -std::numeric_limits<double>::infinity();
      for (const auto& row : train.rows) {
        double v;
        ParseDouble(row[c], v);
        block.min = std::min(block.min, v);
        block.max = std::max(block.max, v);
      }
      names.emplace_back(kAdultColumns[c].name);
    } else {
      for (const auto& row : train.rows) block.levels.emplace(row[c], 0);
      std::size_t k = 0;
      for (auto& [level, index] : block.levels) {
        index = k++;
        names.push_back(std::string(kAdultColumns[c].name) + "=" + level);
      }
    }
  }
  const std::size_t dim = names.size();

  auto encode = [&](const RawTable& table, const std::string& provenance) {
    std::vector<double> features(table.rows.size() * dim, 0.0);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      double* out = features.data() + r * dim;
      for (std::size_t c = 0; c < kAdultFeatureColumns; ++c) {
        const Block& block = blocks[c];
        const std::string& value = table.rows[r][c];
        if (kAdultColumns[c].continuous) {
          double v;
          ParseDouble(value, v);
          const double span = block.max - block.min;
          const double scaled = span > 0.0 ? (v - block.min) / span : 0.0;
          out[block.offset] = std::clamp(scaled, 0.0, 1.0);
        } else if (auto it = block.levels.find(value); it != block.levels.end()) {
          out[block.offset + it->second] = 1.0;
        }
      }
    }
    return Dataset(dim, std::move(features), table.labels, provenance);
  };

  AdultData data;
  data.train = encode(train, "adult:" + train_path.string());
  data.test = encode(test, "adult:" + test_path.string());
  data.feature_names = std::move(names);
  return data;
}

Dataset ParseLibsvm(const std::string& text, std::optional<std::size_t> dim) {
  struct Row {
    double label;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::size_t max_index = 0;
  bool saw_zero_label = false;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = Trim(view);
    if (view.empty()) continue;
    Row row;
    std::size_t pos = 0;
    bool first = true;
    while (pos < view.size()) {
      const auto end = std::min(view.find_first_of(" \t", pos), view.size());
      const std::string_view token = view.substr(pos, end - pos);
      pos = view.find_first_not_of(" \t", end);
      if (pos == std::string_view::npos) pos = view.size();
      if (first) {
        first = false;
        if (!ParseDouble(token, row.label) ||
            (row.label != 1.0 && row.label != -1.0 && row.label != 0.0)) {
          throw ParseError("bad label '" + std::string(token) + "'", line_no);
        }
        if (row.label == 0.0) saw_zero_label = true;
        continue;
      }
      const auto colon = token.find(':');
      std::size_t index = 0;
      double value = 0.0;
      if (colon == std::string_view::npos) {
        throw ParseError("expected idx:val, got '" + std::string(token) + "'", line_no);
      }
      const auto idx_text = token.substr(0, colon);
      const auto [ptr, ec] =
          std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), index);
      if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || index == 0) {
        throw ParseError("bad feature index '" + std::string(idx_text) + "'", line_no);
      }
      if (!ParseDouble(token.substr(colon + 1), value)) {
        throw ParseError("bad feature value in '" + std::string(token) + "'", line_no);
      }
      if (dim && index > *dim) {
        throw ParseError("feature index " + std::to_string(index) +
                             " exceeds declared dimension " + std::to_string(*dim),
                         line_no);
      }
      max_index = std::max(max_index, index);
      row.entries.emplace_back(index - 1, value);
    }
    rows.push_back(std::move(row));
  }
  const std::size_t d = dim.value_or(max_index);
  std::vector<double> features(rows.size() * d, 0.0);
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [index, value] : rows[r].entries) features[r * d + index] = value;
    const double l = rows[r].label;
    if (saw_zero_label && l == -1.0) {
      throw ParseError("mixed {0,1} and {-1,+1} labels", 0);
    }
    labels.push_back(l > 0.0 ? 1 : -1);
  }
  return Dataset(d, std::move(features), std::move(labels));
}

Dataset LoadLibsvm(const std::filesystem::path& path, std::optional<std::size_t> dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataIntegrityError("cannot open libsvm file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  Dataset data = ParseLibsvm(buffer.str(), dim);
  data.set_provenance("libsvm:" + path.string());
  return data;
}

std::string FormatLibsvm(const Dataset& data) {
  std::string out;
  char buf[64];
  for (std::size_t r = 0; r < data.size(); ++r) {
    out += data.label(r) > 0 ? "+1" : "-1";
    const auto row = data.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] == 0.0) continue;
      std::snprintf(buf, sizeof(buf), " %zu:%.17g", k + 1, row[k]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void WriteLibsvm(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataIntegrityError("cannot write " + path.string());
  out << FormatLibsvm(data);
}

Partition PartitionUniform(std::size_t num_samples, std::size_t num_clients,
                           RandomStream& rng) {
  if (num_clients == 0) throw InvalidInput("number of clients must be positive");
  if (num_clients > num_samples) {
    throw InvalidInput("cannot split " + std::to_string(num_samples) + " samples among " +
                       std::to_string(num_clients) + " clients");
  }
  const auto order = sampling::Permutation(num_samples, rng);
  const std::size_t base = num_samples / num_clients;
  const std::size_t extra = num_samples % num_clients;
  Partition part;
  part.shards.resize(num_clients);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < num_clients; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    part.shards[i].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                          order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }
  return part;
}

Dataset GenerateSynthetic(const SyntheticSpec& spec, RandomStream& rng) {
  if (spec.dim == 0 || spec.samples == 0) throw InvalidInput("synthetic d and m must be >= 1");
  if (spec.margin < 0.0 || spec.margin >= 1.0) {
    throw InvalidInput("synthetic margin must lie in [0, 1)");
  }
  if (spec.label_noise < 0.0 || spec.label_noise > 1.0) {
    throw InvalidInput("label noise must lie in [0, 1]");
  }
  auto unit_vector = [&](std::vector<double>& v) {
    double norm = 0.0;
    do {
      for (double& x : v) x = rng.Normal();
      norm = simd::Norm(v);
    } while (norm == 0.0);
    simd::Scale(1.0 / norm, v);
  };
  std::vector<double> truth(spec.dim);
  unit_vector(truth);

  Dataset out(spec.dim);
  std::vector<double> a(spec.dim);
  const std::size_t max_attempts = 10000 * spec.samples;
  std::size_t attempts = 0;
  while (out.size() < spec.samples) {
    if (++attempts > max_attempts) {
      throw InvalidInput("synthetic margin too large to fill the dataset");
    }
    unit_vector(a);
    const double score = simd::Dot(truth, a);
    if (std::fabs(score) < spec.margin) continue;
    int label = score >= 0.0 ? 1 : -1;
    if (spec.label_noise > 0.0 && rng.Uniform() < spec.label_noise) label = -label;
    out.Add(a, label);
  }
  out.set_provenance("synthetic:d=" + std::to_string(spec.dim) +
                     ",m=" + std::to_string(spec.samples));
  return out;
}

}  // namespace fedspd::datastore
