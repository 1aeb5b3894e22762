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

// Dataset ingestion, preprocessing, client partitioning and synthetic data.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedspd/linmodel.hpp"
#include "fedspd/sampling.hpp"

namespace fedspd::datastore {

inline constexpr std::size_t kAdultTrainRows = 32561;
inline constexpr std::size_t kAdultTestRows = 16281;

struct AdultOptions {
  // Row counts the loader insists on; nullopt skips the check.
  std::optional<std::size_t> expected_train_rows = kAdultTrainRows;
  std::optional<std::size_t> expected_test_rows = kAdultTestRows;
};

struct AdultData {
  Dataset train;
  Dataset test;
  std::vector<std::string> feature_names;
};

// Reads the UCI Adult train/test files (comma separated, optional header
// row, "?" marks a missing value). Missing values are imputed with the
// training mode of their column, categorical columns are one-hot encoded
// over the training categories, continuous columns are min-max scaled with
// training statistics, and ">50K" maps to +1, "<=50K" to -1.
AdultData LoadAdult(const std::filesystem::path& train_path,
                    const std::filesystem::path& test_path,
                    const AdultOptions& options = {});

// Sparse "label idx:val ..." lines with 1-based indices. When `dim` is
// unset the dimension is the largest index seen. {0,1} labels are mapped to
// {-1,+1}. Blank lines and '#' comments are skipped.
Dataset LoadLibsvm(const std::filesystem::path& path,
                   std::optional<std::size_t> dim = std::nullopt);
Dataset ParseLibsvm(const std::string& text,
                    std::optional<std::size_t> dim = std::nullopt);

// Writes nonzero entries with 17 significant digits; lossless on re-read.
void WriteLibsvm(const Dataset& data, const std::filesystem::path& path);
std::string FormatLibsvm(const Dataset& data);

struct Partition {
  std::vector<std::vector<std::size_t>> shards;

  std::size_t num_shards() const { return shards.size(); }
};

// Random permutation split into `num_clients` shards of size floor(m/N) or
// ceil(m/N); the larger shards come first.
Partition PartitionUniform(std::size_t num_samples, std::size_t num_clients,
                           RandomStream& rng);

struct SyntheticSpec {
  std::size_t dim = 2;
  std::size_t samples = 100;
  double margin = 0.0;       // rejects |<w*, a>| < margin
  double label_noise = 0.0;  // independent flip probability
};

// Features uniform on the unit sphere, labels sign(<w*, a>) for a random
// unit w*, then flipped with probability label_noise.
Dataset GenerateSynthetic(const SyntheticSpec& spec, RandomStream& rng);

}  // namespace fedspd::datastore
