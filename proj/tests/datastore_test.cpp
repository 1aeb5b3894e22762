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
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "fedspd/datastore.hpp"
#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd::datastore {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fedspd_datastore_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const char* kTrain =
    "39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K\n"
    "50, ?, 83311, Bachelors, 13, Married-civ-spouse, Exec-managerial, Husband, White, Male, 0, 0, 13, United-States, >50K\n"
    "38, Private, 215646, HS-grad, 9, Divorced, ?, Not-in-family, White, Female, 0, 0, 40, ?, <=50K\n"
    "28, Private, 338409, Bachelors, 13, Married-civ-spouse, Prof-specialty, Wife, Black, Female, 0, 0, 40, Cuba, >50K\n";
const char* kTest =
    "|1x3 Cross validator\n"
    "25, Private, 226802, 11th, 7, Never-married, Machine-op-inspct, Own-child, Black, Male, 0, 0, 40, United-States, <=50K.\n"
    "60, Self-emp, 100000, Bachelors, 13, Widowed, Sales, Unmarried, Asian, Female, 0, 0, 99, Peru, >50K.\n";

TEST(LoadAdult, EncodesSmallFixture) {
  const fs::path dir = TempDir("adult_small");
  WriteFile(dir / "train", kTrain);
  WriteFile(dir / "test", kTest);
  const AdultData data =
      LoadAdult(dir / "train", dir / "test", AdultOptions{std::nullopt, std::nullopt});
  // 6 continuous + categories seen in training after imputation.
  // workclass {Private, State-gov}, education {Bachelors, HS-grad},
  // marital {Divorced, Married-civ-spouse, Never-married},
  // occupation {Adm-clerical, Exec-managerial, Prof-specialty}, relationship {Husband,
  // Not-in-family, Wife}, race {Black, White}, sex {Female, Male},
  // native-country {Cuba, United-States}
  EXPECT_EQ(data.train.dim(), 6u + 2 + 2 + 3 + 3 + 3 + 2 + 2 + 2);
  ASSERT_EQ(data.train.size(), 4u);
  ASSERT_EQ(data.test.size(), 2u);
  EXPECT_EQ(data.train.label(0), -1);
  EXPECT_EQ(data.train.label(1), 1);
  EXPECT_EQ(data.test.label(1), 1);
  EXPECT_EQ(data.feature_names.size(), data.train.dim());
  EXPECT_EQ(data.feature_names.front(), "age");
  // Continuous columns are min-max scaled on the training split and clipped.
  EXPECT_DOUBLE_EQ(data.train.row(0)[0], (39.0 - 28.0) / 22.0);
  EXPECT_DOUBLE_EQ(data.test.row(1)[0], 1.0);
  EXPECT_DOUBLE_EQ(data.test.row(0)[0], 0.0);
  // Missing workclass on row 1 is imputed with the mode "Private".
  const auto it = std::find(data.feature_names.begin(), data.feature_names.end(),
                            "workclass=Private");
  ASSERT_NE(it, data.feature_names.end());
  const auto col = static_cast<std::size_t>(it - data.feature_names.begin());
  EXPECT_EQ(data.train.row(1)[col], 1.0);
  // Unseen test categories encode as all zeros in their block.
  for (const auto& row_index : {0u, 1u}) {
    for (double v : data.test.row(row_index)) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(LoadAdult, RowCountAndFormatChecks) {
  const fs::path dir = TempDir("adult_bad");
  WriteFile(dir / "train", kTrain);
  WriteFile(dir / "test", kTest);
  EXPECT_THROW(LoadAdult(dir / "train", dir / "test"), DataIntegrityError);
  WriteFile(dir / "short", "39, State-gov, 77516\n");
  EXPECT_THROW(LoadAdult(dir / "short", dir / "test", AdultOptions{std::nullopt, std::nullopt}),
               ParseError);
  EXPECT_THROW(LoadAdult(dir / "missing", dir / "test"), DataIntegrityError);
}

TEST(LoadAdult, RealFilesWhenPresent) {
  const fs::path root = fs::path(FEDSPD_SOURCE_DIR) / "data" / "adult";
  if (!fs::exists(root / "adult.data")) GTEST_SKIP() << "Adult files not present";
  const AdultData data = LoadAdult(root / "adult.data", root / "adult.test");
  EXPECT_EQ(data.train.size(), kAdultTrainRows);
  EXPECT_EQ(data.test.size(), kAdultTestRows);
  EXPECT_EQ(data.train.dim(), 105u);
  std::size_t positives = 0;
  for (int l : data.train.labels()) positives += l > 0;
  EXPECT_EQ(positives, 7841u);
}

TEST(Libsvm, ParseAndFormatRoundTrip) {
  const Dataset d = ParseLibsvm("+1 1:0.5 3:2\n-1 2:1 # comment\n\n", std::nullopt);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 3u);
  EXPECT_EQ(d.row(0)[0], 0.5);
  EXPECT_EQ(d.row(0)[1], 0.0);
  EXPECT_EQ(d.row(1)[1], 1.0);
  EXPECT_EQ(d.label(1), -1);
  const Dataset again = ParseLibsvm(FormatLibsvm(d), 3);
  EXPECT_EQ(again.features().size(), d.features().size());
  EXPECT_TRUE(std::equal(again.features().begin(), again.features().end(),
                         d.features().begin()));
  EXPECT_TRUE(std::equal(again.labels().begin(), again.labels().end(), d.labels().begin()));
}

TEST(Libsvm, ZeroOneLabels) {
  const Dataset d = ParseLibsvm("1 1:1\n0 1:2\n", std::nullopt);
  EXPECT_EQ(d.label(0), 1);
  EXPECT_EQ(d.label(1), -1);
}

TEST(Libsvm, Errors) {
  EXPECT_THROW(ParseLibsvm("2 1:1\n", std::nullopt), ParseError);
  EXPECT_THROW(ParseLibsvm("+1 0:1\n", std::nullopt), ParseError);
  EXPECT_THROW(ParseLibsvm("+1 1-1\n", std::nullopt), ParseError);
  EXPECT_THROW(ParseLibsvm("+1 1:x\n", std::nullopt), ParseError);
  EXPECT_THROW(ParseLibsvm("+1 5:1\n", 3), ParseError);
  EXPECT_THROW(ParseLibsvm("1 1:1\n0 1:1\n-1 1:1\n", std::nullopt), ParseError);
  EXPECT_THROW(LoadLibsvm("/nonexistent/file.libsvm"), DataIntegrityError);
}

TEST(Libsvm, FileRoundTripIsBitExact) {
  RandomStream rng(4, 0);
  const Dataset d = GenerateSynthetic({5, 40, 0.0, 0.1}, rng);
  const fs::path dir = TempDir("libsvm_rt");
  WriteLibsvm(d, dir / "d.libsvm");
  const Dataset back = LoadLibsvm(dir / "d.libsvm", 5);
  EXPECT_TRUE(std::equal(back.features().begin(), back.features().end(),
                         d.features().begin()));
  EXPECT_TRUE(std::equal(back.labels().begin(), back.labels().end(), d.labels().begin()));
}

TEST(Partition, CoversEverySampleOnceWithBalancedSizes) {
  for (std::size_t n : {1u, 7u, 100u, 32561u}) {
    for (std::size_t k : {1u, 3u, 100u}) {
      if (k > n) continue;
      RandomStream rng(1, ~0ULL);
      const Partition p = PartitionUniform(n, k, rng);
      ASSERT_EQ(p.num_shards(), k);
      std::vector<int> seen(n, 0);
      std::size_t lo = n, hi = 0;
      for (const auto& s : p.shards) {
        lo = std::min(lo, s.size());
        hi = std::max(hi, s.size());
        for (auto i : s) ++seen[i];
      }
      EXPECT_LE(hi - lo, 1u);
      EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    }
  }
  RandomStream rng(1, 0);
  EXPECT_THROW(PartitionUniform(3, 4, rng), InvalidInput);
  EXPECT_THROW(PartitionUniform(3, 0, rng), InvalidInput);
}

TEST(Partition, DeterministicPerSeed) {
  RandomStream a(9, ~0ULL), b(9, ~0ULL), c(10, ~0ULL);
  const auto pa = PartitionUniform(500, 10, a);
  EXPECT_EQ(pa.shards, PartitionUniform(500, 10, b).shards);
  EXPECT_NE(pa.shards, PartitionUniform(500, 10, c).shards);
}

TEST(Synthetic, UnitRowsMarginAndSeparability) {
  RandomStream rng(12, 0);
  const Dataset d = GenerateSynthetic({4, 300, 0.2, 0.0}, rng);
  ASSERT_EQ(d.size(), 300u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(simd::Norm(d.row(i)), 1.0, 1e-12);
  // Without label noise a perceptron separates the data.
  std::vector<double> w(4, 0.0);
  for (int epoch = 0; epoch < 200; ++epoch) {
    bool clean = true;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.label(i) * simd::Dot(w, d.row(i)) <= 0) {
        simd::Axpy(d.label(i), d.row(i), w);
        clean = false;
      }
    }
    if (clean) break;
  }
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_GT(d.label(i) * simd::Dot(w, d.row(i)), 0);
}

TEST(Synthetic, LabelNoiseRate) {
  RandomStream clean_rng(3, 0), noisy_rng(3, 0);
  // Noise 0.5 turns labels into a fair coin.
  const Dataset noisy = GenerateSynthetic({3, 20000, 0.0, 0.5}, noisy_rng);
  std::size_t pos = 0;
  for (int l : noisy.labels()) pos += l > 0;
  EXPECT_NEAR(static_cast<double>(pos) / 20000.0, 0.5, 0.02);
  EXPECT_THROW(GenerateSynthetic({3, 10, 1.0, 0.0}, clean_rng), InvalidInput);
  EXPECT_THROW(GenerateSynthetic({0, 10, 0.0, 0.0}, clean_rng), InvalidInput);
  EXPECT_THROW(GenerateSynthetic({3, 10, 0.0, 1.5}, clean_rng), InvalidInput);
}

}  // namespace
}  // namespace fedspd::datastore
