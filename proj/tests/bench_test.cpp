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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fedspd/bench.hpp"
#include "fedspd/datastore.hpp"
#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd::bench {
namespace {

Dataset OneSample(std::vector<double> a, int label) {
  Dataset d(a.size());
  d.Add(a, label);
  return d;
}

TEST(Lagrangian, HandComputedTerm) {
  // f(x) = ln(1 + exp(-<a,x>)), a = (1, 0), label +1, x = (0, 0)
  const Dataset shard = OneSample({1.0, 0.0}, 1);
  const std::vector<double> x = {0.0, 0.0}, lam = {1.0, -2.0}, x0 = {0.5, 0.5};
  const LagrangianTerm term{&shard, x, lam};
  // ln2 + 0 + <lam, x0 - x> + rho/2 * ||x - x0||^2 = ln2 + (0.5 - 1) + 10 * 0.5
  EXPECT_NEAR(LagrangianTermValue(term, x0, 20.0, 0.01), std::log(2.0) - 0.5 + 5.0, 1e-15);
  const LagrangianTerm terms[] = {term, term};
  EXPECT_NEAR(Alfv(terms, x0, 20.0, 0.01), 2 * (std::log(2.0) + 4.5), 1e-14);
  EXPECT_THROW(LagrangianTermValue(LagrangianTerm{nullptr, x, lam}, x0, 1.0, 0.0),
               InvalidInput);
  const std::vector<double> short_x0 = {0.0};
  EXPECT_THROW(LagrangianTermValue(term, short_x0, 1.0, 0.0), InvalidInput);
}

TEST(Lagrangian, ReducesToObjectiveAtConsensus) {
  RandomStream rng(2, 0);
  const Dataset a = datastore::GenerateSynthetic({3, 20, 0.0, 0.1}, rng);
  const Dataset b = datastore::GenerateSynthetic({3, 30, 0.0, 0.1}, rng);
  const std::vector<double> x = {0.3, -0.1, 0.7}, lam = {5.0, 1.0, -4.0};
  const LagrangianTerm terms[] = {{&a, x, lam}, {&b, x, lam}};
  const Dataset* shards[] = {&a, &b};
  EXPECT_NEAR(Alfv(terms, x, 20.0, 0.05), FederatedObjective(x, shards, 0.05), 1e-13);
  EXPECT_NEAR(RegularizedLoss(x, a, 0.05),
              linmodel::LogisticLoss(x, a) + 0.05 * (0.3 + 0.1 + 0.7), 1e-15);
}

TEST(HCriterion, AbsentWithoutReference) {
  const Dataset shard = OneSample({1.0}, 1);
  const Dataset* shards[] = {&shard};
  const std::vector<ModelVector> avgs = {{0.0}};
  const std::vector<double> x0 = {0.0};
  EXPECT_FALSE(HCriterion(avgs, x0, shards, nullptr, 0.0, 1.0).has_value());
}

TEST(HCriterion, GapPlusWeightedConsensus) {
  const Dataset shard = OneSample({1.0}, 1);
  const Dataset* shards[] = {&shard, &shard};
  ReferenceSolution ref;
  ref.x_star = {0.0};
  const std::vector<ModelVector> avgs = {{1.0}, {-1.0}};
  const std::vector<double> x0 = {0.5};
  const double gap = std::log1p(std::exp(-1.0)) + std::log1p(std::exp(1.0)) - 2 * std::log(2.0);
  const auto h = HCriterion(avgs, x0, shards, &ref, 0.0, 2.0);
  ASSERT_TRUE(h.has_value());
  EXPECT_NEAR(*h, gap + 2.0 * (0.5 + 1.5), 1e-14);
  EXPECT_THROW(HCriterion(std::span(avgs).first(1), x0, shards, &ref, 0.0, 2.0), InvalidInput);
}

TEST(SolveReference, OneDimensionalGridOracle) {
  // Mixed labels keep the minimiser finite.
  Dataset d(1);
  d.Add(std::vector<double>{1.0}, 1);
  d.Add(std::vector<double>{2.0}, 1);
  d.Add(std::vector<double>{1.5}, -1);
  const double lr = 0.05;
  const auto ref = SolveReference(d, lr, 1e-10);
  ASSERT_TRUE(ref.converged);
  double best = INFINITY, arg = 0;
  for (int i = -40000; i <= 40000; ++i) {
    const double x = i * 1e-4;
    const double f = RegularizedLoss(std::vector<double>{x}, d, lr);
    if (f < best) best = f, arg = x;
  }
  EXPECT_NEAR(ref.x_star[0], arg, 2e-4);
  EXPECT_NEAR(ref.objective_star, best, 1e-8);
}

TEST(SolveReference, OptimalityConditionsAcrossShards) {
  RandomStream rng(8, 0);
  const Dataset a = datastore::GenerateSynthetic({6, 80, 0.0, 0.2}, rng);
  const Dataset b = datastore::GenerateSynthetic({6, 80, 0.0, 0.2}, rng);
  const Dataset* shards[] = {&a, &b};
  const double lr = 0.02;
  const auto ref = SolveReference(shards, lr, 1e-9);
  ASSERT_TRUE(ref.converged);
  ModelVector g = linmodel::LogisticGrad(ref.x_star, a);
  simd::Axpy(1.0, linmodel::LogisticGrad(ref.x_star, b), g);
  // Subgradient condition for sum_i f_i + 2 * lr * ||x||_1.
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (ref.x_star[k] != 0.0) {
      EXPECT_NEAR(g[k], -2 * lr * std::copysign(1.0, ref.x_star[k]), 1e-7);
    } else {
      EXPECT_LE(std::fabs(g[k]), 2 * lr + 1e-7);
    }
  }
  // No random perturbation improves the objective.
  const double fstar = FederatedObjective(ref.x_star, shards, lr);
  for (int trial = 0; trial < 50; ++trial) {
    ModelVector y = ref.x_star;
    for (auto& v : y) v += 1e-3 * rng.Normal();
    EXPECT_GE(FederatedObjective(y, shards, lr), fstar - 1e-12);
  }
  EXPECT_THROW(SolveReference(shards, lr, 0.0), InvalidInput);
}

TEST(RunningMean, MatchesArithmeticMean) {
  RunningMean m;
  m.Add(std::vector<double>{1.0, 2.0});
  m.Add(std::vector<double>{3.0, -2.0});
  m.Add(std::vector<double>{5.0, 3.0});
  EXPECT_EQ(m.count(), 3u);
  EXPECT_DOUBLE_EQ(m.mean()[0], 3.0);
  EXPECT_DOUBLE_EQ(m.mean()[1], 1.0);
  EXPECT_THROW(m.Add(std::vector<double>{1.0}), InvalidInput);
}

}  // namespace
}  // namespace fedspd::bench
