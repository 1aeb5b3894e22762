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

// Evaluation metrics and the centralized reference solver used as a
// convergence oracle.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fedspd/linmodel.hpp"

namespace fedspd::bench {

struct RoundRecord {
  std::size_t round = 0;
  double alfv = 0.0;
  double test_accuracy = 0.0;
  double consensus_gap = 0.0;     // max_i ||x_i - x0||
  double spent_eps_closed = 0.0;  // client mean, closed form at p * round
  double spent_eps_ledger = 0.0;  // client mean, numeric accountant
  double spent_eps_max = 0.0;     // worst client, numeric accountant
  double noise_sigma = 0.0;       // mean over active clients
  double gamma = 0.0;             // mean over active clients
  double wallclock_ms = 0.0;
  std::optional<double> h_criterion;
};

struct ReferenceSolution {
  ModelVector x_star;
  double objective_star = 0.0;
  double solver_tolerance = 0.0;
  double achieved_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// One participant's contribution to the augmented Lagrangian.
struct LagrangianTerm {
  const Dataset* shard = nullptr;
  std::span<const double> x;
  std::span<const double> lambda;
};

// f(x) over the full shard + lambda_R ||x||_1 + <lambda, x0 - x> + rho/2 ||x - x0||^2.
double LagrangianTermValue(const LagrangianTerm& term, std::span<const double> x0,
                           double rho, double lambda_r);

// Sum of the per-client terms, accumulated in index order.
double Alfv(std::span<const LagrangianTerm> terms, std::span<const double> x0,
            double rho, double lambda_r);

// F_i(x) = f_i(x) over the full shard + lambda_R ||x||_1.
double RegularizedLoss(std::span<const double> x, const Dataset& shard, double lambda_r);

// sum_s F_s(x): the federated objective over a list of shards.
double FederatedObjective(std::span<const double> x,
                          std::span<const Dataset* const> shards, double lambda_r);

// sum_i [F_i(xbar_i) - F_i(x*)] + beta sum_i ||xbar_i - xbar_0||.
// Returns nullopt when no reference is available.
std::optional<double> HCriterion(std::span<const ModelVector> client_averages,
                                 std::span<const double> server_average,
                                 std::span<const Dataset* const> shards,
                                 const ReferenceSolution* reference, double lambda_r,
                                 double beta);

// Proximal gradient (ISTA) with backtracking on sum_s F_s until
// ||x - prox(x - eta grad)|| / eta <= tolerance or the iteration cap.
ReferenceSolution SolveReference(std::span<const Dataset* const> shards,
                                 double lambda_r, double tolerance,
                                 std::size_t max_iterations = 200000);
ReferenceSolution SolveReference(const Dataset& pooled, double lambda_r,
                                 double tolerance, std::size_t max_iterations = 200000);

// Incremental mean of a vector sequence.
class RunningMean {
 public:
  RunningMean() = default;
  explicit RunningMean(std::size_t dim) : mean_(dim, 0.0) {}

  void Add(std::span<const double> v);
  const ModelVector& mean() const { return mean_; }
  std::size_t count() const { return count_; }

 private:
  ModelVector mean_;
  std::size_t count_ = 0;
};

}  // namespace fedspd::bench
