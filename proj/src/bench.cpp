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

#include "fedspd/bench.hpp"

#include <cmath>
#include <limits>

#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd::bench {

double RegularizedLoss(std::span<const double> x, const Dataset& shard, double lambda_r) {
  return linmodel::LogisticLoss(x, shard) + lambda_r * simd::AbsSum(x);
}

double LagrangianTermValue(const LagrangianTerm& term, std::span<const double> x0,
                           double rho, double lambda_r) {
  if (term.shard == nullptr) throw InvalidInput("Lagrangian term without a shard");
  if (term.x.size() != x0.size() || term.lambda.size() != x0.size()) {
    throw InvalidInput("Lagrangian term dimension mismatch");
  }
  // <lambda, x0 - x> = <lambda, x0> - <lambda, x>
  const double coupling = simd::Dot(term.lambda, x0) - simd::Dot(term.lambda, term.x);
  return RegularizedLoss(term.x, *term.shard, lambda_r) + coupling +
         0.5 * rho * simd::SquaredDistance(term.x, x0);
}

double Alfv(std::span<const LagrangianTerm> terms, std::span<const double> x0,
            double rho, double lambda_r) {
  double total = 0.0;
  for (const auto& term : terms) total += LagrangianTermValue(term, x0, rho, lambda_r);
  return total;
}

double FederatedObjective(std::span<const double> x,
                          std::span<const Dataset* const> shards, double lambda_r) {
  double total = 0.0;
  for (const Dataset* shard : shards) total += RegularizedLoss(x, *shard, lambda_r);
  return total;
}

std::optional<double> HCriterion(std::span<const ModelVector> client_averages,
                                 std::span<const double> server_average,
                                 std::span<const Dataset* const> shards,
                                 const ReferenceSolution* reference, double lambda_r,
                                 double beta) {
  if (reference == nullptr) return std::nullopt;
  if (client_averages.size() != shards.size()) {
    throw InvalidInput("one running average per shard is required");
  }
  double gap = 0.0;
  double consensus = 0.0;
  for (std::size_t i = 0; i < shards.size(); ++i) {
    gap += RegularizedLoss(client_averages[i], *shards[i], lambda_r) -
           RegularizedLoss(reference->x_star, *shards[i], lambda_r);
    consensus += std::sqrt(simd::SquaredDistance(client_averages[i], server_average));
  }
  return gap + beta * consensus;
}

namespace {

// Smooth part sum_s f_s and its gradient.
double SmoothValueAndGrad(std::span<const double> x,
                          std::span<const Dataset* const> shards,
                          std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double value = 0.0;
  ModelVector g;
  for (const Dataset* shard : shards) {
    value += linmodel::LogisticLoss(x, *shard);
    g = linmodel::LogisticGrad(x, *shard);
    simd::Axpy(1.0, g, grad);
  }
  return value;
}

}  // namespace

ReferenceSolution SolveReference(std::span<const Dataset* const> shards,
                                 double lambda_r, double tolerance,
                                 std::size_t max_iterations) {
  if (!(tolerance > 0.0)) throw InvalidInput("solver tolerance must be positive");
  if (shards.empty()) throw InvalidInput("reference solver needs at least one shard");
  const std::size_t dim = shards.front()->dim();
  // The federated objective carries one regularizer per shard.
  const double l1_weight = lambda_r * static_cast<double>(shards.size());

  ModelVector x(dim, 0.0), grad(dim), candidate(dim), diff(dim), cand_grad(dim);
  double eta = 1.0;
  ReferenceSolution best;
  best.solver_tolerance = tolerance;
  best.achieved_residual = std::numeric_limits<double>::infinity();
  SmoothValueAndGrad(x, shards, grad);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    eta = std::min(eta * 2.0, 1e6);
    // Backtrack on a secant Lipschitz estimate. Function values stop
    // resolving the overshoot once the steps reach rounding level.
    while (true) {
      for (std::size_t k = 0; k < dim; ++k) candidate[k] = x[k] - eta * grad[k];
      linmodel::ProxL1InPlace(candidate, eta * l1_weight);
      for (std::size_t k = 0; k < dim; ++k) diff[k] = candidate[k] - x[k];
      SmoothValueAndGrad(candidate, shards, cand_grad);
      const double step = simd::Norm(diff);
      if (eta * std::sqrt(simd::SquaredDistance(cand_grad, grad)) <= step || eta < 1e-12) break;
      eta *= 0.5;
    }
    const double residual = simd::Norm(diff) / eta;
    if (residual < best.achieved_residual) {
      best.achieved_residual = residual;
      best.x_star = x;
      best.iterations = it;
    }
    if (residual <= tolerance) {
      best.converged = true;
      break;
    }
    x.swap(candidate);
    grad.swap(cand_grad);
  }
  best.objective_star = FederatedObjective(best.x_star, shards, lambda_r);
  return best;
}

ReferenceSolution SolveReference(const Dataset& pooled, double lambda_r,
                                 double tolerance, std::size_t max_iterations) {
  const Dataset* shards[] = {&pooled};
  return SolveReference(shards, lambda_r, tolerance, max_iterations);
}

void RunningMean::Add(std::span<const double> v) {
  if (mean_.empty() && count_ == 0) mean_.assign(v.size(), 0.0);
  if (v.size() != mean_.size()) throw InvalidInput("running mean dimension mismatch");
  ++count_;
  const double w = 1.0 / static_cast<double>(count_);
  for (std::size_t k = 0; k < v.size(); ++k) mean_[k] += w * (v[k] - mean_[k]);
}

}  // namespace fedspd::bench
