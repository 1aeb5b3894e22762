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
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fedspd/bench.hpp"
#include "fedspd/datastore.hpp"
#include "fedspd/engine.hpp"
#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd::engine {
namespace {

void ExpectRel(double got, double want, double rel = 1e-12) {
  EXPECT_NEAR(got, want, rel * std::fabs(want)) << "got " << got << " want " << want;
}

Dataset Synthetic(std::size_t dim, std::size_t samples, std::uint64_t seed,
                  double noise = 0.1) {
  RandomStream rng(seed, 0);
  return datastore::GenerateSynthetic({dim, samples, 0.0, noise}, rng);
}

ExperimentSpec SmallSpec() {
  ExperimentSpec spec;
  spec.num_clients = 6;
  spec.hp.clients_per_round = 3;
  spec.hp.local_steps = 3;
  spec.hp.batch_size = 4;
  spec.hp.rounds = 8;
  spec.privacy.kind = PrivacySetting::Kind::kTotalBudget;
  spec.privacy.value = 1.0;
  spec.seed = 17;
  return spec;
}

TEST(Algorithm, NamesRoundTrip) {
  for (Algorithm a : {Algorithm::kFedSpdDp, Algorithm::kDpSgd, Algorithm::kDpFedAvg,
                      Algorithm::kDpAdmm}) {
    EXPECT_EQ(ParseAlgorithm(ToString(a)), a);
  }
  EXPECT_THROW(ParseAlgorithm("fedprox"), InvalidInput);
}

TEST(GammaSchedule, FrozenValues) {
  const GammaConstants ones;
  // 40-digit reference values.
  ExpectRel(GammaSchedule(1, 5, 0.2, 10, 0.1, 1e-4, 20.0, 162, ones), 3496.5422869721379);
  ExpectRel(GammaSchedule(4, 1, 1.0, 10, 0.1, 1e-4, 20.0, 162, ones), 27972.324567926033);
  // Without privacy only the optimisation constants remain.
  ExpectRel(GammaSchedule(9, 5, 0.2, 10, INFINITY, 1e-4, 20.0, 162, ones),
            2.0 * std::sqrt(5 * 0.2 * 3.2) * 3.0);
}

TEST(GammaSchedule, GrowsAsSqrtT) {
  const GammaConstants c{1.5, 2.0, 0.5, 1.0};
  const double g1 = GammaSchedule(1, 5, 0.2, 10, 0.3, 1e-5, 20.0, 30, c);
  for (std::size_t t : {2u, 9u, 100u}) {
    ExpectRel(GammaSchedule(t, 5, 0.2, 10, 0.3, 1e-5, 20.0, 30, c), g1 * std::sqrt(t * 1.0));
  }
  EXPECT_THROW(GammaSchedule(1, 0, 0.2, 10, 0.3, 1e-5, 20.0, 30, c), InvalidInput);
  EXPECT_THROW(GammaSchedule(1, 5, 0.0, 10, 0.3, 1e-5, 20.0, 30, c), InvalidInput);
  EXPECT_THROW(GammaSchedule(1, 5, 0.2, 10, 0.0, 1e-5, 20.0, 30, c), InvalidInput);
}

TEST(LocalSgdStep, WorkedExample) {
  const std::vector<double> xp = {2, 0}, x0 = {0, 2}, lam = {0, 0}, g = {1, 1};
  EXPECT_EQ(LocalSgdStep(xp, x0, lam, g, 1.0, 1.0, 0.0), (std::vector<double>{0.5, 0.5}));
  // Threshold lambda_R / (gamma + rho) = 0.25.
  EXPECT_EQ(LocalSgdStep(xp, x0, lam, g, 1.0, 1.0, 0.5), (std::vector<double>{0.25, 0.25}));
  const std::vector<double> shorter = {1};
  EXPECT_THROW(LocalSgdStep(shorter, x0, lam, g, 1.0, 1.0, 0.0), InvalidInput);
  EXPECT_THROW(LocalSgdStep(xp, x0, lam, g, 0.0, 1.0, 0.0), InvalidInput);
}

TEST(LocalSgdStep, MinimisesTheLocalModel) {
  // argmin <g - lam, x> + lR |x| + rho/2 (x - x0)^2 + gamma/2 (x - xp)^2, per coordinate.
  const std::vector<double> xp = {0.4, -1.2, 0.05}, x0 = {-0.3, 0.8, 0.0};
  const std::vector<double> lam = {1.5, -0.7, 0.2}, g = {0.6, 0.1, -0.3};
  const double gamma = 3.5, rho = 2.0, lr = 0.9;
  const auto x = LocalSgdStep(xp, x0, lam, g, gamma, rho, lr);
  for (std::size_t k = 0; k < 3; ++k) {
    double best = INFINITY, arg = 0;
    for (int i = -30000; i <= 30000; ++i) {
      const double z = i * 1e-4;
      const double f = (g[k] - lam[k]) * z + lr * std::fabs(z) +
                       0.5 * rho * (z - x0[k]) * (z - x0[k]) +
                       0.5 * gamma * (z - xp[k]) * (z - xp[k]);
      if (f < best) best = f, arg = z;
    }
    EXPECT_NEAR(x[k], arg, 1e-4) << "coordinate " << k;
  }
}

TEST(LocalPrimalUpdate, AveragesInnerIteratesAndKeepsLast) {
  const Dataset shard = Synthetic(4, 12, 3);
  const std::vector<double> start = {0.1, 0.2, -0.1, 0.0}, x0 = {0, 0, 0, 0};
  const std::vector<double> lam = {0.5, -0.5, 0.25, 0.0};
  const BatchProvider batches = [](std::size_t r) {
    return std::vector<std::size_t>{r, r + 1, r + 2};
  };
  const auto res =
      LocalPrimalUpdate(start, x0, lam, shard, batches, 4, 2.0, 20.0, 0.01, 1.0, true);
  ASSERT_EQ(res.inner.size(), 4u);
  EXPECT_EQ(res.last_inner, res.inner.back());
  for (std::size_t k = 0; k < 4; ++k) {
    double mean = 0;
    for (const auto& v : res.inner) mean += v[k];
    EXPECT_NEAR(res.average[k], mean / 4, 1e-15);
  }
  // First iterate recomputed by hand.
  const std::vector<std::size_t> idx = {0, 1, 2};
  auto g = linmodel::LogisticGrad(start, MiniBatch{&shard, idx});
  g = linmodel::ClipToNorm(g, 1.0);
  EXPECT_EQ(res.inner[0], LocalSgdStep(start, x0, lam, g, 2.0, 20.0, 0.01));
  EXPECT_THROW(
      LocalPrimalUpdate(start, x0, lam, shard, batches, 0, 2.0, 20.0, 0.01, 1.0),
      InvalidInput);
}

TEST(ClientLocalRound, DualAndUploadIdentities) {
  const ExperimentSpec spec = SmallSpec();
  Federation fed = BuildFederation(spec, Synthetic(5, 120, 2));
  RoundContext ctx{1, &spec.hp, &spec.privacy, 0.5, 1};
  ClientState& c = fed.clients[2];
  const ModelVector lambda_before = c.lambda;
  const std::vector<double> x0 = {0.1, -0.2, 0.0, 0.3, 0.05};
  ClientLocalRound(c, x0, ctx);
  const double rho = spec.hp.rho;
  for (std::size_t k = 0; k < x0.size(); ++k) {
    EXPECT_NEAR(c.lambda[k], lambda_before[k] - rho * (c.x[k] - x0[k]), 1e-12);
    EXPECT_NEAR(c.y_tilde[k] - (c.x[k] - c.lambda[k] / rho), c.last_noise[k], 1e-12);
  }
  const double gamma = ClientGamma(c, ctx);
  EXPECT_EQ(c.last_gamma, gamma);
  EXPECT_DOUBLE_EQ(c.last_sigma, privacy::NoiseScale(spec.hp.local_steps, spec.hp.clip_bound,
                                                     rho + gamma, c.eps_round, 1e-4));
  EXPECT_EQ(c.ledger.participation_count(), 1u);
}

TEST(ClientLocalRound, NoPrivacyMeansNoNoise) {
  ExperimentSpec spec = SmallSpec();
  spec.privacy.kind = PrivacySetting::Kind::kNone;
  Federation fed = BuildFederation(spec, Synthetic(5, 120, 2));
  RoundContext ctx{1, &spec.hp, &spec.privacy, 0.5, 1};
  ClientLocalRound(fed.clients[0], fed.server.x0, ctx);
  for (double v : fed.clients[0].last_noise) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(fed.clients[0].last_sigma, 0.0);
}

TEST(ClientLocalRound, DualProjection) {
  ExperimentSpec spec = SmallSpec();
  spec.hp.project_dual = true;
  spec.hp.beta = 0.01;
  Federation fed = BuildFederation(spec, Synthetic(5, 120, 2));
  RoundContext ctx{1, &spec.hp, &spec.privacy, 0.5, 1};
  const std::vector<double> far = {5, 5, 5, 5, 5};
  ClientLocalRound(fed.clients[0], far, ctx);
  EXPECT_LE(simd::Norm(fed.clients[0].lambda), 0.01 * (1 + 1e-12));
}

TEST(RunRound, StaleUploadsAreKeptAndAggregated) {
  const ExperimentSpec spec = SmallSpec();
  Federation fed = BuildFederation(spec, Synthetic(5, 120, 2));
  for (double v : fed.server.x0) EXPECT_EQ(v, 0.0);
  RoundContext ctx{1, &spec.hp, &spec.privacy, 0.5, 1};
  const auto before = fed.server.registry;
  const auto stats = RunRound(fed.server, fed.clients, ctx);
  ASSERT_EQ(stats.active.size(), 3u);
  for (std::size_t i = 0; i < fed.clients.size(); ++i) {
    const bool active =
        std::find(stats.active.begin(), stats.active.end(), i) != stats.active.end();
    if (active) {
      EXPECT_EQ(fed.server.registry[i], fed.clients[i].y_tilde);
    } else {
      EXPECT_EQ(fed.server.registry[i], before[i]);
      EXPECT_EQ(fed.clients[i].ledger.participation_count(), 0u);
    }
  }
  const auto mean = ServerAggregate(fed.server);
  EXPECT_EQ(fed.server.x0, mean);
  EXPECT_EQ(fed.server.round, 1u);
}

TEST(ParallelFor, RunsEveryItemAndPropagatesErrors) {
  std::vector<std::size_t> items(100);
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
  std::vector<int> hits(100, 0);
  ParallelFor(items, 8, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(ParallelFor(items, 4,
                           [](std::size_t i) {
                             if (i == 37) throw std::runtime_error("boom");
                           }),
               std::runtime_error);
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
  for (Algorithm a : {Algorithm::kFedSpdDp, Algorithm::kDpSgd, Algorithm::kDpFedAvg,
                      Algorithm::kDpAdmm}) {
    ExperimentSpec spec = SmallSpec();
    spec.algorithm = a;
    const Dataset train = Synthetic(5, 240, 6);
    const Dataset test = Synthetic(5, 60, 7);
    const ExperimentData data{&train, &test, nullptr};
    const RunResult one = RunExperiment(spec, data);
    spec.threads = 4;
    const RunResult four = RunExperiment(spec, data);
    ASSERT_EQ(one.records.size(), four.records.size());
    EXPECT_EQ(one.final_model, four.final_model) << ToString(a);
    for (std::size_t t = 0; t < one.records.size(); ++t) {
      EXPECT_EQ(one.records[t].alfv, four.records[t].alfv);
      EXPECT_EQ(one.records[t].spent_eps_ledger, four.records[t].spent_eps_ledger);
    }
  }
}

TEST(RunExperiment, SeedControlsEverything) {
  ExperimentSpec spec = SmallSpec();
  const Dataset train = Synthetic(5, 240, 6);
  const ExperimentData data{&train, nullptr, nullptr};
  const auto a = RunExperiment(spec, data);
  const auto b = RunExperiment(spec, data);
  EXPECT_EQ(a.final_model, b.final_model);
  spec.seed = 18;
  EXPECT_NE(a.final_model, RunExperiment(spec, data).final_model);
}

TEST(RunExperiment, RecordsAndPrivacyAccounting) {
  ExperimentSpec spec = SmallSpec();
  spec.metric_stride = 3;
  const Dataset train = Synthetic(5, 240, 6);
  const Dataset test = Synthetic(5, 60, 7);
  const auto r = RunExperiment(spec, ExperimentData{&train, &test, nullptr});
  ASSERT_EQ(r.records.size(), spec.hp.rounds + 1);
  EXPECT_EQ(r.records[0].spent_eps_ledger, 0.0);
  EXPECT_FALSE(std::isnan(r.records[0].alfv));
  EXPECT_TRUE(std::isnan(r.records[1].alfv));
  EXPECT_FALSE(std::isnan(r.records[3].alfv));
  EXPECT_FALSE(std::isnan(r.records.back().alfv));
  for (std::size_t t = 1; t < r.records.size(); ++t) {
    EXPECT_GE(r.records[t].spent_eps_ledger, r.records[t - 1].spent_eps_ledger);
    EXPECT_GE(r.records[t].spent_eps_closed, r.records[t - 1].spent_eps_closed);
    EXPECT_GT(r.records[t].noise_sigma, 0.0);
    EXPECT_EQ(r.records[t].wallclock_ms, 0.0);
  }
  // The total budget is spent exactly at T in closed form.
  EXPECT_NEAR(r.spent_eps_closed_final, 1.0, 1e-12);
  EXPECT_LE(r.spent_eps_ledger_final, r.spent_eps_ledger_max_final);
}

TEST(RunExperiment, ConvergesWithoutNoise) {
  // sigma = 0, full participation, one local step: the H criterion
  // against a centralised reference must become small.
  ExperimentSpec spec;
  spec.num_clients = 4;
  spec.hp.clients_per_round = 4;
  spec.hp.local_steps = 1;
  spec.hp.batch_size = 50;
  spec.hp.rho = 1.0;
  spec.hp.lambda_r = 0.001;
  spec.hp.rounds = 3000;
  spec.hp.d_x = 10.0;
  spec.metric_stride = 100;
  spec.privacy.kind = PrivacySetting::Kind::kNone;
  const Dataset train = Synthetic(3, 200, 21, 0.1);
  Federation fed = BuildFederation(spec, train);
  std::vector<const Dataset*> shards;
  for (const auto& c : fed.clients) shards.push_back(&c.shard);
  const auto ref = bench::SolveReference(shards, spec.hp.lambda_r, 1e-10);
  ASSERT_TRUE(ref.converged);
  const auto r = RunExperiment(spec, std::move(fed), ExperimentData{&train, nullptr, &ref});
  ASSERT_TRUE(r.records.back().h_criterion.has_value());
  EXPECT_LT(*r.records.back().h_criterion, 1e-3);
  EXPECT_LT(r.records.back().consensus_gap, 1e-2);
}

TEST(ValidateSpec, ListsEveryProblemByKey) {
  ExperimentSpec spec;
  spec.num_clients = 2;
  spec.hp.clients_per_round = 3;
  spec.hp.rho = -1;
  spec.privacy.delta = 2.0;
  try {
    ValidateSpec(spec);
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("clients.K"), std::string::npos);
    EXPECT_NE(msg.find("optimizer.rho"), std::string::npos);
    EXPECT_NE(msg.find("privacy.delta"), std::string::npos);
  }
}

TEST(BuildFederation, RejectsBadShards) {
  ExperimentSpec spec = SmallSpec();
  spec.hp.batch_size = 50;
  EXPECT_THROW(BuildFederation(spec, Synthetic(5, 120, 2)), InvalidInput);
  spec = SmallSpec();
  std::vector<Dataset> shards(5, Synthetic(5, 20, 1));
  EXPECT_THROW(BuildFederation(spec, shards), InvalidInput);
}

}  // namespace
}  // namespace fedspd::engine
