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

// Federated stochastic primal-dual learning with differential privacy.
//
// One round:
//   server   x0 = mean of the most recent uploads (index order), pick K clients
//   client   Q proximal SGD steps on the linearized augmented Lagrangian,
//            average the inner iterates, dual ascent, upload x - lambda/rho + noise
//   inactive clients keep (x, lambda, upload) untouched.
//
// All state transitions are deterministic given the master seed; parallel
// client execution produces bit-identical results to sequential execution.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedspd/bench.hpp"
#include "fedspd/datastore.hpp"
#include "fedspd/linmodel.hpp"
#include "fedspd/privacy.hpp"
#include "fedspd/sampling.hpp"

namespace fedspd::engine {

enum class Algorithm { kFedSpdDp, kDpSgd, kDpFedAvg, kDpAdmm };

const char* ToString(Algorithm a);
Algorithm ParseAlgorithm(const std::string& text);

struct HyperParams {
  double rho = 20.0;
  std::size_t local_steps = 5;        // Q
  std::size_t batch_size = 10;        // b
  std::size_t clients_per_round = 20; // K
  std::size_t rounds = 100;           // T
  double lambda_r = 0.01;
  double clip_bound = 1.0;            // G
  // Analysis constants entering the step-size schedule and H criterion.
  double d_x = 1.0;
  double d_lambda = 1.0;
  double phi = 1.0;
  double beta = 1.0;
  double c0 = privacy::kDefaultC0;
  SamplingMode sampling = SamplingMode::kWithoutReplacement;
  // Optional projection of each dual onto the beta-ball (off by default).
  bool project_dual = false;
  // Baseline knobs. Zero selects the default policy documented in baselines.hpp.
  double fedavg_clip = 0.0;
  double dpsgd_clip = 0.0;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct PrivacySetting {
  enum class Kind { kNone, kTotalBudget, kPerRound };
  Kind kind = Kind::kTotalBudget;
  double value = 1.0;  // eps_bar or per-round eps
  double delta = 1e-4;
  int tau_max = privacy::kDefaultTauMax;

  bool enabled() const { return kind != Kind::kNone; }
};

struct GammaConstants {
  double clip_bound = 1.0;
  double d_x = 1.0;
  double d_lambda = 1.0;
  double phi = 1.0;
};

// gamma_t = (2 sqrt(Q p C) / d_X) sqrt(t) with
// C = G^2 + 2 d_lambda^2 + 2 phi^2 / b + 16 rho d G^2 ln(1.25/delta) / ((Q-1)^2 eps^2),
// where (Q-1)^2 is replaced by 1 when Q = 1 and the last term vanishes for
// eps = +inf (no privacy).
double GammaSchedule(std::size_t t, std::size_t local_steps, double client_prob,
                     std::size_t batch_size, double eps, double delta, double rho,
                     std::size_t dim, const GammaConstants& consts);

// prox_{lambda_R ||.||_1 / (gamma + rho)}((gamma x_prev + rho x0 + lambda - grad) / (gamma + rho))
void LocalSgdStep(std::span<const double> x_prev, std::span<const double> x0,
                  std::span<const double> lambda, std::span<const double> grad,
                  double gamma, double rho, double lambda_r, std::span<double> out);
ModelVector LocalSgdStep(std::span<const double> x_prev, std::span<const double> x0,
                         std::span<const double> lambda, std::span<const double> grad,
                         double gamma, double rho, double lambda_r);

// Supplies the r-th mini-batch of a local round as indices into the shard.
using BatchProvider = std::function<std::vector<std::size_t>(std::size_t r)>;

struct LocalPrimalResult {
  ModelVector average;     // x_i^t, mean of the Q inner iterates
  ModelVector last_inner;  // x_i^{t,Q-1}, the next round's starting point
  std::vector<ModelVector> inner;  // filled only when requested
};

// Q clipped proximal SGD steps starting at `start`.
LocalPrimalResult LocalPrimalUpdate(std::span<const double> start,
                                    std::span<const double> x0,
                                    std::span<const double> lambda, const Dataset& shard,
                                    const BatchProvider& batches, std::size_t local_steps,
                                    double gamma, double rho, double lambda_r,
                                    double clip_bound, bool keep_inner = false);

struct ClientState {
  ModelVector x;           // local primal x_i
  ModelVector lambda;      // dual lambda_i
  ModelVector y_tilde;     // most recent upload
  ModelVector inner;       // last inner iterate, next round's start
  ModelVector last_noise;  // noise drawn for the most recent upload
  Dataset shard;
  privacy::PrivacyLedger ledger;
  RandomStream rng;
  double eps_round = std::numeric_limits<double>::infinity();
  double client_prob = 1.0;
  double last_gamma = 0.0;
  double last_sigma = 0.0;
};

struct ServerState {
  ModelVector x0;                    // current aggregate of the registry
  ModelVector broadcast;             // model sent to clients this round
  std::vector<ModelVector> registry; // latest upload per client
  std::size_t round = 0;
  RandomStream rng;
};

// x0 = (1/N) sum_i registry[i], summed in ascending client order.
ModelVector ServerAggregate(const ServerState& server);

struct RoundStats {
  std::vector<std::size_t> active;
  double mean_gamma = 0.0;
  double mean_sigma = 0.0;
  double max_gamma = 0.0;
};

// Algorithm-independent per-round context.
struct RoundContext {
  std::size_t t = 1;
  const HyperParams* hp = nullptr;
  const PrivacySetting* privacy = nullptr;
  double schedule_prob = 1.0;  // K / N, enters the step-size schedule
  unsigned threads = 1;
};

// Executes one client's local round against broadcast model x0: local
// steps, averaging, dual update, perturbed upload and ledger entry.
void ClientLocalRound(ClientState& client, std::span<const double> x0,
                      const RoundContext& ctx);

// One full round of the primal-dual protocol.
RoundStats RunRound(ServerState& server, std::vector<ClientState>& clients,
                    const RoundContext& ctx);

// Step size shared by every algorithm in round t for `client`.
double ClientGamma(const ClientState& client, const RoundContext& ctx);

// Runs `fn(i)` for every index in `items`, on up to `threads` threads.
void ParallelFor(std::span<const std::size_t> items, unsigned threads,
                 const std::function<void(std::size_t)>& fn);

struct ExperimentSpec {
  Algorithm algorithm = Algorithm::kFedSpdDp;
  HyperParams hp;
  PrivacySetting privacy;
  std::size_t num_clients = 100;  // N
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::size_t metric_stride = 1;  // ALFV every `stride` rounds (and the last)
  bool record_wallclock = false;
};

// Throws InvalidInput listing every violated precondition.
void ValidateSpec(const ExperimentSpec& spec);

struct RunResult {
  std::vector<bench::RoundRecord> records;
  std::size_t dim = 0;
  std::size_t num_clients = 0;
  double mean_eps_round = 0.0;
  double mean_q = 0.0;
  double spent_eps_closed_final = 0.0;
  double spent_eps_ledger_final = 0.0;
  double spent_eps_ledger_max_final = 0.0;
  std::optional<std::size_t> gamma_condition_violation_round;
  double max_dual_norm = 0.0;
  ModelVector final_model;
};

struct ExperimentData {
  const Dataset* train = nullptr;
  const Dataset* test = nullptr;
  // Optional oracle; when set every record carries the H criterion.
  const bench::ReferenceSolution* reference = nullptr;
};

// Builds clients and the server from a uniform partition of the training set.
struct Federation {
  ServerState server;
  std::vector<ClientState> clients;
};
Federation BuildFederation(const ExperimentSpec& spec, const Dataset& train);

// Same, from explicit shards (used by tests and the reference oracle).
Federation BuildFederation(const ExperimentSpec& spec, std::vector<Dataset> shards);

// Runs T rounds of the selected algorithm. Records round 0 (initial state)
// through round T.
RunResult RunExperiment(const ExperimentSpec& spec, const ExperimentData& data);
RunResult RunExperiment(const ExperimentSpec& spec, Federation federation,
                        const ExperimentData& data);

}  // namespace fedspd::engine
