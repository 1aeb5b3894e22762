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

#include "fedspd/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "fedspd/baselines.hpp"
#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd::engine {

const char* ToString(Algorithm a) {
  switch (a) {
    case Algorithm::kFedSpdDp: return "fedspd_dp";
    case Algorithm::kDpSgd: return "dp_sgd";
    case Algorithm::kDpFedAvg: return "dp_fedavg";
    case Algorithm::kDpAdmm: return "dp_admm";
  }
  return "unknown";
}

Algorithm ParseAlgorithm(const std::string& text) {
  if (text == "fedspd_dp") return Algorithm::kFedSpdDp;
  if (text == "dp_sgd") return Algorithm::kDpSgd;
  if (text == "dp_fedavg") return Algorithm::kDpFedAvg;
  if (text == "dp_admm") return Algorithm::kDpAdmm;
  throw InvalidInput("unknown algorithm '" + text +
                     "' (expected fedspd_dp, dp_sgd, dp_fedavg or dp_admm)");
}

double GammaSchedule(std::size_t t, std::size_t local_steps, double client_prob,
                     std::size_t batch_size, double eps, double delta, double rho,
                     std::size_t dim, const GammaConstants& consts) {
  if (local_steps == 0) throw InvalidInput("Q must be at least 1");
  if (batch_size == 0) throw InvalidInput("batch size must be at least 1");
  if (!(eps > 0.0)) throw InvalidInput("epsilon must be positive");
  if (!(client_prob > 0.0 && client_prob <= 1.0)) {
    throw InvalidInput("client sampling probability must lie in (0, 1]");
  }
  const double g2 = consts.clip_bound * consts.clip_bound;
  double c = g2 + 2.0 * consts.d_lambda * consts.d_lambda +
             2.0 * consts.phi * consts.phi / static_cast<double>(batch_size);
  if (!std::isinf(eps)) {
    const double qm1 = local_steps > 1 ? static_cast<double>(local_steps - 1) : 1.0;
    c += 16.0 * rho * static_cast<double>(dim) * g2 * std::log(1.25 / delta) /
         (qm1 * qm1 * eps * eps);
  }
  return 2.0 * std::sqrt(static_cast<double>(local_steps) * client_prob * c) / consts.d_x *
         std::sqrt(static_cast<double>(t));
}

void LocalSgdStep(std::span<const double> x_prev, std::span<const double> x0,
                  std::span<const double> lambda, std::span<const double> grad,
                  double gamma, double rho, double lambda_r, std::span<double> out) {
  const std::size_t d = x_prev.size();
  if (x0.size() != d || lambda.size() != d || grad.size() != d || out.size() != d) {
    throw InvalidInput("local step dimension mismatch");
  }
  if (!(gamma > 0.0) || !(rho > 0.0)) throw InvalidInput("gamma and rho must be positive");
  const double inv = 1.0 / (gamma + rho);
  simd::Active().affine4(gamma, x_prev.data(), rho, x0.data(), lambda.data(), grad.data(),
                         inv, out.data(), d);
  linmodel::ProxL1InPlace(out, lambda_r * inv);
}

ModelVector LocalSgdStep(std::span<const double> x_prev, std::span<const double> x0,
                         std::span<const double> lambda, std::span<const double> grad,
                         double gamma, double rho, double lambda_r) {
  ModelVector out(x_prev.size());
  LocalSgdStep(x_prev, x0, lambda, grad, gamma, rho, lambda_r, out);
  return out;
}

LocalPrimalResult LocalPrimalUpdate(std::span<const double> start,
                                    std::span<const double> x0,
                                    std::span<const double> lambda, const Dataset& shard,
                                    const BatchProvider& batches, std::size_t local_steps,
                                    double gamma, double rho, double lambda_r,
                                    double clip_bound, bool keep_inner) {
  if (local_steps == 0) throw InvalidInput("Q must be at least 1");
  const std::size_t d = start.size();
  LocalPrimalResult result;
  result.average.assign(d, 0.0);
  ModelVector current(start.begin(), start.end());
  ModelVector next(d), grad(d);
  for (std::size_t r = 0; r < local_steps; ++r) {
    const std::vector<std::size_t> indices = batches(r);
    linmodel::LogisticGrad(current, MiniBatch{&shard, indices}, grad);
    linmodel::ClipToNormInPlace(grad, clip_bound);
    LocalSgdStep(current, x0, lambda, grad, gamma, rho, lambda_r, next);
    simd::Axpy(1.0, next, result.average);
    if (keep_inner) result.inner.push_back(next);
    current.swap(next);
  }
  simd::Scale(1.0 / static_cast<double>(local_steps), result.average);
  result.last_inner = std::move(current);
  return result;
}

ModelVector ServerAggregate(const ServerState& server) {
  if (server.registry.empty()) throw InvalidInput("empty upload registry");
  ModelVector sum(server.registry.front().size(), 0.0);
  for (const auto& upload : server.registry) simd::Axpy(1.0, upload, sum);
  simd::Scale(1.0 / static_cast<double>(server.registry.size()), sum);
  return sum;
}

double ClientGamma(const ClientState& client, const RoundContext& ctx) {
  const HyperParams& hp = *ctx.hp;
  const GammaConstants consts{hp.clip_bound, hp.d_x, hp.d_lambda, hp.phi};
  return GammaSchedule(ctx.t, hp.local_steps, ctx.schedule_prob, hp.batch_size,
                       client.eps_round, ctx.privacy->delta, hp.rho, client.shard.dim(),
                       consts);
}

namespace {

void ProjectDual(ModelVector& lambda, double radius) {
  const double norm = simd::Norm(lambda);
  if (norm > radius) simd::Scale(radius / norm, lambda);
}

}  // namespace

void ClientLocalRound(ClientState& client, std::span<const double> x0,
                      const RoundContext& ctx) {
  const HyperParams& hp = *ctx.hp;
  const double gamma = ClientGamma(client, ctx);
  const std::size_t m = client.shard.size();
  if (hp.sampling == SamplingMode::kWithoutReplacement && hp.batch_size > m) {
    throw InvalidInput("WOR mini-batch larger than the local shard");
  }
  const BatchProvider batches = [&](std::size_t) {
    return sampling::SampleMinibatch(m, hp.batch_size, hp.sampling, client.rng);
  };
  LocalPrimalResult primal =
      LocalPrimalUpdate(client.inner, x0, client.lambda, client.shard, batches,
                        hp.local_steps, gamma, hp.rho, hp.lambda_r, hp.clip_bound);
  client.x = std::move(primal.average);
  client.inner = std::move(primal.last_inner);

  // lambda^t = lambda^{t-1} - rho (x^t - x0)
  const std::size_t d = client.x.size();
  for (std::size_t k = 0; k < d; ++k) client.lambda[k] -= hp.rho * (client.x[k] - x0[k]);
  if (hp.project_dual) ProjectDual(client.lambda, hp.beta);

  double sigma = 0.0;
  if (ctx.privacy->enabled()) {
    sigma = privacy::NoiseScale(hp.local_steps, hp.clip_bound, hp.rho + gamma,
                                client.eps_round, ctx.privacy->delta);
  }
  client.last_noise.assign(d, 0.0);
  privacy::GaussianPerturbInPlace(client.last_noise, sigma, client.rng);
  for (std::size_t k = 0; k < d; ++k) {
    client.y_tilde[k] = client.x[k] - client.lambda[k] / hp.rho + client.last_noise[k];
  }
  client.ledger.RecordParticipation();
  client.last_gamma = gamma;
  client.last_sigma = sigma;
}

void ParallelFor(std::span<const std::size_t> items, unsigned threads,
                 const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, threads), items.size());
  if (workers <= 1) {
    for (std::size_t i : items) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = next.fetch_add(1); k < items.size(); k = next.fetch_add(1)) {
            fn(items[k]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

RoundStats CollectStats(const std::vector<ClientState>& clients,
                        std::vector<std::size_t> active) {
  RoundStats stats;
  stats.active = std::move(active);
  for (std::size_t i : stats.active) {
    stats.mean_gamma += clients[i].last_gamma;
    stats.mean_sigma += clients[i].last_sigma;
    stats.max_gamma = std::max(stats.max_gamma, clients[i].last_gamma);
  }
  if (!stats.active.empty()) {
    stats.mean_gamma /= static_cast<double>(stats.active.size());
    stats.mean_sigma /= static_cast<double>(stats.active.size());
  }
  return stats;
}

RoundStats RunRound(ServerState& server, std::vector<ClientState>& clients,
                    const RoundContext& ctx) {
  const HyperParams& hp = *ctx.hp;
  server.x0 = ServerAggregate(server);
  server.broadcast = server.x0;
  const auto subset = sampling::SampleClients(clients.size(), hp.clients_per_round,
                                              server.rng, ctx.t);
  const ModelVector& x0 = server.broadcast;
  ParallelFor(subset.members, ctx.threads,
              [&](std::size_t i) { ClientLocalRound(clients[i], x0, ctx); });
  for (std::size_t i : subset.members) server.registry[i] = clients[i].y_tilde;
  server.x0 = ServerAggregate(server);
  server.round = ctx.t;
  return CollectStats(clients, subset.members);
}

namespace {

double ClientSamplingProb(Algorithm algorithm, const ExperimentSpec& spec) {
  switch (algorithm) {
    case Algorithm::kFedSpdDp:
    case Algorithm::kDpFedAvg:
      return static_cast<double>(spec.hp.clients_per_round) /
             static_cast<double>(spec.num_clients);
    case Algorithm::kDpSgd:
    case Algorithm::kDpAdmm:
      return 1.0;
  }
  return 1.0;
}

privacy::Amplification RoundAmplification(Algorithm algorithm, const HyperParams& hp,
                                          std::size_t shard_size) {
  privacy::SamplingProfile profile;
  profile.mode = hp.sampling;
  profile.batch_size = hp.batch_size;
  profile.shard_size = shard_size;
  switch (algorithm) {
    case Algorithm::kFedSpdDp:
    case Algorithm::kDpFedAvg:
      profile.local_steps = hp.local_steps;
      break;
    case Algorithm::kDpSgd:
      profile.local_steps = 1;
      break;
    case Algorithm::kDpAdmm:
      return privacy::Amplification::None();
  }
  return privacy::Amplification::Subsampled(privacy::DataSamplingRatio(profile));
}

}  // namespace

void ValidateSpec(const ExperimentSpec& spec) {
  std::vector<std::string> problems;
  const HyperParams& hp = spec.hp;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  require(spec.num_clients >= 1, "clients.N must be >= 1");
  require(hp.clients_per_round >= 1, "clients.K must be >= 1");
  require(hp.clients_per_round <= spec.num_clients, "clients.K must not exceed clients.N");
  require(hp.rho > 0.0, "optimizer.rho must be positive");
  require(hp.local_steps >= 1, "optimizer.Q must be >= 1");
  require(hp.batch_size >= 1, "optimizer.b must be >= 1");
  require(hp.lambda_r >= 0.0, "optimizer.lambda_R must be nonnegative");
  require(hp.clip_bound > 0.0, "optimizer.G must be positive");
  require(hp.d_x > 0.0 && hp.d_lambda > 0.0 && hp.phi > 0.0 && hp.beta > 0.0,
          "analysis constants d_X, d_lambda, phi, beta must be positive");
  require(hp.c0 > 0.0, "privacy.c0 must be positive");
  require(hp.fedavg_clip >= 0.0 && hp.dpsgd_clip >= 0.0,
          "baseline clip bounds must be nonnegative");
  require(spec.metric_stride >= 1, "run.metric_stride must be >= 1");
  if (spec.privacy.enabled()) {
    require(spec.privacy.value > 0.0, "privacy budget / epsilon must be positive");
    require(spec.privacy.delta > 0.0 && spec.privacy.delta < 1.0,
            "privacy.delta must lie in (0, 1)");
    require(spec.privacy.tau_max >= 1, "privacy.tau_max must be >= 1");
  }
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "invalid experiment configuration:";
    for (const auto& p : problems) msg << "\n  - " << p;
    throw InvalidInput(msg.str());
  }
}

Federation BuildFederation(const ExperimentSpec& spec, std::vector<Dataset> shards) {
  ValidateSpec(spec);
  if (shards.size() != spec.num_clients) {
    throw InvalidInput("number of shards does not match clients.N");
  }
  const HyperParams& hp = spec.hp;
  const double p = ClientSamplingProb(spec.algorithm, spec);
  Federation fed;
  fed.server.rng = RandomStream(spec.seed, kServerStream);
  for (std::size_t i = 0; i < shards.size(); ++i) {
    ClientState c;
    const std::size_t m = shards[i].size();
    const std::size_t d = shards[i].dim();
    if (m == 0) throw InvalidInput("client " + std::to_string(i) + " has an empty shard");
    if (hp.sampling == SamplingMode::kWithoutReplacement && hp.batch_size > m) {
      throw InvalidInput("WOR batch size b exceeds the shard size of client " +
                         std::to_string(i));
    }
    c.shard = std::move(shards[i]);
    c.x.assign(d, 0.0);
    c.lambda.assign(d, 0.0);
    c.inner.assign(d, 0.0);
    c.last_noise.assign(d, 0.0);
    // Initial upload x - lambda/rho carries no data and no noise.
    c.y_tilde.assign(d, 0.0);
    c.rng = RandomStream(spec.seed, ClientStream(i));
    c.client_prob = p;
    if (spec.privacy.enabled()) {
      const auto amp = RoundAmplification(spec.algorithm, hp, m);
      if (spec.privacy.kind == PrivacySetting::Kind::kPerRound) {
        c.eps_round = spec.privacy.value;
      } else if (hp.rounds > 0) {
        c.eps_round = privacy::PerRoundEpsilon(spec.privacy.value, amp, p,
                                               static_cast<double>(hp.rounds), hp.c0);
      }
      c.ledger = privacy::PrivacyLedger(amp, c.eps_round, spec.privacy.delta);
    }
    fed.clients.push_back(std::move(c));
  }
  const std::size_t d = fed.clients.front().x.size();
  fed.server.registry.assign(fed.clients.size(), ModelVector(d, 0.0));
  for (std::size_t i = 0; i < fed.clients.size(); ++i) {
    fed.server.registry[i] = fed.clients[i].y_tilde;
  }
  fed.server.x0 = ServerAggregate(fed.server);
  fed.server.broadcast = fed.server.x0;
  return fed;
}

Federation BuildFederation(const ExperimentSpec& spec, const Dataset& train) {
  ValidateSpec(spec);
  // The partition draws from a stream that no entity uses for training.
  RandomStream partition_rng(spec.seed, ~std::uint64_t{0});
  const auto part = datastore::PartitionUniform(train.size(), spec.num_clients, partition_rng);
  std::vector<Dataset> shards;
  shards.reserve(part.num_shards());
  for (const auto& idx : part.shards) shards.push_back(train.Subset(idx));
  return BuildFederation(spec, std::move(shards));
}

namespace {

class MetricRecorder {
 public:
  MetricRecorder(const ExperimentSpec& spec, const Federation& fed,
                 const ExperimentData& data)
      : spec_(spec), data_(data) {
    for (const auto& c : fed.clients) shards_.push_back(&c.shard);
    if (data.reference != nullptr) {
      averages_.assign(fed.clients.size(), bench::RunningMean(fed.clients.front().x.size()));
      server_average_ = bench::RunningMean(fed.clients.front().x.size());
    }
  }

  bench::RoundRecord Record(std::size_t t, const Federation& fed, const RoundStats* stats) {
    const auto& clients = fed.clients;
    const ModelVector& x0 = fed.server.x0;
    const HyperParams& hp = spec_.hp;
    bench::RoundRecord rec;
    rec.round = t;
    const bool last = t == hp.rounds;
    if (t % spec_.metric_stride == 0 || last) {
      std::vector<bench::LagrangianTerm> terms;
      terms.reserve(clients.size());
      for (const auto& c : clients) terms.push_back({&c.shard, c.x, c.lambda});
      rec.alfv = bench::Alfv(terms, x0, hp.rho, hp.lambda_r);
    } else {
      rec.alfv = std::nan("");
    }
    rec.test_accuracy = data_.test != nullptr && !data_.test->empty()
                            ? linmodel::Accuracy(x0, *data_.test)
                            : std::nan("");
    double ledger_sum = 0.0, closed_sum = 0.0;
    for (const auto& c : clients) {
      rec.consensus_gap = std::max(rec.consensus_gap, std::sqrt(simd::SquaredDistance(c.x, x0)));
      if (spec_.privacy.enabled()) {
        const double spent = c.ledger.SpentEpsilon(spec_.privacy.delta, spec_.privacy.tau_max);
        ledger_sum += spent;
        rec.spent_eps_max = std::max(rec.spent_eps_max, spent);
        closed_sum += privacy::TotalPrivacyLossClosedForm(
            c.eps_round, c.ledger.amplification(), c.client_prob, static_cast<double>(t),
            hp.c0);
      }
    }
    rec.spent_eps_ledger = ledger_sum / static_cast<double>(clients.size());
    rec.spent_eps_closed = closed_sum / static_cast<double>(clients.size());
    if (stats != nullptr) {
      rec.noise_sigma = stats->mean_sigma;
      rec.gamma = stats->mean_gamma;
    }
    if (data_.reference != nullptr && t > 0) {
      for (std::size_t i = 0; i < clients.size(); ++i) averages_[i].Add(clients[i].x);
      server_average_.Add(fed.server.broadcast);
      std::vector<ModelVector> means;
      means.reserve(averages_.size());
      for (const auto& a : averages_) means.push_back(a.mean());
      rec.h_criterion = bench::HCriterion(means, server_average_.mean(), shards_,
                                          data_.reference, hp.lambda_r, hp.beta);
    }
    return rec;
  }

 private:
  const ExperimentSpec& spec_;
  const ExperimentData& data_;
  std::vector<const Dataset*> shards_;
  std::vector<bench::RunningMean> averages_;
  bench::RunningMean server_average_;
};

}  // namespace

RunResult RunExperiment(const ExperimentSpec& spec, Federation fed,
                        const ExperimentData& data) {
  ValidateSpec(spec);
  const HyperParams& hp = spec.hp;
  RunResult result;
  result.num_clients = fed.clients.size();
  result.dim = fed.clients.front().x.size();
  for (const auto& c : fed.clients) {
    result.mean_eps_round += c.eps_round;
    result.mean_q += c.ledger.amplification().subsampled() ? c.ledger.amplification().q() : 1.0;
  }
  result.mean_eps_round /= static_cast<double>(fed.clients.size());
  result.mean_q /= static_cast<double>(fed.clients.size());

  MetricRecorder recorder(spec, fed, data);
  result.records.push_back(recorder.Record(0, fed, nullptr));

  RoundContext ctx;
  ctx.hp = &spec.hp;
  ctx.privacy = &spec.privacy;
  ctx.threads = spec.threads;
  ctx.schedule_prob = ClientSamplingProb(spec.algorithm, spec);
  using Clock = std::chrono::steady_clock;
  for (std::size_t t = 1; t <= hp.rounds; ++t) {
    const auto started = Clock::now();
    ctx.t = t;
    RoundStats stats;
    switch (spec.algorithm) {
      case Algorithm::kFedSpdDp: stats = RunRound(fed.server, fed.clients, ctx); break;
      case Algorithm::kDpSgd: stats = baselines::DpSgdRound(fed.server, fed.clients, ctx); break;
      case Algorithm::kDpFedAvg:
        stats = baselines::DpFedAvgRound(fed.server, fed.clients, ctx);
        break;
      case Algorithm::kDpAdmm: stats = baselines::DpAdmmRound(fed.server, fed.clients, ctx); break;
    }
    if (!result.gamma_condition_violation_round && hp.rho * hp.rho < stats.max_gamma) {
      result.gamma_condition_violation_round = t;
    }
    for (std::size_t i : stats.active) {
      result.max_dual_norm = std::max(result.max_dual_norm, simd::Norm(fed.clients[i].lambda));
    }
    auto rec = recorder.Record(t, fed, &stats);
    if (spec.record_wallclock) {
      rec.wallclock_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - started).count();
    }
    result.records.push_back(rec);
  }
  const auto& last = result.records.back();
  result.spent_eps_closed_final = last.spent_eps_closed;
  result.spent_eps_ledger_final = last.spent_eps_ledger;
  result.spent_eps_ledger_max_final = last.spent_eps_max;
  result.final_model = fed.server.x0;
  return result;
}

RunResult RunExperiment(const ExperimentSpec& spec, const ExperimentData& data) {
  if (data.train == nullptr) throw InvalidInput("experiment needs a training set");
  return RunExperiment(spec, BuildFederation(spec, *data.train), data);
}

}  // namespace fedspd::engine
