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

#include "fedspd/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "fedspd/errors.hpp"
#include "fedspd/kernels.hpp"

namespace fedspd::baselines {

using engine::ClientState;
using engine::RoundContext;
using engine::RoundStats;
using engine::ServerState;

double Median(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("median of an empty list");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

namespace {

void RequireShard(const ClientState& client) {
  if (client.shard.empty()) throw InvalidInput("client shard is empty");
}

double UploadMultiplier(const ClientState& client, const RoundContext& ctx) {
  if (!ctx.privacy->enabled() || std::isinf(client.eps_round)) return 0.0;
  return privacy::GaussianMultiplier(ctx.privacy->delta) / client.eps_round;
}

void Finish(ClientState& client, double gamma, double sigma) {
  client.ledger.RecordParticipation();
  client.last_gamma = gamma;
  client.last_sigma = sigma;
}

RoundStats Stats(const std::vector<ClientState>& clients, std::vector<std::size_t> active) {
  RoundStats stats;
  for (std::size_t i : active) {
    stats.mean_gamma += clients[i].last_gamma;
    stats.mean_sigma += clients[i].last_sigma;
    stats.max_gamma = std::max(stats.max_gamma, clients[i].last_gamma);
  }
  if (!active.empty()) {
    stats.mean_gamma /= static_cast<double>(active.size());
    stats.mean_sigma /= static_cast<double>(active.size());
  }
  stats.active = std::move(active);
  return stats;
}

std::vector<std::size_t> Everyone(std::size_t n) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  return all;
}

// Full participation: every client runs, the server averages all uploads.
template <typename Update>
RoundStats FullParticipationRound(ServerState& server, std::vector<ClientState>& clients,
                                  const RoundContext& ctx, Update update) {
  server.broadcast = server.x0;
  const ModelVector& x0 = server.broadcast;
  auto all = Everyone(clients.size());
  engine::ParallelFor(all, ctx.threads,
                      [&](std::size_t i) { update(clients[i], x0, ctx); });
  for (std::size_t i : all) server.registry[i] = clients[i].y_tilde;
  server.x0 = engine::ServerAggregate(server);
  server.round = ctx.t;
  return Stats(clients, std::move(all));
}

}  // namespace

double DpSgdClientUpdate(ClientState& client, std::span<const double> x0,
                         const RoundContext& ctx) {
  RequireShard(client);
  const engine::HyperParams& hp = *ctx.hp;
  const std::size_t d = x0.size();
  const std::size_t m = client.shard.size();
  const std::size_t b = hp.batch_size;
  if (hp.sampling == SamplingMode::kWithoutReplacement && b > m) {
    throw InvalidInput("WOR mini-batch larger than the local shard");
  }
  const double gamma = engine::ClientGamma(client, ctx);
  const auto batch = sampling::SampleMinibatch(m, b, hp.sampling, client.rng);

  std::vector<ModelVector> grads(batch.size(), ModelVector(d));
  std::vector<double> norms(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    linmodel::SampleGrad(x0, client.shard.row(batch[j]), client.shard.label(batch[j]),
                         grads[j]);
    norms[j] = simd::Norm(grads[j]);
  }
  const double clip = hp.dpsgd_clip > 0.0 ? hp.dpsgd_clip : Median(norms);
  ModelVector g(d, 0.0);
  for (auto& gj : grads) {
    linmodel::ClipToNormInPlace(gj, clip);
    simd::Axpy(1.0, gj, g);
  }
  simd::Scale(1.0 / static_cast<double>(b), g);

  // Replace-one sensitivity of the averaged clipped gradient is 2C/b.
  const double grad_sigma = 2.0 * clip / static_cast<double>(b) * UploadMultiplier(client, ctx);
  client.last_noise.assign(d, 0.0);
  privacy::GaussianPerturbInPlace(client.last_noise, grad_sigma, client.rng);

  ModelVector x(d);
  for (std::size_t k = 0; k < d; ++k) x[k] = x0[k] - (g[k] + client.last_noise[k]) / gamma;
  linmodel::ProxL1InPlace(x, hp.lambda_r / gamma);
  client.x = x;
  client.inner = x;
  client.y_tilde = std::move(x);
  const double sigma = grad_sigma / gamma;
  Finish(client, gamma, sigma);
  return sigma;
}

double DpFedAvgClientUpdate(ClientState& client, std::span<const double> x0,
                            const RoundContext& ctx) {
  RequireShard(client);
  const engine::HyperParams& hp = *ctx.hp;
  const std::size_t d = x0.size();
  const std::size_t m = client.shard.size();
  if (hp.sampling == SamplingMode::kWithoutReplacement && hp.batch_size > m) {
    throw InvalidInput("WOR mini-batch larger than the local shard");
  }
  const double gamma = engine::ClientGamma(client, ctx);
  ModelVector x(x0.begin(), x0.end()), grad(d);
  for (std::size_t r = 0; r < hp.local_steps; ++r) {
    const auto idx = sampling::SampleMinibatch(m, hp.batch_size, hp.sampling, client.rng);
    linmodel::LogisticGrad(x, MiniBatch{&client.shard, idx}, grad);
    linmodel::ClipToNormInPlace(grad, hp.clip_bound);
    simd::Axpy(-1.0 / gamma, grad, x);
    linmodel::ProxL1InPlace(x, hp.lambda_r / gamma);
  }
  client.x = x;
  client.inner = x;

  const double clip = hp.fedavg_clip > 0.0
                          ? hp.fedavg_clip
                          : static_cast<double>(hp.local_steps) * hp.clip_bound / gamma;
  ModelVector delta(d);
  for (std::size_t k = 0; k < d; ++k) delta[k] = x[k] - x0[k];
  linmodel::ClipToNormInPlace(delta, clip);
  const double sigma = 2.0 * clip * UploadMultiplier(client, ctx);
  client.last_noise.assign(d, 0.0);
  privacy::GaussianPerturbInPlace(client.last_noise, sigma, client.rng);
  client.y_tilde.resize(d);
  for (std::size_t k = 0; k < d; ++k) client.y_tilde[k] = x0[k] + delta[k] + client.last_noise[k];
  Finish(client, gamma, sigma);
  return sigma;
}

double DpAdmmClientUpdate(ClientState& client, std::span<const double> x0,
                          const RoundContext& ctx) {
  RequireShard(client);
  const engine::HyperParams& hp = *ctx.hp;
  const std::size_t d = x0.size();
  const double gamma = engine::ClientGamma(client, ctx);
  const ModelVector& start = client.inner;

  ModelVector grad = linmodel::LogisticGrad(start, client.shard);
  linmodel::ClipToNormInPlace(grad, hp.clip_bound);
  // Subgradient of the augmented Lagrangian at `start`, step 1 / (gamma + rho).
  const double step = 1.0 / (gamma + hp.rho);
  ModelVector x(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double sign = start[k] > 0.0 ? 1.0 : (start[k] < 0.0 ? -1.0 : 0.0);
    const double sub = grad[k] + hp.lambda_r * sign - client.lambda[k] +
                       hp.rho * (start[k] - x0[k]);
    x[k] = start[k] - step * sub;
  }
  client.x = x;
  client.inner = std::move(x);
  for (std::size_t k = 0; k < d; ++k) client.lambda[k] -= hp.rho * (client.x[k] - x0[k]);

  double sigma = 0.0;
  if (ctx.privacy->enabled()) {
    sigma = privacy::NoiseScale(1, hp.clip_bound, hp.rho + gamma, client.eps_round,
                                ctx.privacy->delta);
  }
  client.last_noise.assign(d, 0.0);
  privacy::GaussianPerturbInPlace(client.last_noise, sigma, client.rng);
  client.y_tilde.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    client.y_tilde[k] = client.x[k] - client.lambda[k] / hp.rho + client.last_noise[k];
  }
  Finish(client, gamma, sigma);
  return sigma;
}

RoundStats DpSgdRound(ServerState& server, std::vector<ClientState>& clients,
                      const RoundContext& ctx) {
  return FullParticipationRound(server, clients, ctx, DpSgdClientUpdate);
}

RoundStats DpAdmmRound(ServerState& server, std::vector<ClientState>& clients,
                       const RoundContext& ctx) {
  return FullParticipationRound(server, clients, ctx, DpAdmmClientUpdate);
}

RoundStats DpFedAvgRound(ServerState& server, std::vector<ClientState>& clients,
                         const RoundContext& ctx) {
  server.broadcast = server.x0;
  const ModelVector& x0 = server.broadcast;
  const auto subset = sampling::SampleClients(clients.size(), ctx.hp->clients_per_round,
                                              server.rng, ctx.t);
  engine::ParallelFor(subset.members, ctx.threads,
                      [&](std::size_t i) { DpFedAvgClientUpdate(clients[i], x0, ctx); });
  // Equal-weight mean over the sampled uploads only.
  ModelVector sum(x0.size(), 0.0);
  for (std::size_t i : subset.members) {
    server.registry[i] = clients[i].y_tilde;
    simd::Axpy(1.0, clients[i].y_tilde, sum);
  }
  simd::Scale(1.0 / static_cast<double>(subset.members.size()), sum);
  server.x0 = std::move(sum);
  server.round = ctx.t;
  return Stats(clients, subset.members);
}

}  // namespace fedspd::baselines
