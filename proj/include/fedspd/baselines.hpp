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

// Comparison algorithms built on the same substrate as the primal-dual
// engine. The choices below are ours where the original descriptions are
// given only by citation; all are configurable through HyperParams.
//
//   DP-SGD     every client takes one SGD step from x0 on a mini-batch of
//              per-sample gradients clipped to C (default: median of the
//              batch's unclipped norms), adds N(0, (2C/b * mult / eps)^2)
//              to the averaged gradient, and uploads its model. Full
//              participation; the server averages all uploads.
//   DP-FedAvg  K sampled clients run Q local SGD steps from x0, clip the
//              model delta to C (default: Q G / gamma, the largest delta a
//              G-clipped step sequence can produce), add N(0, (2C mult/eps)^2)
//              and upload. The server averages the sampled uploads.
//   DP-ADMM    every client takes one subgradient step on its augmented
//              Lagrangian using its full-shard gradient (clipped to G) and
//              lambda_R sign(x) with sign(0) = 0, updates the dual, and
//              uploads x - lambda/rho with single-step sensitivity noise.
//
// Step sizes are 1/gamma_t from the same schedule as the primal-dual engine.

#include <span>
#include <vector>

#include "fedspd/engine.hpp"

namespace fedspd::baselines {

// Median of the values; the mean of the two middle values for even counts.
double Median(std::vector<double> values);

// Single-client updates; return the standard deviation of the upload noise.
double DpSgdClientUpdate(engine::ClientState& client, std::span<const double> x0,
                         const engine::RoundContext& ctx);
double DpFedAvgClientUpdate(engine::ClientState& client, std::span<const double> x0,
                            const engine::RoundContext& ctx);
double DpAdmmClientUpdate(engine::ClientState& client, std::span<const double> x0,
                          const engine::RoundContext& ctx);

engine::RoundStats DpSgdRound(engine::ServerState& server,
                              std::vector<engine::ClientState>& clients,
                              const engine::RoundContext& ctx);
engine::RoundStats DpFedAvgRound(engine::ServerState& server,
                                 std::vector<engine::ClientState>& clients,
                                 const engine::RoundContext& ctx);
engine::RoundStats DpAdmmRound(engine::ServerState& server,
                               std::vector<engine::ClientState>& clients,
                               const engine::RoundContext& ctx);

}  // namespace fedspd::baselines
