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

#include "fedspd/privacy.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fedspd/errors.hpp"

namespace fedspd::privacy {
namespace {

void CheckDelta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidInput("delta must lie in (0, 1), got " + std::to_string(delta));
  }
}

void CheckQ(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw InvalidInput("data sampling ratio q must lie in (0, 1), got " +
                       std::to_string(q));
  }
}

void CheckRoundGeometry(std::size_t local_steps, double clip_bound,
                        double rho_plus_gamma) {
  if (local_steps == 0) throw InvalidInput("Q must be at least 1");
  if (!(clip_bound > 0.0)) throw InvalidInput("gradient bound G must be positive");
  if (!(rho_plus_gamma > 0.0)) throw InvalidInput("rho + gamma must be positive");
}

}  // namespace

void Validate(const DpParams& dp) {
  if (!(dp.eps_round > 0.0)) throw InvalidInput("per-round epsilon must be positive");
  CheckDelta(dp.delta);
  if (!(dp.clip_bound > 0.0)) throw InvalidInput("clip bound must be positive");
}

double Sensitivity(std::size_t local_steps, double clip_bound, double rho_plus_gamma) {
  CheckRoundGeometry(local_steps, clip_bound, rho_plus_gamma);
  if (local_steps == 1) return 4.0 * clip_bound / rho_plus_gamma;
  const double q = static_cast<double>(local_steps);
  return 4.0 * q * clip_bound / ((q - 1.0) * rho_plus_gamma);
}

double GaussianMultiplier(double delta) {
  CheckDelta(delta);
  return std::sqrt(2.0 * std::log(1.25 / delta));
}

double NoiseScale(std::size_t local_steps, double clip_bound, double rho_plus_gamma,
                  double eps, double delta) {
  if (!(eps > 0.0)) throw InvalidInput("epsilon must be positive");
  const double mult = GaussianMultiplier(delta);
  if (std::isinf(eps)) return 0.0;
  return Sensitivity(local_steps, clip_bound, rho_plus_gamma) * mult / eps;
}

void GaussianPerturbInPlace(std::span<double> v, double sigma, RandomStream& rng) {
  if (sigma < 0.0) throw InvalidInput("noise scale must be nonnegative");
  if (sigma == 0.0) return;
  for (double& x : v) x += sigma * rng.Normal();
}

ModelVector GaussianPerturb(std::span<const double> v, double sigma, RandomStream& rng) {
  ModelVector out(v.begin(), v.end());
  GaussianPerturbInPlace(out, sigma, rng);
  return out;
}

double DataSamplingRatio(const SamplingProfile& profile) {
  if (profile.local_steps == 0 || profile.batch_size == 0 || profile.shard_size == 0) {
    throw InvalidInput("Q, b and m must be positive");
  }
  if (!(profile.client_prob > 0.0 && profile.client_prob <= 1.0)) {
    throw InvalidInput("client sampling probability must lie in (0, 1]");
  }
  const double draws = static_cast<double>(profile.local_steps * profile.batch_size);
  const double m = static_cast<double>(profile.shard_size);
  double q = 0.0;
  if (profile.mode == SamplingMode::kWithoutReplacement) {
    if (profile.local_steps * profile.batch_size > profile.shard_size) {
      throw InvalidInput("WOR sampling needs Q*b <= m (Q*b=" +
                         std::to_string(profile.local_steps * profile.batch_size) +
                         ", m=" + std::to_string(profile.shard_size) + ")");
    }
    q = draws / m;
  } else {
    // 1 - (1 - 1/m)^(Qb), computed without cancellation.
    q = -std::expm1(draws * std::log1p(-1.0 / m));
  }
  CheckQ(q);
  return q;
}

Amplification Amplification::Subsampled(double q) {
  CheckQ(q);
  return Amplification(q, true);
}

double Amplification::MomentFactor() const {
  return subsampled_ ? q_ * q_ / (1.0 - q_) : 1.0;
}

double Amplification::LossFactor() const {
  return subsampled_ ? q_ / std::sqrt(1.0 - q_) : 1.0;
}

double TotalPrivacyLossClosedForm(double eps, const Amplification& amp, double p,
                                  double rounds, double c0) {
  if (rounds < 0.0) throw InvalidInput("round count must be nonnegative");
  if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("p must lie in (0, 1]");
  return c0 * amp.LossFactor() * eps * std::sqrt(p * rounds);
}

double TotalPrivacyLossClosedForm(double eps, double q, double p, double rounds,
                                  double c0) {
  CheckQ(q);
  return c0 * q * eps * std::sqrt(p * rounds / (1.0 - q));
}

double PerRoundEpsilon(double eps_bar, const Amplification& amp, double p,
                       double rounds, double c0) {
  if (!(rounds > 0.0)) throw InvalidInput("round count must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("p must lie in (0, 1]");
  if (!(eps_bar > 0.0)) throw InvalidInput("total budget must be positive");
  return eps_bar / (c0 * amp.LossFactor() * std::sqrt(p * rounds));
}

double PerRoundEpsilon(double eps_bar, double q, double p, double rounds, double c0) {
  CheckQ(q);
  if (!(rounds > 0.0)) throw InvalidInput("round count must be positive");
  return eps_bar * std::sqrt(1.0 - q) / (c0 * q * std::sqrt(p * rounds));
}

double LogMoment(int tau, const Amplification& amp, double eps, double delta) {
  if (tau < 1) throw InvalidInput("moment order tau must be >= 1");
  const double t = static_cast<double>(tau);
  return amp.MomentFactor() * t * (t + 1.0) * eps * eps /
         (4.0 * std::log(1.25 / delta));
}

double LogMoment(int tau, double q, double eps, double delta) {
  CheckQ(q);
  CheckDelta(delta);
  return LogMoment(tau, Amplification::Subsampled(q), eps, delta);
}

double SpentEpsilon(double participations, const Amplification& amp, double eps,
                    double delta, double target_delta, int tau_max) {
  if (tau_max < 1) throw InvalidInput("tau_max must be >= 1");
  CheckDelta(target_delta);
  if (participations <= 0.0) return 0.0;
  if (std::isinf(eps)) return std::numeric_limits<double>::infinity();
  const double log_inv_delta = std::log(1.0 / target_delta);
  double best = std::numeric_limits<double>::infinity();
  for (int tau = 1; tau <= tau_max; ++tau) {
    const double value =
        (participations * LogMoment(tau, amp, eps, delta) + log_inv_delta) / tau;
    if (value < best) best = value;
  }
  return best;
}

PrivacyLedger::PrivacyLedger(Amplification amp, double eps_round, double delta)
    : amp_(amp), eps_round_(eps_round), delta_(delta) {
  CheckDelta(delta);
  if (!(eps_round > 0.0)) throw InvalidInput("per-round epsilon must be positive");
}

double PrivacyLedger::TotalLogMoment(int tau) const {
  if (participation_count_ == 0) return 0.0;
  return static_cast<double>(participation_count_) *
         LogMoment(tau, amp_, eps_round_, delta_);
}

double PrivacyLedger::SpentEpsilon(double target_delta, int tau_max) const {
  return privacy::SpentEpsilon(static_cast<double>(participation_count_), amp_,
                               eps_round_, delta_, target_delta, tau_max);
}

}  // namespace fedspd::privacy
