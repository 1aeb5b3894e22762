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

// Gaussian mechanism, sensitivity of the uploaded primal-dual model, noise
// calibration, and a moments-accountant ledger with client and data
// subsampling.
//
// Conventions:
//   q   probability that a given local sample is touched in one round,
//   p   probability that a client participates in a round (K / N),
//   c0  constant of the closed-form total-loss expression (3.04 by default).
//
// Every closed-form routine validates its domain and throws InvalidInput.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include "fedspd/linmodel.hpp"
#include "fedspd/sampling.hpp"

namespace fedspd::privacy {

inline constexpr double kDefaultC0 = 3.04;
inline constexpr int kDefaultTauMax = 64;

struct DpParams {
  double eps_round = 0.0;
  double delta = 1e-4;
  double clip_bound = 1.0;
};

void Validate(const DpParams& dp);

struct SamplingProfile {
  SamplingMode mode = SamplingMode::kWithoutReplacement;
  std::size_t local_steps = 1;  // Q
  std::size_t batch_size = 1;   // b
  std::size_t shard_size = 1;   // m
  double client_prob = 1.0;     // p
};

// L2 sensitivity of y = x - lambda / rho for Q local steps with gradients
// bounded by G:  4G/(rho+gamma) when Q = 1, 4QG/((Q-1)(rho+gamma)) otherwise.
double Sensitivity(std::size_t local_steps, double clip_bound, double rho_plus_gamma);

// sqrt(2 ln(1.25 / delta)).
double GaussianMultiplier(double delta);

// sigma = sensitivity * sqrt(2 ln(1.25/delta)) / eps.
double NoiseScale(std::size_t local_steps, double clip_bound, double rho_plus_gamma,
                  double eps, double delta);

// v += N(0, sigma^2 I); sigma == 0 leaves v untouched and consumes no draws.
void GaussianPerturbInPlace(std::span<double> v, double sigma, RandomStream& rng);
ModelVector GaussianPerturb(std::span<const double> v, double sigma, RandomStream& rng);

// q = Qb/m (WOR) or 1 - (1 - 1/m)^(Qb) (WR). Rejects q >= 1.
double DataSamplingRatio(const SamplingProfile& profile);

// How much data subsampling amplifies privacy in one round. A subsampled
// round with ratio q scales the log moment by q^2/(1-q); a round that reads
// the full shard has no amplification and scales it by 1.
class Amplification {
 public:
  static Amplification Subsampled(double q);
  static Amplification None() { return Amplification(0.0, false); }

  bool subsampled() const { return subsampled_; }
  double q() const { return q_; }
  // q^2/(1-q), or 1 without subsampling.
  double MomentFactor() const;
  // q/sqrt(1-q), or 1 without subsampling.
  double LossFactor() const;

 private:
  Amplification(double q, bool subsampled) : q_(q), subsampled_(subsampled) {}
  double q_;
  bool subsampled_;
};

// eps_bar = c0 q eps sqrt(p T / (1 - q)).
double TotalPrivacyLossClosedForm(double eps, double q, double p, double rounds,
                                  double c0 = kDefaultC0);
double TotalPrivacyLossClosedForm(double eps, const Amplification& amp, double p,
                                  double rounds, double c0 = kDefaultC0);

// Inverse of the closed form: eps = eps_bar sqrt(1-q) / (c0 q sqrt(p T)).
double PerRoundEpsilon(double eps_bar, double q, double p, double rounds,
                       double c0 = kDefaultC0);
double PerRoundEpsilon(double eps_bar, const Amplification& amp, double p,
                       double rounds, double c0 = kDefaultC0);

// alpha(tau) = (q^2/(1-q)) tau (tau+1) eps^2 / (4 ln(1.25/delta)).
double LogMoment(int tau, double q, double eps, double delta);
double LogMoment(int tau, const Amplification& amp, double eps, double delta);

// min over integer tau in [1, tau_max] of (count * alpha(tau) + ln(1/delta)) / tau.
double SpentEpsilon(double participations, const Amplification& amp, double eps,
                    double delta, double target_delta, int tau_max = kDefaultTauMax);

// One client's accountant. Composes over realized participations.
class PrivacyLedger {
 public:
  PrivacyLedger() : amp_(Amplification::None()) {}
  PrivacyLedger(Amplification amp, double eps_round, double delta);

  void RecordParticipation() { ++participation_count_; }

  std::uint64_t participation_count() const { return participation_count_; }
  const Amplification& amplification() const { return amp_; }
  double eps_round() const { return eps_round_; }
  double delta() const { return delta_; }

  // Sum of per-round log moments at order tau (linear composition).
  double TotalLogMoment(int tau) const;

  // Numeric moments-accountant epsilon at `target_delta`; 0 before any
  // participation, +inf when the round mechanism is not private.
  double SpentEpsilon(double target_delta, int tau_max = kDefaultTauMax) const;

 private:
  std::uint64_t participation_count_ = 0;
  Amplification amp_;
  double eps_round_ = std::numeric_limits<double>::infinity();
  double delta_ = 1e-4;
};

}  // namespace fedspd::privacy
