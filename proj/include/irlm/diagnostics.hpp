// Copyright 2026 The irlm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Estimates of the moment integrals M_eta, M'_eta and the contraction
// integrals C_eta^(n) of the map law, and verdicts on the hypotheses built
// from them.
//
// Finite-support laws are handled by exact weighted sums (se = 0; the
// n-fold convolution is enumerated up to `enumeration_cap` products).
// Generative laws use Monte Carlo with standard errors. A finite integral
// cannot be decided by sampling; the surrogate used here declares it
// finite when the running mean is stable across ten logarithmic
// checkpoints and the largest 0.1% of samples do not dominate the sum.
// The built-in noise laws have Gaussian tails, so for them every moment is
// finite by construction and the surrogate is reported alongside.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "irlm/core.hpp"
#include "irlm/stats.hpp"

namespace irlm::diagnostics {

enum class Verdict { kHolds, kFails, kInconclusive };
const char* to_string(Verdict v);

struct Options {
  std::size_t nsamples = 20000;
  std::uint64_t seed = 1;
  double confidence = 2.0;             // multiplier on the standard error
  std::size_t enumeration_cap = 65536; // largest k^n enumerated exactly
  double stability_tolerance = 0.10;   // relative spread of running means
  double tail_share_cap = 0.5;         // max share of the top 0.1% samples
};

/// Estimate plus the finiteness verdict of the integral it approximates.
struct IntegralEstimate {
  Estimate estimate;
  Verdict finite = Verdict::kInconclusive;
  std::string basis;                         // exact, gaussian-tails or empirical
  Verdict empirical = Verdict::kInconclusive;  // running-mean / tail-share surrogate
  double running_mean_spread = 0.0;
  double tail_share = 0.0;
};

/// pi(delta_tilde^eta), eta >= 1.
IntegralEstimate moment_M(const SystemModel& model, double eta, const Options& options = {});
/// pi(c delta_tilde^(eta - 1)), eta >= 1.
IntegralEstimate moment_Mprime(const SystemModel& model, double eta, const Options& options = {});
/// E[c(R_n) max{c(R_n), 1}^(eta - 1)], n >= 1.
Estimate contraction_C(const SystemModel& model, double eta, std::size_t n,
                       const Options& options = {});

struct ThresholdCheck {
  std::string claim;  // "A", "B", "C", "S"
  double threshold = 0.0;
  bool cleared = false;
};

/// gamma0 thresholds in terms of the envelope exponents r, s:
/// A/C: r + max{r, s+1}; B: 3r + max{r, s+1}; S: 2r + s + 1.
std::vector<ThresholdCheck> moment_thresholds(double gamma0, double r, double s);

struct MomentReport {
  double gamma0 = 0.0;
  std::size_t n0max = 0;
  double eta_M = 0.0;       // gamma0 + 1
  double eta_Mprime = 0.0;  // 2 gamma0 + 1
  IntegralEstimate M;
  IntegralEstimate Mprime;
  std::map<std::size_t, Estimate> C;  // n -> C^(n)_{2 gamma0 + 1}
  Verdict M_verdict = Verdict::kInconclusive;
  Verdict Mprime_verdict = Verdict::kInconclusive;
  Verdict C_verdict = Verdict::kInconclusive;
  Verdict H_verdict = Verdict::kInconclusive;
  std::optional<std::size_t> n0;
  std::optional<Estimate> C1_at_n0;  // C^(n0)_1
  std::vector<ThresholdCheck> thresholds;
  bool exact_lipschitz = true;
};

MomentReport check_H(const SystemModel& model, double gamma0, std::size_t n0max,
                     const Options& options = {});

/// kappa0 = (C^(n0)_1)^(1/n0), the geometric ergodicity rate.
double kappa0(const MomentReport& report);

struct LambdaGridPoint {
  double lambda = 0.0;
  Estimate theta;
};

struct Lambda0Result {
  double lambda0 = 0.0;
  Estimate theta0;
  std::vector<LambdaGridPoint> grid;
};

/// Largest lambda on {1, 1/2, ..., 2^-20} with
/// theta(lambda) = E[c(R_n0) (max{c,1} + lambda d(R_n0 x0, x0))^(2 gamma0)]
/// satisfying theta + confidence * se < 1. Throws kHypothesis otherwise.
Lambda0Result find_lambda0(const SystemModel& model, double gamma0, std::size_t n0,
                           const Options& options = {});

}  // namespace irlm::diagnostics
