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

// The asymptotic variance sigma^2 by two independent routes: extrapolation
// of n^-1 E[S_n^2] and the Poisson-equation formula
//   sigma^2 = E_{x~nu, g~pi}[xi(g,x) (xi(g,x) + 2 w(gx))],  (1 - P) w = theta,
// plus a check for the degenerate (coboundary) case.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "irlm/core.hpp"
#include "irlm/simulate.hpp"
#include "irlm/stats.hpp"

namespace irlm::variance {

/// theta(x) = E_pi[xi(g, x)] for the centered observable. Exact over a
/// finite support, otherwise a Monte Carlo mean of `nsamples` draws.
Estimate theta_eval(const SystemModel& model, const StatePoint& x,
                    std::size_t nsamples = 4096, std::uint64_t seed = 1);

/// Where w is needed: the support of nu_hat and one-step images of it.
/// Finite supports pair every point with every atom; generative laws pair
/// each point with one sampled map.
struct PoissonPlan {
  std::vector<StatePoint> support;
  std::vector<double> support_weight;
  std::vector<std::size_t> chain_of;  // chain index of each support point
  std::size_t chains = 1;
  // One entry per (point, map) pair.
  std::vector<std::size_t> pair_point;
  std::vector<double> pair_weight;    // nu_hat weight times pi weight
  std::vector<double> pair_xi;        // xi(g, x), recentered on the pairs
  std::vector<StatePoint> images;     // g x
  double recentering = 0.0;           // mean of xi over the pairs
  bool exact_pi = false;

  /// support points followed by images.
  std::vector<StatePoint> eval_points() const;
};

PoissonPlan poisson_plan(const SystemModel& model, const simulate::EmpiricalMeasure& nu_hat,
                         std::uint64_t seed);

struct PoissonOptions {
  std::size_t paths = 64;
  std::size_t max_terms = 200;      // cap on the truncation N
  std::size_t pilot_points = 32;
  double tail_ratio = 1e-4;         // stop when tail < ratio * partial sum
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct PoissonSolution {
  std::vector<StatePoint> points;
  std::vector<double> w;            // mean over paths
  std::vector<double> w_se;
  std::vector<double> path_w;       // per-path values, points x paths
  std::size_t paths = 0;
  std::size_t truncation = 0;       // N: terms n = 0..N summed
  double tail_bound = 0.0;
  double decay_rate = 0.0;          // fitted kappa of |P^n theta|
  double decay_scale = 0.0;         // fitted C
  double theta_shift = 0.0;         // constant removed from theta
};

/// w(x) = sum_{n=0}^N E[theta(R_n x)], one common set of map sequences for
/// every point (common random numbers across points and across n).
/// `theta_shift` is subtracted from theta (the pair mean of xi in a plan).
PoissonSolution solve_poisson(const SystemModel& model, const std::vector<StatePoint>& points,
                              const PoissonOptions& options = {}, double theta_shift = 0.0);

struct VarianceDiagnostics {
  std::vector<std::size_t> n_grid;
  std::vector<Estimate> per_n;      // n^-1 mean(S_n^2)
  std::vector<double> mean_sum;     // mean(S_n)
  double slope = 0.0;               // b in a + b / n
  std::size_t truncation = 0;
  double decay_rate = 0.0;
  std::size_t eval_points = 0;
  std::size_t pairs = 0;
  double recentering = 0.0;
  double residual_max = 0.0;        // max |w - theta - P w| on the support
  bool residual_exact = false;      // true when P w is an exact average
  double se_nu = 0.0;               // spread from the nu_hat chains
  double se_paths = 0.0;            // spread from the Poisson paths
};

struct VarianceEstimate {
  double sigma2 = 0.0;
  double raw = 0.0;
  double se = 0.0;
  std::string method;               // "batch" or "poisson"
  double tail_bound = 0.0;
  bool clamped = false;
  VarianceDiagnostics diagnostics;
};

/// Poisson route. Throws kDependency when `solution` does not cover the
/// plan's points and kNumerical when the raw value is below -3 se.
VarianceEstimate sigma2_poisson(const SystemModel& model, const PoissonPlan& plan,
                                const PoissonSolution& solution);

/// Convenience: plan, solve and evaluate.
VarianceEstimate sigma2_poisson(const SystemModel& model, const simulate::EmpiricalMeasure& nu_hat,
                                const PoissonOptions& options = {});

/// Batch route: fits n^-1 mean(S_n^2) = a + b / n over `n_grid` (at least
/// three increasing counts) and reports a.
VarianceEstimate sigma2_batch(const SystemModel& model, const simulate::InitialLaw& init,
                              const std::vector<std::size_t>& n_grid, std::size_t paths,
                              std::uint64_t seed, const simulate::SumOptions& options = {});

enum class Degeneracy { kNondegenerate, kCoboundarySuspected, kInconclusive };
const char* to_string(Degeneracy d);

/// xi(g, x) = u(g) chi(x).
struct ProductForm {
  std::function<double(const Map&)> u;
  std::function<double(const StatePoint&)> chi;
};

struct DegeneracyOptions {
  double zero_tolerance = 0.01;     // sigma^2 below max(this, 3 se) is suspect
  int max_degree = 3;
  std::size_t nsamples = 4096;      // draws for pi(u) on generative laws
  std::uint64_t seed = 1;
};

struct DegeneracyReport {
  Degeneracy verdict = Degeneracy::kInconclusive;
  std::string reason;
  bool positivity_guaranteed = false;
  std::optional<Estimate> u_mean;
  // Coboundary fit xi(g,x) ~ h(x) - h(gx) with h polynomial.
  bool fitted = false;
  double residual_rms = 0.0;
  double residual_max = 0.0;
  std::vector<std::string> basis;
  std::vector<double> coefficients;
};

DegeneracyReport degeneracy_test(const SystemModel& model, const simulate::EmpiricalMeasure& nu_hat,
                                 const VarianceEstimate& batch,
                                 const std::optional<VarianceEstimate>& poisson,
                                 const std::optional<ProductForm>& product_form = {},
                                 const DegeneracyOptions& options = {});

}  // namespace irlm::variance
