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

// Trajectories, partial sums S_n, Cesàro occupation measures, convergence
// of the time-n marginals and the long-run drift of the observable.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irlm/core.hpp"
#include "irlm/stats.hpp"

namespace irlm::simulate {

/// One trajectory Z_0..Z_n with partial sums S_0 = 0, ..., S_n and the maps
/// Y_1..Y_n that generated it.
struct PathSample {
  std::vector<StatePoint> states;
  std::vector<double> sums;
  std::vector<Map> maps;
  std::uint64_t seed = 0;
  /// Matrix models: sum of the uncentered cocycle increments, ln ||R_n y||.
  std::optional<double> cocycle_total;
};

/// A discrete law on the state space (point mass, empirical measure).
class InitialLaw {
 public:
  InitialLaw() = default;
  InitialLaw(std::vector<StatePoint> points, std::vector<double> weights);

  static InitialLaw point_mass(const StatePoint& x);

  const std::vector<StatePoint>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  bool is_point_mass() const { return points_.size() == 1; }

  /// Consumes no randomness for a point mass.
  StatePoint draw(Rng& rng) const;

 private:
  std::vector<StatePoint> points_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// Weighted point set approximating the invariant law nu. `chains`
/// contiguous blocks of equal length come from independent chains and feed
/// the standard errors.
struct EmpiricalMeasure {
  std::vector<StatePoint> points;
  std::vector<double> weights;
  std::size_t n_used = 0;
  std::size_t chains = 1;
  std::string origin = "cesaro";

  InitialLaw as_law() const { return InitialLaw{points, weights}; }
};

PathSample run_chain(const SystemModel& model, const StatePoint& z0,
                     std::size_t n, std::uint64_t seed);

struct Terminal {
  StatePoint z;
  double s = 0.0;
};

/// i.i.d. terminal pairs (Z_n, S_n); path p uses seed stream p.
std::vector<Terminal> sample_terminal(const SystemModel& model,
                                      const InitialLaw& init, std::size_t n,
                                      std::size_t paths, std::uint64_t seed);

/// S_n for every n in `n_grid` (increasing) on `paths` independent paths,
/// stored path-major: values[p * n_grid.size() + k].
struct SumTable {
  std::vector<std::size_t> n_grid;
  std::size_t paths = 0;
  std::vector<double> values;

  double at(std::size_t path, std::size_t k) const {
    return values[path * n_grid.size() + k];
  }
  std::vector<double> column(std::size_t k) const;
};

struct SumOptions {
  /// Route scalar affine chains with linear observables through the SIMD
  /// lockstep kernel. The generic path produces identical values.
  bool allow_lockstep = true;
  unsigned threads = 0;
};

SumTable sample_sums(const SystemModel& model, const InitialLaw& init,
                     const std::vector<std::size_t>& n_grid, std::size_t paths,
                     std::uint64_t seed, const SumOptions& options = {});

/// Pooled occupation measure of `reps` chains of n states started at
/// `z0` (x0 when empty) after `burn_in` discarded steps; uniform weights.
EmpiricalMeasure cesaro_measure(const SystemModel& model, std::size_t n,
                                std::uint64_t seed, std::size_t reps,
                                std::size_t burn_in = 0,
                                std::optional<StatePoint> z0 = {});

/// nu(f) with a standard error from the between-chain spread.
Estimate measure_expectation(const EmpiricalMeasure& nu,
                             const std::function<double(const StatePoint&)>& f);
Estimate measure_mean(const EmpiricalMeasure& nu, int coord = 0);
Estimate measure_variance(const EmpiricalMeasure& nu, int coord = 0);

/// Exact W1 between two weighted samples on the line.
double wasserstein1(std::span<const double> a, std::span<const double> wa,
                    std::span<const double> b, std::span<const double> wb);
/// Unweighted convenience overload.
double wasserstein1(std::span<const double> a, std::span<const double> b);

struct DecayPoint {
  std::size_t n = 0;
  double w1 = 0.0;
};

struct DecayReport {
  std::vector<DecayPoint> table;
  double noise_floor = 0.0;       // W1 of a bootstrap resample of nu_hat
  double slope = std::nan("");    // fitted d log W1 / dn
  std::size_t fitted_points = 0;
  std::optional<double> reference_slope;  // (1/2) ln kappa0
  bool projected = false;         // true when W1 is a projection lower bound
};

/// Empirical W1 between the time-n marginal from `mu0` and `nu_hat` for
/// n = 0..horizon; log-linear slope fitted over the leading run of points
/// above 3x the noise floor.
DecayReport ergodicity_decay(const SystemModel& model, const InitialLaw& mu0,
                             const EmpiricalMeasure& nu_hat, std::size_t horizon,
                             std::size_t paths, std::uint64_t seed,
                             std::optional<double> kappa0 = {});

/// Long-run mean of the uncentered increments xi(Y_k, Z_{k-1}) after
/// burn-in, from `paths` chains of n steps each started at x0.
Estimate estimate_drift(const SystemModel& model, std::size_t n,
                        std::size_t paths, std::uint64_t seed,
                        std::size_t burn_in = 0);

/// ceil(10 / -ln kappa0), the default burn-in.
std::size_t default_burn_in(double kappa0);

}  // namespace irlm::simulate
