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

#include "irlm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "irlm/kernels.hpp"

namespace irlm::simulate {

namespace {
constexpr std::uint64_t kInitStream = 0;
constexpr std::size_t kLanes = 256;
}  // namespace

// ---------------------------------------------------------------------------
// InitialLaw

InitialLaw::InitialLaw(std::vector<StatePoint> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.empty())
    throw Error(ErrorKind::kParameter, "initial law needs at least one point");
  if (weights_.empty())
    weights_.assign(points_.size(), 1.0 / static_cast<double>(points_.size()));
  if (weights_.size() != points_.size())
    throw Error(ErrorKind::kParameter, "initial law: weights/points size mismatch");
  double total = 0.0;
  cumulative_.reserve(weights_.size());
  for (double w : weights_) {
    if (!(w >= 0.0)) throw Error(ErrorKind::kParameter, "initial law: negative weight");
    total += w;
    cumulative_.push_back(total);
  }
  if (!(total > 0.0)) throw Error(ErrorKind::kParameter, "initial law has no mass");
  for (double& c : cumulative_) c /= total;
  cumulative_.back() = 1.0;
}

InitialLaw InitialLaw::point_mass(const StatePoint& x) { return InitialLaw({x}, {1.0}); }

StatePoint InitialLaw::draw(Rng& rng) const {
  if (points_.size() == 1) return points_.front();
  const double u = uniform01(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const std::size_t k = std::min<std::size_t>(
      static_cast<std::size_t>(it - cumulative_.begin()), points_.size() - 1);
  return points_[k];
}

// ---------------------------------------------------------------------------

PathSample run_chain(const SystemModel& model, const StatePoint& z0,
                     std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::kParameter, "run_chain needs n >= 1");
  model.check_point(z0);
  Rng rng = make_rng(seed, kInitStream);
  PathSample path;
  path.seed = seed;
  path.states.reserve(n + 1);
  path.sums.reserve(n + 1);
  path.maps.reserve(n);
  path.states.push_back(z0);
  path.sums.push_back(0.0);
  const bool matrix = model.family() == Family::kPositiveMatrix;
  double cocycle_total = 0.0;
  StatePoint z = z0;
  double s = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const Map g = model.draw(rng);
    try {
      auto [next, xi] = model.step(g, z);
      s = s + xi;
      if (matrix) cocycle_total += xi + model.centering();
      z = std::move(next);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " at step " + std::to_string(k));
    }
    path.maps.push_back(g);
    path.states.push_back(z);
    path.sums.push_back(s);
  }
  if (matrix) path.cocycle_total = cocycle_total;
  return path;
}

std::vector<Terminal> sample_terminal(const SystemModel& model,
                                      const InitialLaw& init, std::size_t n,
                                      std::size_t paths, std::uint64_t seed) {
  if (paths < 1) throw Error(ErrorKind::kParameter, "sample_terminal needs paths >= 1");
  std::vector<Terminal> out(paths);
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rng rng = make_rng(seed, p);
      StatePoint z = init.draw(rng);
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        auto [next, xi] = model.step(model.draw(rng), z);
        s = s + xi;
        z = std::move(next);
      }
      out[p] = {std::move(z), s};
    }
  });
  return out;
}

std::vector<double> SumTable::column(std::size_t k) const {
  std::vector<double> c(paths);
  for (std::size_t p = 0; p < paths; ++p) c[p] = at(p, k);
  return c;
}

namespace {

void check_grid(const std::vector<std::size_t>& n_grid) {
  if (n_grid.empty()) throw Error(ErrorKind::kParameter, "n_grid is empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i)
    if (n_grid[i] < 1 || (i > 0 && n_grid[i] <= n_grid[i - 1]))
      throw Error(ErrorKind::kParameter, "n_grid must be positive and increasing");
}

void sums_generic(const SystemModel& model, const InitialLaw& init,
                  const std::vector<std::size_t>& n_grid, std::size_t begin,
                  std::size_t end, std::uint64_t seed, SumTable& table) {
  const std::size_t g = n_grid.size();
  for (std::size_t p = begin; p < end; ++p) {
    Rng rng = make_rng(seed, p);
    StatePoint z = init.draw(rng);
    double s = 0.0;
    std::size_t k = 0;
    for (std::size_t step = 1; step <= n_grid.back(); ++step) {
      auto [next, xi] = model.step(model.draw(rng), z);
      s = s + xi;
      z = std::move(next);
      if (step == n_grid[k]) table.values[p * g + k++] = s;
    }
  }
}

void sums_lockstep(const SystemModel& model, const InitialLaw& init,
                   const std::vector<std::size_t>& n_grid, std::size_t begin,
                   std::size_t end, std::uint64_t seed,
                   const kernels::LinearObservableCoeffs& coeffs, SumTable& table) {
  const std::size_t g = n_grid.size();
  const MapDistribution& pi = model.pi();
  for (std::size_t base = begin; base < end; base += kLanes) {
    const std::size_t lanes = std::min(kLanes, end - base);
    std::vector<Rng> rngs;
    rngs.reserve(lanes);
    std::vector<double> x(lanes), s(lanes, 0.0), a(lanes), b(lanes), label(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
      rngs.push_back(make_rng(seed, base + l));
      x[l] = init.draw(rngs[l])[0];
    }
    std::size_t k = 0;
    for (std::size_t step = 1; step <= n_grid.back(); ++step) {
      for (std::size_t l = 0; l < lanes; ++l) pi.draw_scalar(rngs[l], a[l], b[l], label[l]);
      kernels::affine_observe_step(x, s, a, b, label, coeffs);
      if (step == n_grid[k]) {
        for (std::size_t l = 0; l < lanes; ++l) table.values[(base + l) * g + k] = s[l];
        ++k;
      }
    }
  }
}

}  // namespace

SumTable sample_sums(const SystemModel& model, const InitialLaw& init,
                     const std::vector<std::size_t>& n_grid, std::size_t paths,
                     std::uint64_t seed, const SumOptions& options) {
  check_grid(n_grid);
  if (paths < 1) throw Error(ErrorKind::kParameter, "sample_sums needs paths >= 1");
  for (const auto& z : init.points()) model.check_point(z);
  SumTable table;
  table.n_grid = n_grid;
  table.paths = paths;
  table.values.assign(paths * n_grid.size(), 0.0);
  const auto coeffs = options.allow_lockstep ? model.lockstep_coeffs() : std::nullopt;
  // Chunk on lane-block boundaries so the split does not depend on threads.
  const std::size_t blocks = (paths + kLanes - 1) / kLanes;
  parallel_for(
      blocks,
      [&](std::size_t b0, std::size_t b1) {
        const std::size_t begin = b0 * kLanes;
        const std::size_t end = std::min(paths, b1 * kLanes);
        if (coeffs)
          sums_lockstep(model, init, n_grid, begin, end, seed, *coeffs, table);
        else
          sums_generic(model, init, n_grid, begin, end, seed, table);
      },
      options.threads);
  return table;
}

// ---------------------------------------------------------------------------

EmpiricalMeasure cesaro_measure(const SystemModel& model, std::size_t n,
                                std::uint64_t seed, std::size_t reps,
                                std::size_t burn_in, std::optional<StatePoint> z0) {
  if (n < 1 || reps < 1)
    throw Error(ErrorKind::kParameter, "cesaro_measure needs n >= 1 and reps >= 1");
  const StatePoint start = z0.value_or(model.x0());
  model.check_point(start);
  EmpiricalMeasure nu;
  nu.points.resize(n * reps);
  nu.weights.assign(n * reps, 1.0 / static_cast<double>(n * reps));
  nu.n_used = n * reps;
  nu.chains = reps;
  nu.origin = burn_in > 0 ? "longrun" : "cesaro";
  parallel_for(reps, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng = make_rng(seed, r);
      StatePoint z = start;
      for (std::size_t k = 0; k < burn_in; ++k) z = model.apply(model.draw(rng), z);
      for (std::size_t k = 0; k < n; ++k) {
        nu.points[r * n + k] = z;
        z = model.apply(model.draw(rng), z);
      }
    }
  });
  return nu;
}

Estimate measure_expectation(const EmpiricalMeasure& nu,
                             const std::function<double(const StatePoint&)>& f) {
  if (nu.points.empty()) throw Error(ErrorKind::kParameter, "empty measure");
  double total = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < nu.points.size(); ++i) {
    total += nu.weights[i] * f(nu.points[i]);
    wsum += nu.weights[i];
  }
  Estimate e;
  e.value = total / wsum;
  e.count = nu.points.size();
  // Between-chain spread; a single chain falls back to batch means.
  std::vector<double> series;
  const std::size_t chains = std::max<std::size_t>(1, nu.chains);
  const std::size_t len = nu.points.size() / chains;
  if (chains >= 2 && len > 0) {
    for (std::size_t c = 0; c < chains; ++c) {
      double m = 0.0;
      for (std::size_t i = 0; i < len; ++i) m += f(nu.points[c * len + i]);
      series.push_back(m / static_cast<double>(len));
    }
    e.se = mean_estimate(series).se;
  } else {
    for (const auto& p : nu.points) series.push_back(f(p));
    e.se = batch_means(series).se;
  }
  return e;
}

Estimate measure_mean(const EmpiricalMeasure& nu, int coord) {
  return measure_expectation(nu, [coord](const StatePoint& x) { return x[coord]; });
}

Estimate measure_variance(const EmpiricalMeasure& nu, int coord) {
  const double mean = measure_mean(nu, coord).value;
  return measure_expectation(
      nu, [coord, mean](const StatePoint& x) { return (x[coord] - mean) * (x[coord] - mean); });
}

// ---------------------------------------------------------------------------

double wasserstein1(std::span<const double> a, std::span<const double> wa,
                    std::span<const double> b, std::span<const double> wb) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::kParameter, "W1 of an empty sample");
  auto order = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    return idx;
  };
  const auto ia = order(a), ib = order(b);
  const double ta = std::accumulate(wa.begin(), wa.end(), 0.0);
  const double tb = std::accumulate(wb.begin(), wb.end(), 0.0);
  // Integrate |F_a - F_b| between consecutive breakpoints of the merge.
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, prev = std::min(a[ia[0]], b[ib[0]]), total = 0.0;
  while (i < ia.size() || j < ib.size()) {
    const bool take_a = j >= ib.size() || (i < ia.size() && a[ia[i]] <= b[ib[j]]);
    const double x = take_a ? a[ia[i]] : b[ib[j]];
    total += std::abs(fa - fb) * (x - prev);
    prev = x;
    if (take_a) fa += wa[ia[i++]] / ta;
    else fb += wb[ib[j++]] / tb;
  }
  return total;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  const std::vector<double> wa(a.size(), 1.0), wb(b.size(), 1.0);
  return wasserstein1(a, wa, b, wb);
}

DecayReport ergodicity_decay(const SystemModel& model, const InitialLaw& mu0,
                             const EmpiricalMeasure& nu_hat, std::size_t horizon,
                             std::size_t paths, std::uint64_t seed,
                             std::optional<double> kappa0) {
  if (nu_hat.points.empty()) throw Error(ErrorKind::kParameter, "empty invariant-measure estimate");
  if (paths < 1) throw Error(ErrorKind::kParameter, "ergodicity_decay needs paths >= 1");
  const int dim = model.dim();
  DecayReport report;
  // Projection directions: the coordinate itself in 1-D, 20 random unit
  // vectors otherwise (W1 then is a lower bound).
  std::vector<VecQ> dirs;
  if (dim == 1) {
    dirs.push_back(VecQ::Ones(1));
  } else {
    report.projected = true;
    Rng rng = make_rng(seed, 0xd1ec);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 20; ++k) {
      VecQ v(dim);
      for (int i = 0; i < dim; ++i) v[i] = normal(rng);
      dirs.push_back(v / v.norm());
    }
  }
  const std::size_t nd = dirs.size();
  auto project = [&](const StatePoint& x, std::size_t d) { return dirs[d].dot(x.coords); };

  std::vector<std::vector<double>> nu_proj(nd);
  for (std::size_t d = 0; d < nd; ++d)
    for (const auto& p : nu_hat.points) nu_proj[d].push_back(project(p, d));

  // proj[(n * nd + d) * paths + p]
  std::vector<double> proj((horizon + 1) * nd * paths);
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rng rng = make_rng(seed, p + 1);
      StatePoint z = mu0.draw(rng);
      for (std::size_t n = 0; n <= horizon; ++n) {
        for (std::size_t d = 0; d < nd; ++d) proj[(n * nd + d) * paths + p] = project(z, d);
        if (n < horizon) z = model.apply(model.draw(rng), z);
      }
    }
  });

  auto w1_to_nu = [&](auto&& column_of) {
    double best = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      const std::vector<double> sample = column_of(d);
      best = std::max(best, wasserstein1(sample, std::vector<double>(sample.size(), 1.0),
                                         nu_proj[d], nu_hat.weights));
    }
    return best;
  };

  // Noise floor: a bootstrap resample of nu_hat of the same size.
  {
    const InitialLaw law = nu_hat.as_law();
    Rng rng = make_rng(seed, 0xf1002);
    std::vector<StatePoint> boot;
    boot.reserve(paths);
    for (std::size_t p = 0; p < paths; ++p) boot.push_back(law.draw(rng));
    report.noise_floor = w1_to_nu([&](std::size_t d) {
      std::vector<double> v;
      for (const auto& x : boot) v.push_back(project(x, d));
      return v;
    });
  }

  for (std::size_t n = 0; n <= horizon; ++n) {
    const double w1 = w1_to_nu([&](std::size_t d) {
      const auto* first = proj.data() + (n * nd + d) * paths;
      return std::vector<double>(first, first + paths);
    });
    report.table.push_back({n, w1});
  }

  // Fit the leading run above the floor; later excursions reflect the
  // error of nu_hat itself.
  std::vector<double> xs, ys;
  for (const auto& pt : report.table) {
    if (pt.n == 0) continue;
    if (!(pt.w1 > 3.0 * report.noise_floor)) break;
    xs.push_back(static_cast<double>(pt.n));
    ys.push_back(std::log(pt.w1));
  }
  report.fitted_points = xs.size();
  if (xs.size() >= 2) report.slope = fit_line(xs, ys).slope;
  if (kappa0 && *kappa0 > 0.0 && *kappa0 < 1.0) report.reference_slope = 0.5 * std::log(*kappa0);
  return report;
}

Estimate estimate_drift(const SystemModel& model, std::size_t n, std::size_t paths,
                        std::uint64_t seed, std::size_t burn_in) {
  if (n < 1 || paths < 1)
    throw Error(ErrorKind::kParameter, "estimate_drift needs n >= 1 and paths >= 1");
  std::vector<double> chain_means(paths);
  std::vector<double> single_chain;
  if (paths == 1) single_chain.resize(n);
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rng rng = make_rng(seed, p);
      StatePoint z = model.x0();
      for (std::size_t k = 0; k < burn_in; ++k) z = model.apply(model.draw(rng), z);
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const Map g = model.draw(rng);
        auto [next, xi] = model.step(g, z);
        const double raw = xi + model.centering();
        total += raw;
        if (paths == 1) single_chain[k] = raw;
        z = std::move(next);
      }
      chain_means[p] = total / static_cast<double>(n);
    }
  });
  if (paths == 1) {
    Estimate e = batch_means(single_chain);
    e.value = chain_means[0];
    return e;
  }
  Estimate e = mean_estimate(chain_means);
  e.count = n * paths;
  return e;
}

std::size_t default_burn_in(double kappa0) {
  if (!(kappa0 > 0.0 && kappa0 < 1.0))
    throw Error(ErrorKind::kParameter, "kappa0 must lie in (0, 1)");
  return static_cast<std::size_t>(std::ceil(10.0 / -std::log(kappa0)));
}

}  // namespace irlm::simulate
