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

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "irlm/simulate.hpp"
#include "irlm/stats.hpp"

using namespace irlm;
using irlm::testing::scalar_affine;
using irlm::testing::scalar_atom;
namespace sim = irlm::simulate;

namespace {

double sample_variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("a deterministic halving chain") {
  const SystemModel m = scalar_affine({scalar_atom(0.5, 0.0, 1.0)}, Observable::state());
  const auto p = sim::run_chain(m, StatePoint(1.0), 3, 5);
  REQUIRE(p.states.size() == 4);
  CHECK(p.states[0][0] == 1.0);
  CHECK(p.states[1][0] == 0.5);
  CHECK(p.states[2][0] == 0.25);
  CHECK(p.states[3][0] == 0.125);
  CHECK(p.sums.back() == 1.75);
  const auto terms = sim::sample_terminal(m, sim::InitialLaw::point_mass(StatePoint(1.0)), 3, 50, 9);
  for (const auto& t : terms) {
    CHECK(t.z[0] == 0.125);
    CHECK(t.s == 1.75);
  }
}

TEST_CASE("paths are reproducible and replay their increments") {
  const SystemModel m = testing::ar1_gaussian();
  const auto a = sim::run_chain(m, StatePoint(0.3), 200, 77);
  const auto b = sim::run_chain(m, StatePoint(0.3), 200, 77);
  CHECK(a.sums == b.sums);
  for (std::size_t k = 0; k < a.states.size(); ++k) CHECK(a.states[k] == b.states[k]);
  for (std::size_t k = 1; k < a.states.size(); ++k) {
    CHECK(std::abs((a.sums[k] - a.sums[k - 1]) - m.xi(a.maps[k - 1], a.states[k - 1])) <= 1e-12);
    CHECK(a.states[k] == m.apply(a.maps[k - 1], a.states[k - 1]));
  }
}

TEST_CASE("lockstep kernel, generic path and thread count give identical sums") {
  for (const SystemModel& m : {testing::ar1_gaussian(), testing::doubling_ifs(),
                               testing::ar1_binary(Observable::linear(0.1, 0.5, -0.25, 1.0))}) {
    CAPTURE(m.name());
    REQUIRE(m.lockstep_coeffs().has_value());
    const std::vector<std::size_t> grid = {1, 7, 64};
    const auto init = sim::InitialLaw::point_mass(StatePoint(0.2));
    sim::SumOptions fast, slow, one;
    slow.allow_lockstep = false;
    one.threads = 1;
    fast.threads = 3;
    const auto a = sim::sample_sums(m, init, grid, 203, 5, fast);
    const auto b = sim::sample_sums(m, init, grid, 203, 5, slow);
    const auto c = sim::sample_sums(m, init, grid, 203, 5, one);
    CHECK(a.values == b.values);
    CHECK(a.values == c.values);
  }
}

TEST_CASE("long-run variance of S_n / sqrt n") {
  const std::size_t n = 10000, paths = 10000;
  {
    const auto t = sim::sample_sums(testing::ar1_gaussian(), sim::InitialLaw::point_mass(StatePoint(0.0)), {n}, paths, 21);
    std::vector<double> z = t.column(0);
    for (auto& x : z) x /= std::sqrt(static_cast<double>(n));
    CHECK(sample_variance(z) == doctest::Approx(4.0).epsilon(0.05));
  }
  {
    const auto t = sim::sample_sums(testing::doubling_ifs(), sim::InitialLaw::point_mass(StatePoint(0.0)), {n}, paths, 22);
    std::vector<double> z = t.column(0);
    for (auto& x : z) x /= std::sqrt(static_cast<double>(n));
    CHECK(sample_variance(z) == doctest::Approx(0.25).epsilon(0.05));
  }
}

TEST_CASE("occupation measure of the doubling IFS is uniform") {
  const SystemModel m = testing::doubling_ifs();
  const auto nu = sim::cesaro_measure(m, 4096, 3, 32, 64);
  CHECK(nu.points.size() == 4096 * 32);
  const Estimate mean = sim::measure_mean(nu);
  CHECK(std::abs(mean.value - 0.5) <= 3.0 * mean.se);
  // nu(f) = (nu(f(x/2)) + nu(f((x+1)/2))) / 2 on polynomials.
  for (int k = 1; k <= 4; ++k) {
    const Estimate gap = sim::measure_expectation(nu, [k](const StatePoint& x) {
      const double v = x[0];
      return std::pow(v, k) - 0.5 * std::pow(v / 2.0, k) - 0.5 * std::pow((v + 1.0) / 2.0, k);
    });
    CHECK(std::abs(gap.value) <= 3.0 * gap.se + 1e-12);
  }
}

TEST_CASE("stationary variance of AR(1)") {
  const auto nu = sim::cesaro_measure(testing::ar1_gaussian(), 4096, 4, 32, 64);
  const Estimate v = sim::measure_variance(nu);
  CHECK(std::abs(v.value - 4.0 / 3.0) <= 3.0 * v.se);
}

TEST_CASE("Cesaro invariance under one step of P") {
  const SystemModel m = testing::ar1_binary();
  const auto nu = sim::cesaro_measure(m, 2048, 6, 32, 32);
  Rng rng = make_rng(1234, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const double w = 0.2 + 2.0 * uniform01(rng), ph = 6.0 * uniform01(rng);
    auto f = [w, ph](double x) { return std::sin(w * x + ph); };
    const Estimate gap = sim::measure_expectation(nu, [&](const StatePoint& x) {
      double pf = 0.0;
      for (const auto& a : m.pi().atoms()) pf += a.weight * f(m.apply(a.map, x)[0]);
      return f(x[0]) - pf;
    });
    CHECK(std::abs(gap.value) <= 3.0 * gap.se + 1e-12);
  }
}

TEST_CASE("a deterministic contraction concentrates at its fixed point") {
  const SystemModel m = scalar_affine({scalar_atom(0.5, 1.0, 1.0)}, Observable::state());
  const auto nu = sim::cesaro_measure(m, 1000, 1, 4, 60, StatePoint(40.0));
  std::size_t close = 0;
  for (const auto& p : nu.points) close += std::abs(p[0] - 2.0) < 1e-9;
  CHECK(close >= nu.points.size() * 9 / 10);
}

TEST_CASE("exact one-dimensional W1") {
  Rng rng = make_rng(9, 0);
  std::normal_distribution<double> normal;
  std::vector<double> a(500), b(500);
  for (auto& x : a) x = normal(rng);
  for (auto& x : b) x = 0.3 + 2.0 * normal(rng);
  CHECK(sim::wasserstein1(a, b) == doctest::Approx(testing::w1_sorted(a, b)).epsilon(1e-12));
  const std::vector<double> p = {0.0}, q = {1.0, 3.0}, wp = {1.0}, wq = {0.25, 0.75};
  CHECK(sim::wasserstein1(p, wp, q, wq) == doctest::Approx(2.5));
}

TEST_CASE("ergodicity decay") {
  const SystemModel half = scalar_affine({scalar_atom(0.5, 0.0, 1.0)}, Observable::state());
  sim::EmpiricalMeasure delta0;
  delta0.points = {StatePoint(0.0)};
  delta0.weights = {1.0};
  const auto d = sim::ergodicity_decay(half, sim::InitialLaw::point_mass(StatePoint(1.0)), delta0, 10, 16, 1);
  for (const auto& p : d.table) CHECK(p.w1 == std::ldexp(1.0, -static_cast<int>(p.n)));

  const SystemModel ar = testing::ar1_gaussian();
  const auto nu = sim::cesaro_measure(ar, 4096, 12, 32, 64);
  const auto self = sim::ergodicity_decay(ar, nu.as_law(), nu, 8, 4000, 13);
  for (const auto& p : self.table) CHECK(p.w1 <= 4.0 * self.noise_floor);

  const auto from5 = sim::ergodicity_decay(ar, sim::InitialLaw::point_mass(StatePoint(5.0)), nu, 30, 10000, 14);
  CHECK(from5.fitted_points >= 3);
  CHECK(from5.slope <= std::log(0.5) + 0.15);
}

TEST_CASE("long-run drift") {
  const auto id = sim::estimate_drift(testing::matrix_model({MatQ::Identity(2, 2)}, 0.0), 256, 4, 1);
  CHECK(id.value == doctest::Approx(0.0));
  const auto g = sim::estimate_drift(testing::matrix_model({testing::mat2(2, 1, 1, 2)}, 0.0), 256, 4, 1);
  CHECK(g.value == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  const auto dbl = sim::estimate_drift(testing::doubling_ifs(), 4096, 32, 3, 32);
  CHECK(std::abs(dbl.value) <= 3.0 * dbl.se);
}

TEST_CASE("default burn-in") {
  CHECK(sim::default_burn_in(0.5) == static_cast<std::size_t>(std::ceil(10.0 / std::log(2.0))));
}

}  // TEST_SUITE
