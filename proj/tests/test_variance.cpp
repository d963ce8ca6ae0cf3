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
#include "irlm/error.hpp"
#include "irlm/simulate.hpp"
#include "irlm/variance.hpp"

using namespace irlm;
using irlm::testing::scalar_affine;
using irlm::testing::scalar_atom;
namespace sim = irlm::simulate;
namespace var = irlm::variance;

namespace {

/// The i.i.d. case: xi = u(g) = +-1 and every map sends x to 0.
SystemModel iid_labels() {
  return scalar_affine({scalar_atom(0.0, 0.0, 0.5, -1.0), scalar_atom(0.0, 0.0, 0.5, 1.0)}, Observable::label());
}

var::ProductForm label_form() {
  return {[](const Map& g) { return g.label; }, [](const StatePoint&) { return 1.0; }};
}

}  // namespace

TEST_SUITE("variance") {

TEST_CASE("theta") {
  const SystemModel d = testing::doubling_ifs();
  for (double x : {0.0, 0.2, 0.9}) {
    const Estimate t = var::theta_eval(d, StatePoint(x));
    CHECK(t.exact);
    CHECK(t.value == doctest::Approx(x - 0.5).epsilon(1e-15));
  }
  const Estimate ar = var::theta_eval(testing::ar1_gaussian(), StatePoint(1.7));
  CHECK(ar.value == doctest::Approx(1.7));
  const SystemModel prod = testing::ar1_binary(Observable::label_times_state());
  CHECK(var::theta_eval(prod, StatePoint(3.0)).value == doctest::Approx(0.0));
  // Coboundary of x under a = 0.5 with centered noise: theta(x) = x - E[gx] = x / 2.
  const SystemModel cob = testing::ar1_gaussian(0.5, Observable::coboundary_of_state());
  const Estimate tc = var::theta_eval(cob, StatePoint(2.0), 200000, 3);
  CHECK(std::abs(tc.value - 1.0) <= 4.0 * tc.se + 1e-12);
}

TEST_CASE("Poisson solution at hand-solved points") {
  var::PoissonOptions o;
  o.paths = 256;
  {
    const auto s = var::solve_poisson(testing::ar1_gaussian(), {StatePoint(1.0), StatePoint(-2.0)}, o);
    CHECK(std::abs(s.w[0] - 2.0) <= s.tail_bound + 3.0 * s.w_se[0] + 1e-3);
    CHECK(std::abs(s.w[1] + 4.0) <= s.tail_bound + 3.0 * s.w_se[1] + 2e-3);
  }
  {
    const auto s = var::solve_poisson(testing::doubling_ifs(), {StatePoint(1.0), StatePoint(0.25)}, o);
    CHECK(std::abs(s.w[0] - 1.0) <= s.tail_bound + 3.0 * s.w_se[0] + 1e-3);
    CHECK(std::abs(s.w[1] + 0.5) <= s.tail_bound + 3.0 * s.w_se[1] + 1e-3);
  }
  {
    const SystemModel zero = scalar_affine({scalar_atom(0.5, 1.0, 1.0)}, Observable::zero());
    const auto s = var::solve_poisson(zero, {StatePoint(1.0), StatePoint(3.0)}, o);
    CHECK(s.w[0] == 0.0);
    CHECK(s.w[1] == 0.0);
  }
}

TEST_CASE("Poisson residual on the support") {
  const SystemModel m = testing::ar1_binary();
  const auto nu = sim::cesaro_measure(m, 64, 2, 4, 32);
  std::vector<StatePoint> pts = nu.points;
  const std::size_t k = pts.size();
  for (std::size_t i = 0; i < k; ++i)
    for (const auto& a : m.pi().atoms()) pts.push_back(m.apply(a.map, nu.points[i]));
  var::PoissonOptions o;
  o.paths = 512;
  const auto s = var::solve_poisson(m, pts, o);
  for (std::size_t i = 0; i < k; ++i) {
    double pw = 0.0, var_pw = 0.0;
    const auto& atoms = m.pi().atoms();
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      const std::size_t idx = k + i * atoms.size() + j;
      pw += atoms[j].weight * s.w[idx];
      var_pw += atoms[j].weight * atoms[j].weight * s.w_se[idx] * s.w_se[idx];
    }
    const double theta = var::theta_eval(m, nu.points[i]).value;
    const double se = std::sqrt(s.w_se[i] * s.w_se[i] + var_pw);
    CHECK(std::abs(s.w[i] - theta - pw) <= s.tail_bound + 4.0 * se + 1e-12);
  }
}

TEST_CASE("Poisson route") {
  {
    const auto nu = sim::cesaro_measure(testing::doubling_ifs(), 2048, 31, 32, 32);
    const auto v = var::sigma2_poisson(testing::doubling_ifs(), nu);
    CHECK(v.method == "poisson");
    CHECK(std::abs(v.sigma2 - 0.25) <= 3.0 * v.se + v.tail_bound);
  }
  {
    const SystemModel zero = scalar_affine({scalar_atom(0.5, 1.0, 1.0)}, Observable::zero());
    const auto nu = sim::cesaro_measure(zero, 64, 1, 2);
    CHECK(var::sigma2_poisson(zero, nu).sigma2 == 0.0);
  }
  {
    const auto nu = sim::cesaro_measure(testing::doubling_ifs(), 64, 1, 2);
    var::PoissonPlan plan = var::poisson_plan(testing::doubling_ifs(), nu, 1);
    const auto wrong = var::solve_poisson(testing::doubling_ifs(), {StatePoint(0.5)});
    CHECK_THROWS_AS(var::sigma2_poisson(testing::doubling_ifs(), plan, wrong), Error);
  }
}

TEST_CASE("batch route") {
  {
    const auto v = var::sigma2_batch(iid_labels(), sim::InitialLaw::point_mass(StatePoint(0.0)), {16, 64, 256}, 20000, 3);
    CHECK(std::abs(v.sigma2 - 1.0) <= 3.0 * v.se);
  }
  {
    const auto v = var::sigma2_batch(testing::ar1_gaussian(), sim::InitialLaw::point_mass(StatePoint(0.0)),
                                     {1024, 4096, 16384}, 16384, 4);
    CHECK(v.sigma2 == doctest::Approx(4.0).epsilon(0.05));
  }
  CHECK_THROWS_AS(var::sigma2_batch(testing::doubling_ifs(), sim::InitialLaw::point_mass(StatePoint(0.0)), {16, 64}, 100, 1),
                  Error);
}

TEST_CASE("the two routes agree on finite-support models") {
  for (const SystemModel& m : {testing::doubling_ifs(), testing::ar1_binary()}) {
    CAPTURE(m.name());
    const auto nu = sim::cesaro_measure(m, 2048, 41, 32, 32);
    const auto p = var::sigma2_poisson(m, nu);
    const auto b = var::sigma2_batch(m, sim::InitialLaw::point_mass(StatePoint(0.0)), {256, 1024, 4096}, 16384, 42);
    CHECK(std::abs(p.sigma2 - b.sigma2) <= 3.0 * (std::hypot(p.se, b.se) + p.tail_bound));
    CHECK(p.sigma2 >= 0.0);
    CHECK(b.sigma2 >= 0.0);
  }
}

TEST_CASE("telescoping observable") {
  const SystemModel cob = testing::ar1_gaussian(0.5, Observable::coboundary_of_state());
  const auto b = var::sigma2_batch(cob, sim::InitialLaw::point_mass(StatePoint(0.0)), {256, 1024, 4096}, 8192, 51);
  CHECK(b.sigma2 <= 0.01);
  const auto nu = sim::cesaro_measure(cob, 1024, 52, 8, 32);
  const auto rep = var::degeneracy_test(cob, nu, b, std::nullopt);
  CHECK(rep.verdict == var::Degeneracy::kCoboundarySuspected);
  CHECK(rep.residual_rms <= 1e-6);
  REQUIRE(rep.basis.size() == 3);
  CHECK(rep.basis[0] == "x");
  CHECK(rep.coefficients[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.coefficients[1] == doctest::Approx(0.0));
}

TEST_CASE("a coboundary of a bounded function has vanishing variance") {
  // xi = chi(x) - chi(gx) with chi = sin, injected as a custom observable.
  ObservableEnvelope env;
  env.r = 0.0;
  env.s = 0.0;
  env.R = [](const Map&) { return 2.0; };
  env.S = [](const Map& g) { return 1.0 + std::abs(g.a(0, 0)); };
  const Observable xi = Observable::custom(
      "sin-coboundary", [](const Map&, const StatePoint& x, const StatePoint& gx) { return std::sin(x[0]) - std::sin(gx[0]); },
      true);
  const SystemModel m = testing::ar1_gaussian().with_observable(xi, env);
  const auto nu = sim::cesaro_measure(m, 2048, 61, 16, 32);
  const Estimate var_chi = sim::measure_variance([&] {
    sim::EmpiricalMeasure s = nu;
    for (auto& p : s.points) p = StatePoint(std::sin(p[0]));
    return s;
  }());
  const std::size_t n_max = 1024;
  const auto b = var::sigma2_batch(m, sim::InitialLaw::point_mass(StatePoint(0.0)), {64, 256, n_max}, 4096, 62);
  CHECK(b.sigma2 <= 4.0 * var_chi.value / static_cast<double>(n_max) + 3.0 * b.se);
}

TEST_CASE("degeneracy verdicts") {
  {
    const SystemModel prod = testing::ar1_binary(Observable::label_times_state());
    const auto nu = sim::cesaro_measure(prod, 256, 71, 4);
    const var::VarianceEstimate dummy;
    var::ProductForm form{[](const Map& g) { return g.label; }, [](const StatePoint& x) { return x[0]; }};
    const auto rep = var::degeneracy_test(prod, nu, dummy, std::nullopt, form);
    CHECK(rep.verdict == var::Degeneracy::kNondegenerate);
    CHECK(rep.positivity_guaranteed);
  }
  {
    const SystemModel lab = testing::ar1_binary(Observable::label());
    const auto nu = sim::cesaro_measure(lab, 256, 72, 4);
    const auto rep = var::degeneracy_test(lab, nu, var::VarianceEstimate{}, std::nullopt, label_form());
    CHECK(rep.positivity_guaranteed);
  }
  {
    const SystemModel zero = scalar_affine({scalar_atom(0.5, 1.0, 0.5), scalar_atom(0.5, -1.0, 0.5)}, Observable::zero());
    const auto nu = sim::cesaro_measure(zero, 256, 73, 4);
    const auto b = var::sigma2_batch(zero, sim::InitialLaw::point_mass(StatePoint(0.0)), {4, 16, 64}, 256, 74);
    CHECK(b.sigma2 == 0.0);
    const auto rep = var::degeneracy_test(zero, nu, b, std::nullopt);
    CHECK(rep.verdict == var::Degeneracy::kCoboundarySuspected);
    CHECK(rep.residual_max == 0.0);
  }
}

}  // TEST_SUITE
