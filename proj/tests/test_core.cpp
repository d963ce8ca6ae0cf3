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

using namespace irlm;
using irlm::testing::scalar_affine;
using irlm::testing::scalar_atom;

namespace {

Map scalar_map(double a, double b) {
  Map g;
  g.a = MatQ::Constant(1, 1, a);
  g.b = VecQ::Constant(1, b);
  return g;
}

MapSample sample_of(double lip, double disp) {
  MapSample s;
  s.lip = lip;
  s.disp = disp;
  return s;
}

std::vector<SystemModel> property_models() {
  std::vector<SystemModel> out;
  out.push_back(testing::doubling_ifs());
  out.push_back(testing::ar1_gaussian());
  out.push_back(testing::ar1_binary(Observable::label_times_state(0, 0.0)));
  out.push_back(testing::ar1_binary(Observable::linear(0.2, 1.0, -0.5, 1.0)));
  {
    models::AffineSpec spec;
    spec.dim = 2;
    spec.alpha = 0.5;
    models::AffineAtom a1, a2;
    a1.a = MatQ(2, 2);
    a1.a << 0.5, 0.2, -0.1, 0.4;
    a1.b = VecQ(2);
    a1.b << 1.0, 0.0;
    a1.weight = 0.5;
    a2.a = MatQ(2, 2);
    a2.a << -0.3, 0.0, 0.6, 0.2;
    a2.b = VecQ(2);
    a2.b << 0.0, -1.0;
    a2.weight = 0.5;
    spec.atoms = {a1, a2};
    out.push_back(models::make_affine(spec, Observable::state(1, 0.0)));
  }
  {
    models::FunctionalARSpec spec;
    spec.f = models::named_function("tanh", 0.8);
    spec.f_lip = 0.8;
    spec.translations = {scalar_atom(1.0, -1.0, 0.5), scalar_atom(1.0, 1.0, 0.5)};
    out.push_back(models::make_functional_ar(spec, Observable::state()));
  }
  out.push_back(testing::matrix_model({testing::mat2(2, 1, 1, 2), testing::mat2(1, 3, 1, 1)}, 0.0));
  return out;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("maps act on points") {
  const SystemModel half = scalar_affine({scalar_atom(0.5, 0.0, 1.0)}, Observable::state());
  CHECK(half.apply(scalar_map(0.5, 0.0), StatePoint(1.0))[0] == 0.5);
  CHECK(half.apply(scalar_map(0.5, 1.0), StatePoint(2.0))[0] == 2.0);

  const SystemModel mm = testing::matrix_model({testing::mat2(2, 1, 1, 2)}, 0.0);
  Map g;
  g.a = testing::mat2(2, 1, 1, 2);
  const StatePoint y = mm.apply(g, StatePoint{0.5, 0.5});
  CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("observable evaluation") {
  const SystemModel m = scalar_affine({scalar_atom(0.5, 0.0, 1.0)}, Observable::state());
  CHECK(m.xi(scalar_map(0.5, 0.0), StatePoint(0.25)) == 0.25);

  const SystemModel id = testing::matrix_model({MatQ::Identity(2, 2)}, 0.0);
  Map i2;
  i2.a = MatQ::Identity(2, 2);
  CHECK(id.xi(i2, StatePoint{0.3, 0.7}) == doctest::Approx(0.0));

  const SystemModel mm = testing::matrix_model({testing::mat2(2, 1, 1, 2)}, 0.0);
  Map g;
  g.a = testing::mat2(2, 1, 1, 2);
  CHECK(mm.xi(g, StatePoint{0.5, 0.5}) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("centering subtracts m from every value") {
  const SystemModel m = testing::ar1_gaussian().with_centering(0.75, "config");
  CHECK(m.centering() == 0.75);
  CHECK(m.centering_source() == "config");
  CHECK(m.xi(scalar_map(0.5, 0.0), StatePoint(2.0)) == doctest::Approx(1.25));
  CHECK(m.xi_raw(scalar_map(0.5, 0.0), StatePoint(2.0)) == doctest::Approx(2.0));
  CHECK(m.envelope().R(scalar_map(0.5, 0.0)) ==
        doctest::Approx(m.raw_envelope().R(scalar_map(0.5, 0.0)) + 0.75));
}

TEST_CASE("delta_tilde and delta_lambda") {
  CHECK(delta_tilde(sample_of(0.5, 1.0)) == 2.5);
  CHECK(delta_tilde(sample_of(1.0, 0.0)) == 2.0);
  CHECK(delta_tilde(sample_of(0.0, 0.0)) == 1.0);
  CHECK(delta_lambda(sample_of(0.5, 1.0), 0.5) == 1.5);
  CHECK(delta_lambda(sample_of(1.0, 0.0), 0.3) == 1.0);
  const SystemModel m = testing::ar1_gaussian();
  CHECK(p_lambda(m, m.x0(), 0.5) == 1.0);
  CHECK(p_lambda(m, StatePoint(4.0), 0.25) == 2.0);
}

TEST_CASE("map constants of affine laws") {
  const SystemModel noisy = testing::ar1_gaussian();
  Rng rng = make_rng(3, 0);
  for (int i = 0; i < 100; ++i) CHECK(noisy.draw_sample(rng).lip == 0.5);

  const SystemModel det = scalar_affine({scalar_atom(0.5, 1.0, 1.0)}, Observable::state());
  CHECK(det.atom_samples().at(0).disp == doctest::Approx(1.0).epsilon(1e-12));

  models::AffineSpec spec;
  spec.dim = 2;
  models::AffineAtom a;
  a.a = 0.5 * MatQ::Identity(2, 2);
  a.b = VecQ(2);
  a.b << 1.0, 0.0;
  spec.atoms = {a};
  const SystemModel v = models::make_affine(spec, Observable::state());
  CHECK(v.atom_samples().at(0).lip == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v.atom_samples().at(0).disp == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.exact_lipschitz());
}

TEST_CASE("scalar composition multiplies Lipschitz constants") {
  const SystemModel m = scalar_affine({scalar_atom(0.2, 1.0, 0.5), scalar_atom(-1.2, 0.0, 0.5)},
                                      Observable::state());
  const std::vector<Map> maps = {scalar_map(0.2, 1.0), scalar_map(-1.2, 0.0), scalar_map(0.2, 1.0)};
  CHECK(m.composite_lip(maps) == doctest::Approx(0.2 * 1.2 * 0.2).epsilon(1e-14));
  // d(R x0, x0) with R = g3 g2 g1, x0 = 0: g1 0 = 1, g2 1 = -1.2, g3 (-1.2) = 0.76.
  CHECK(m.composite_disp(maps) == doctest::Approx(0.76).epsilon(1e-14));
}

TEST_CASE("invalid points are rejected") {
  const SystemModel m = testing::ar1_gaussian();
  CHECK_THROWS_AS(m.check_point(StatePoint(std::nan(""))), Error);
  CHECK_THROWS_AS(m.check_point(StatePoint{1.0, 2.0}), Error);
  const SystemModel mm = testing::matrix_model({testing::mat2(2, 1, 1, 2)}, 0.0);
  CHECK_THROWS_AS(mm.check_point(StatePoint{0.5, 0.6}), Error);
  CHECK_THROWS_AS(mm.check_point(StatePoint{-0.1, 1.1}), Error);
  CHECK_NOTHROW(mm.check_point(StatePoint{0.25, 0.75}));
}

TEST_CASE("sampled Lipschitz, ratio, submultiplicativity and envelope bounds") {
  for (const SystemModel& m : property_models()) {
    CAPTURE(m.name());
    Rng rng = make_rng(17, 0);
    const auto env = m.envelope();
    for (int trial = 0; trial < 200; ++trial) {
      const MapSample g = m.draw_sample(rng);
      const MapSample h = m.draw_sample(rng);
      const StatePoint x = m.random_point(rng), y = m.random_point(rng);
      const double dxy = m.distance(x, y);
      if (dxy > 0.0) {
        // Lipschitz bound
        CHECK(m.distance(m.apply(g.map, x), m.apply(g.map, y)) <= g.lip * dxy * (1.0 + 1e-9) + 1e-15);
        // RS envelope, increment part
        const double growth = std::pow(1.0 + m.distance(x, m.x0()) + m.distance(y, m.x0()), env.s);
        CHECK(std::abs(m.xi(g.map, x) - m.xi(g.map, y)) <= env.S(g.map) * dxy * growth * (1.0 + 1e-9) + 1e-12);
      }
      // RS envelope, size part
      CHECK(std::abs(m.xi(g.map, x)) <= env.R(g.map) * std::pow(1.0 + m.distance(x, m.x0()), env.r) * (1.0 + 1e-9) + 1e-12);
      // p_lambda(gx) / p_lambda(x) <= delta_lambda(g)
      for (double lam : {1.0, 0.5, 0.125}) {
        CHECK(p_lambda(m, m.apply(g.map, x), lam) / p_lambda(m, x, lam) <=
              delta_lambda(g, lam) * (1.0 + 1e-9));
      }
      // Submultiplicativity of the composite constants.
      const std::vector<Map> pair = {g.map, h.map};
      const double lip_hg = m.composite_lip(pair);
      const double disp_hg = m.composite_disp(pair);
      CHECK(lip_hg <= g.lip * h.lip * (1.0 + 1e-9) + 1e-15);
      CHECK(1.0 + lip_hg + disp_hg <= delta_tilde(g) * delta_tilde(h) * (1.0 + 1e-9));
    }
  }
}

}  // TEST_SUITE
