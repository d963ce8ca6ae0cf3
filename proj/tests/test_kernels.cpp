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

#include <cstring>
#include <random>

#include "fixtures.hpp"
#include "irlm/error.hpp"
#include "irlm/kernels.hpp"

using namespace irlm;
namespace k = irlm::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct IsaGuard {
  ~IsaGuard() { k::reset_isa(); }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar cmatvec matches a std::complex product") {
  for (std::size_t n : {1u, 3u, 4u, 7u, 33u}) {
    const auto re = random_vec(n * n, 1 + n), im = random_vec(n * n, 2 + n);
    const auto xr = random_vec(n, 3 + n), xi = random_vec(n, 4 + n);
    std::vector<double> yr(n), yi(n);
    k::scalar::cmatvec({n, n, re, im}, xr.data(), xi.data(), yr.data(), yi.data());
    std::vector<std::complex<double>> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = {xr[i], xi[i]};
    const auto ref = testing::cmatvec_naive(n, re, im, x);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(yr[i] == doctest::Approx(ref[i].real()).epsilon(1e-12));
      CHECK(yi[i] == doctest::Approx(ref[i].imag()).epsilon(1e-12));
    }
  }
}

TEST_CASE("avx2 kernels are bit-identical to the scalar reference") {
  if (!k::isa_supported(k::Isa::kAvx2)) {
    MESSAGE("AVX2 unavailable; equivalence not exercised");
    return;
  }
  for (std::size_t n : {1u, 2u, 5u, 8u, 13u, 64u, 129u}) {
    const auto re = random_vec(n * n, 10 + n), im = random_vec(n * n, 20 + n);
    const auto xr = random_vec(n, 30 + n), xi = random_vec(n, 40 + n);
    std::vector<double> sr(n), si(n), vr(n), vi(n);
    k::scalar::cmatvec({n, n, re, im}, xr.data(), xi.data(), sr.data(), si.data());
    k::avx2::cmatvec({n, n, re, im}, xr.data(), xi.data(), vr.data(), vi.data());
    CHECK(same_bits(sr, vr));
    CHECK(same_bits(si, vi));

    CHECK(k::scalar::sum(n, xr.data()) == k::avx2::sum(n, xr.data()));
    CHECK(k::scalar::sum_squares(n, xr.data()) == k::avx2::sum_squares(n, xr.data()));

    const auto a = random_vec(n, 50 + n), b = random_vec(n, 60 + n), lab = random_vec(n, 70 + n);
    auto x1 = random_vec(n, 80 + n), s1 = random_vec(n, 90 + n);
    auto x2 = x1, s2 = s1;
    const k::LinearObservableCoeffs c{0.3, -1.25, 0.75, 2.0, 0.5};
    for (int step = 0; step < 5; ++step) {
      k::scalar::affine_observe_step(n, x1.data(), s1.data(), a.data(), b.data(), lab.data(), c);
      k::avx2::affine_observe_step(n, x2.data(), s2.data(), a.data(), b.data(), lab.data(), c);
    }
    CHECK(same_bits(x1, x2));
    CHECK(same_bits(s1, s2));
  }
}

TEST_CASE("dispatcher routes to the forced instruction set") {
  IsaGuard guard;
  const std::size_t n = 37;
  const auto re = random_vec(n * n, 5), im = random_vec(n * n, 6);
  const auto xr = random_vec(n, 7), xi = random_vec(n, 8);
  std::vector<double> yr(n), yi(n);
  k::force_isa(k::Isa::kScalar);
  CHECK(k::active_isa() == k::Isa::kScalar);
  k::cmatvec({n, n, re, im}, xr, xi, yr, yi);
  std::vector<double> ref_r(n), ref_i(n);
  k::scalar::cmatvec({n, n, re, im}, xr.data(), xi.data(), ref_r.data(), ref_i.data());
  CHECK(same_bits(yr, ref_r));
  CHECK(k::sum(xr) == k::scalar::sum(n, xr.data()));
  if (k::isa_supported(k::Isa::kAvx2)) {
    k::force_isa(k::Isa::kAvx2);
    CHECK(k::active_isa() == k::Isa::kAvx2);
    std::vector<double> zr(n), zi(n);
    k::cmatvec({n, n, re, im}, xr, xi, zr, zi);
    CHECK(same_bits(zr, ref_r));
    CHECK(same_bits(zi, ref_i));
  } else {
    CHECK_THROWS_AS(k::force_isa(k::Isa::kAvx2), irlm::Error);
  }
}

TEST_CASE("affine step applies x' = a x + b and accumulates the observable") {
  const double a[] = {0.5, -2.0, 1.0}, b[] = {1.0, 0.25, -3.0}, lab[] = {1.0, -1.0, 0.5};
  double x[] = {2.0, 1.0, 0.0}, s[] = {0.0, 10.0, -1.0};
  const k::LinearObservableCoeffs c{1.0, 2.0, -1.0, 3.0, 0.5};
  k::scalar::affine_observe_step(3, x, s, a, b, lab, c);
  // xi = c0 + c_prev x + c_next x' + c_label u - shift
  CHECK(x[0] == 2.0);
  CHECK(s[0] == doctest::Approx(1.0 + 4.0 - 2.0 + 3.0 - 0.5));
  CHECK(x[1] == -1.75);
  CHECK(s[1] == doctest::Approx(10.0 + 1.0 + 2.0 + 1.75 - 3.0 - 0.5));
  CHECK(x[2] == -3.0);
  CHECK(s[2] == doctest::Approx(-1.0 + 1.0 + 0.0 + 3.0 + 1.5 - 0.5));
}

}  // TEST_SUITE
