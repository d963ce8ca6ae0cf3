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

// Model builders and independent reference computations shared by the
// unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "irlm/core.hpp"
#include "irlm/models.hpp"

namespace irlm::testing {

inline models::AffineAtom scalar_atom(double a, double b, double weight, double label = 0.0) {
  models::AffineAtom atom;
  atom.a = MatQ::Constant(1, 1, a);
  atom.b = VecQ::Constant(1, b);
  atom.weight = weight;
  atom.label = label;
  return atom;
}

inline SystemModel scalar_affine(std::vector<models::AffineAtom> atoms, Observable xi,
                                 std::optional<double> noise_sd = {}) {
  models::AffineSpec spec;
  spec.name = "scalar";
  spec.atoms = std::move(atoms);
  if (noise_sd) spec.noise = GaussianTranslation{*noise_sd};
  return models::make_affine(spec, std::move(xi));
}

/// g1 x = x/2, g2 x = (x+1)/2 with equal weights, xi = x - 1/2.
inline SystemModel doubling_ifs() {
  return scalar_affine({scalar_atom(0.5, 0.0, 0.5), scalar_atom(0.5, 0.5, 0.5)},
                       Observable::state(0, 0.5));
}

/// Z' = a Z + N(0, 1), xi = x.
inline SystemModel ar1_gaussian(double a = 0.5, Observable xi = Observable::state()) {
  return scalar_affine({scalar_atom(a, 0.0, 1.0)}, std::move(xi), 1.0);
}

/// Z' = 0.5 Z + b, b = +-1 with equal weights, label u = b.
inline SystemModel ar1_binary(Observable xi = Observable::state()) {
  return scalar_affine({scalar_atom(0.5, -1.0, 0.5, -1.0), scalar_atom(0.5, 1.0, 0.5, 1.0)},
                       std::move(xi));
}

inline SystemModel identity_model() {
  return scalar_affine({scalar_atom(1.0, 0.0, 1.0)}, Observable::state());
}

inline SystemModel matrix_model(std::vector<MatQ> ms, std::optional<double> gamma1 = {}) {
  models::PositiveMatrixSpec spec;
  spec.dim = static_cast<int>(ms.front().rows());
  for (auto& m : ms) spec.atoms.push_back({m, 1.0 / static_cast<double>(ms.size())});
  return models::make_matrix_model(spec, gamma1);
}

inline MatQ mat2(double a, double b, double c, double d) {
  MatQ m(2, 2);
  m << a, b, c, d;
  return m;
}

// -- oracles ---------------------------------------------------------------

/// KS distance by brute force: the sup over each order statistic of both
/// one-sided gaps, recomputing the empirical CDF by counting.
template <class Cdf>
double ks_bruteforce(std::vector<double> v, Cdf cdf) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (double x : v) {
    const double below = static_cast<double>(std::count_if(v.begin(), v.end(), [x](double y) { return y < x; }));
    const double upto = static_cast<double>(std::count_if(v.begin(), v.end(), [x](double y) { return y <= x; }));
    d = std::max({d, std::abs(upto / n - cdf(x)), std::abs(below / n - cdf(x))});
  }
  return d;
}

/// W1 between two equal-size samples: mean gap of the sorted samples.
inline double w1_sorted(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// Hilbert distance on the 2-simplex from the cross-ratio formula
/// |ln(y1 z2 / (y2 z1))|.
inline double hilbert2(double y1, double z1) {
  return std::abs(std::log(y1 * (1.0 - z1) / ((1.0 - y1) * z1)));
}

/// Complex matrix-vector product with std::complex, row by row.
inline std::vector<std::complex<double>> cmatvec_naive(std::size_t n, const std::vector<double>& re,
                                                       const std::vector<double>& im,
                                                       const std::vector<std::complex<double>>& x) {
  std::vector<std::complex<double>> y(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < x.size(); ++c) y[r] += std::complex<double>(re[r * x.size() + c], im[r * x.size() + c]) * x[c];
  return y;
}

}  // namespace irlm::testing
