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

// Built-in model families: affine autoregressions, functional
// autoregressions gx = f(x) + b, and products of allowable nonnegative
// matrices acting projectively on the simplex with the Hilbert metric.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irlm/core.hpp"

namespace irlm::models {

struct AffineAtom {
  MatQ a = MatQ::Identity(1, 1);
  VecQ b = VecQ::Zero(1);
  double weight = 1.0;
  double label = 0.0;
};

/// Z_{n+1} = a(Y) Z_n + b(Y), with (a, b) drawn from `atoms`; `noise`
/// adds a Gaussian translation on top (generative law).
struct AffineSpec {
  std::string name = "affine";
  int dim = 1;
  double alpha = 1.0;
  std::vector<AffineAtom> atoms;
  std::optional<GaussianTranslation> noise;
};

/// Builds an affine model with x0 = 0, c(g) = ||a(g)||^alpha and
/// d(g x0, x0) = ||b(g)||^alpha. When `envelope` is empty a Condition RS
/// envelope is derived for the built-in observable kinds.
SystemModel make_affine(const AffineSpec& spec, Observable xi,
                        std::optional<ObservableEnvelope> envelope = {});

/// Z_{n+1} = f(Z_n) + b(Y). `f_lip` is the Euclidean Lipschitz constant of
/// f when known; otherwise it is estimated from sampled pairs.
struct FunctionalARSpec {
  std::string name = "functional_ar";
  int dim = 1;
  double alpha = 1.0;
  SystemModel::FunctionalMap f;
  std::optional<double> f_lip;
  std::vector<AffineAtom> translations;  // only b, weight and label are read
  std::optional<GaussianTranslation> noise;
};

SystemModel make_functional_ar(const FunctionalARSpec& spec, Observable xi,
                               std::optional<ObservableEnvelope> envelope = {});

/// Named componentwise maps for functional autoregressions:
/// "tanh" -> kappa tanh(x), "sin" -> kappa sin(x). Lipschitz constant |kappa|.
SystemModel::FunctionalMap named_function(const std::string& name, double kappa);

struct MatrixAtom {
  MatQ m;
  double weight = 1.0;
};

struct PositiveMatrixSpec {
  std::string name = "matrix";
  int dim = 2;
  std::vector<MatrixAtom> atoms;
  std::optional<LogNormalEntries> noise;
  int positivity_search_cap = 4;  // largest n0 tried when looking for G°
};

/// Options for the Lyapunov-exponent estimate used when no hint is given.
struct DriftOptions {
  std::size_t steps = 4096;
  std::size_t paths = 64;
  std::size_t burn_in = 64;
  std::uint64_t seed = 0x6a6d6c;
};

/// Projective matrix-product model on the open simplex with the Hilbert
/// metric. The observable is the cocycle ln ||g y||_1 centered by gamma1,
/// taken from `gamma1_hint` or estimated as the long-run cocycle mean.
SystemModel make_matrix_model(const PositiveMatrixSpec& spec,
                              std::optional<double> gamma1_hint = {},
                              const DriftOptions& drift = {});

/// Result of looking for a strictly positive matrix in the support of
/// R_{n0}, n0 <= cap.
struct PositivitySearch {
  std::optional<int> n0;
  std::string status;  // "verified", "unverified"
};

PositivitySearch find_positive_product(const PositiveMatrixSpec& spec);

bool allowable(const MatQ& m);
bool strictly_positive(const MatQ& m);

/// ||g|| = sup over the simplex of ||g y||_1 (largest column sum).
double simplex_norm(const MatQ& m);
/// v(g) = inf over the simplex of ||g y||_1 (smallest column sum).
double simplex_conorm(const MatQ& m);

/// Hilbert projective distance -ln(m(y,y') m(y',y)). Both points must be
/// strictly inside the simplex; a boundary point throws kInvalidInput.
double hilbert_distance(const StatePoint& y, const StatePoint& y2);

/// a(g, y) = ln ||g y||_1. Throws kDegenerate on a zero image.
double cocycle(const MatQ& g, const StatePoint& y);

/// g y / ||g y||_1, with coordinates clamped at 1e-14 (counted, warned).
StatePoint projective_apply(const MatQ& g, const StatePoint& y);

/// Number of boundary clamps performed since process start.
std::uint64_t boundary_clamp_count();

inline constexpr double kSimplexFloor = 1e-14;

/// Dominant eigenvalue of a nonnegative matrix by power iteration.
/// Throws kNumerical with the residual when `max_iter` is exhausted.
double perron_radius(const MatQ& g, double rel_tol = 1e-12,
                     std::size_t max_iter = 1000000);

}  // namespace irlm::models
