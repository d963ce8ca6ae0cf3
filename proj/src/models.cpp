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

#include "irlm/models.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "irlm/simulate.hpp"

namespace irlm::models {

namespace {

std::atomic<std::uint64_t> g_clamps{0};

VecQ zero_vec(int dim) { return VecQ::Zero(dim); }

double max_abs_label(const Map& g) { return std::abs(g.label); }

// Envelope for built-in observables of chains gx = A(x) + b where
// ||A(x)|| <= lin ||x|| + offset(g).
ObservableEnvelope linear_family_envelope(
    const Observable& xi, double alpha, std::function<double(const Map&)> lin,
    std::function<double(const Map&)> offset) {
  ObservableEnvelope env;
  const double inv = 1.0 / alpha;
  switch (xi.kind()) {
    case Observable::Kind::kZero: break;
    case Observable::Kind::kConstant: {
      const double c = std::abs(xi.coeffs().c0);
      env.R = [c](const Map&) { return c; };
      break;
    }
    case Observable::Kind::kLinear: {
      const auto k = xi.coeffs();
      const bool state_dependent = k.c_prev != 0.0 || k.c_next != 0.0;
      env.r = state_dependent ? inv : 0.0;
      env.s = state_dependent ? inv - 1.0 : 0.0;
      env.R = [k, lin, offset](const Map& g) {
        return std::abs(k.c0) + std::abs(k.c_label * g.label) +
               std::abs(k.c_next) * offset(g) + std::abs(k.c_prev) +
               std::abs(k.c_next) * lin(g);
      };
      env.S = [k, lin](const Map& g) {
        return std::abs(k.c_prev) + std::abs(k.c_next) * lin(g);
      };
      break;
    }
    case Observable::Kind::kLabelTimesState: {
      const double shift = std::abs(xi.shift());
      env.r = inv;
      env.s = inv - 1.0;
      env.R = [shift](const Map& g) { return max_abs_label(g) * (shift + 1.0); };
      env.S = [](const Map& g) { return max_abs_label(g); };
      break;
    }
    case Observable::Kind::kCocycle:
      throw Error(ErrorKind::kParameter, "the cocycle observable needs a matrix model");
    case Observable::Kind::kCustom:
      throw Error(ErrorKind::kParameter,
                  "custom observable '" + xi.name() + "' needs an explicit envelope");
  }
  return env;
}

std::vector<WeightedMap> affine_atoms(const std::vector<AffineAtom>& atoms, int dim,
                                      bool functional) {
  std::vector<WeightedMap> out;
  for (const auto& a : atoms) {
    WeightedMap w;
    w.map.a = functional ? MatQ::Identity(dim, dim) : a.a;
    w.map.b = a.b;
    w.map.label = a.label;
    w.weight = a.weight;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

SystemModel make_affine(const AffineSpec& spec, Observable xi,
                        std::optional<ObservableEnvelope> envelope) {
  if (spec.dim < 1 || spec.dim > kMaxDim)
    throw Error(ErrorKind::kParameter, "affine dimension must be in [1, 4]");
  SystemModel::Parts parts;
  parts.family = Family::kAffine;
  parts.name = spec.name;
  parts.dim = spec.dim;
  parts.alpha = spec.alpha;
  MapNoise noise;
  if (spec.noise) noise = *spec.noise;
  parts.pi = MapDistribution(affine_atoms(spec.atoms, spec.dim, false), noise);
  parts.x0 = StatePoint(zero_vec(spec.dim));
  if (!envelope) {
    envelope = linear_family_envelope(
        xi, spec.alpha, [](const Map& g) { return operator_norm(g.a); },
        [](const Map& g) { return g.b.norm(); });
  }
  parts.xi = std::move(xi);
  parts.envelope = std::move(*envelope);
  return SystemModel(std::move(parts));
}

SystemModel::FunctionalMap named_function(const std::string& name, double kappa) {
  if (name == "tanh")
    return [kappa](const VecQ& x) { return VecQ(kappa * x.array().tanh()); };
  if (name == "sin")
    return [kappa](const VecQ& x) { return VecQ(kappa * x.array().sin()); };
  throw Error(ErrorKind::kParameter, "unknown named function '" + name + "'");
}

SystemModel make_functional_ar(const FunctionalARSpec& spec, Observable xi,
                               std::optional<ObservableEnvelope> envelope) {
  if (!spec.f) throw Error(ErrorKind::kParameter, "functional autoregression needs f");
  if (spec.f_lip && !(*spec.f_lip >= 0.0 && std::isfinite(*spec.f_lip)))
    throw Error(ErrorKind::kParameter, "Lipschitz constant of f must be finite");
  SystemModel::Parts parts;
  parts.family = Family::kFunctionalAR;
  parts.name = spec.name;
  parts.dim = spec.dim;
  parts.alpha = spec.alpha;
  MapNoise noise;
  if (spec.noise) noise = *spec.noise;
  parts.pi = MapDistribution(affine_atoms(spec.translations, spec.dim, true), noise);
  parts.x0 = StatePoint(zero_vec(spec.dim));
  parts.f = spec.f;
  parts.f_lip = spec.f_lip;
  if (!envelope) {
    // Lipschitz constant of f; estimated when not supplied.
    double lip = spec.f_lip.value_or(0.0);
    if (!spec.f_lip) {
      SystemModel::Parts probe = parts;
      probe.xi = Observable::zero();
      SystemModel tmp(std::move(probe));
      auto fn = [&spec](const StatePoint& x) { return StatePoint(VecQ(spec.f(x.coords))); };
      lip = tmp.sampled_lip(fn, 0xf00d);
      if (spec.alpha != 1.0) lip = std::pow(lip, 1.0 / spec.alpha);
    }
    const double f0 = spec.f(zero_vec(spec.dim)).norm();
    envelope = linear_family_envelope(
        xi, spec.alpha, [lip](const Map&) { return lip; },
        [f0](const Map& g) { return f0 + g.b.norm(); });
  }
  parts.xi = std::move(xi);
  parts.envelope = std::move(*envelope);
  return SystemModel(std::move(parts));
}

// ---------------------------------------------------------------------------
// Positive matrices

bool allowable(const MatQ& m) {
  if ((m.array() < 0.0).any() || !m.allFinite()) return false;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    if (!(m.row(r).array() > 0.0).any()) return false;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    if (!(m.col(c).array() > 0.0).any()) return false;
  return true;
}

bool strictly_positive(const MatQ& m) { return (m.array() > 0.0).all(); }

double simplex_norm(const MatQ& m) { return m.colwise().sum().maxCoeff(); }

double simplex_conorm(const MatQ& m) { return m.colwise().sum().minCoeff(); }

double hilbert_distance(const StatePoint& y, const StatePoint& y2) {
  if (y.dim() != y2.dim())
    throw Error(ErrorKind::kInvalidInput, "Hilbert distance: dimension mismatch");
  if ((y.coords.array() <= 0.0).any() || (y2.coords.array() <= 0.0).any())
    throw Error(ErrorKind::kInvalidInput,
                "Hilbert distance to a boundary point is infinite: " + describe(y) +
                    " vs " + describe(y2));
  const double m12 = (y.coords.array() / y2.coords.array()).minCoeff();
  const double m21 = (y2.coords.array() / y.coords.array()).minCoeff();
  // m12 * m21 <= 1; clip rounding noise so the distance of a point to
  // itself is exactly zero.
  return std::max(0.0, -(std::log(m12) + std::log(m21)));
}

double cocycle(const MatQ& g, const StatePoint& y) {
  const double n = (g * y.coords).cwiseAbs().sum();
  if (!(n > 0.0) || !std::isfinite(n))
    throw Error(ErrorKind::kDegenerate, "matrix image of " + describe(y) + " has zero norm");
  return std::log(n);
}

StatePoint projective_apply(const MatQ& g, const StatePoint& y) {
  VecQ w = g * y.coords;
  const double n = w.cwiseAbs().sum();
  if (!(n > 0.0) || !std::isfinite(n))
    throw Error(ErrorKind::kDegenerate, "matrix image of " + describe(y) + " has zero norm");
  w /= n;
  if ((w.array() < kSimplexFloor).any()) {
    if (g_clamps.fetch_add(1, std::memory_order_relaxed) == 0)
      spdlog::warn("simplex point clamped away from the boundary at {}", kSimplexFloor);
    w = w.cwiseMax(kSimplexFloor);
    w /= w.sum();
  }
  return StatePoint(w);
}

std::uint64_t boundary_clamp_count() { return g_clamps.load(); }

double perron_radius(const MatQ& g, double rel_tol, std::size_t max_iter) {
  if (g.rows() != g.cols() || g.rows() == 0)
    throw Error(ErrorKind::kParameter, "perron_radius needs a square matrix");
  if ((g.array() < 0.0).any())
    throw Error(ErrorKind::kParameter, "perron_radius needs a nonnegative matrix");
  VecQ x = VecQ::Constant(g.rows(), 1.0 / static_cast<double>(g.rows()));
  double rho = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iter; ++it) {
    VecQ y = g * x;
    const double next = y.sum();  // ||g x||_1 with ||x||_1 = 1
    if (!(next > 0.0))
      throw Error(ErrorKind::kDegenerate, "matrix annihilates the positive cone");
    y /= next;
    residual = (g * y - next * y).lpNorm<1>() / next;
    const bool settled = std::abs(next - rho) <= rel_tol * next;
    rho = next;
    x = y;
    if (settled && residual <= 1e3 * rel_tol) return rho;
  }
  std::ostringstream os;
  os << "power iteration did not converge (estimate " << rho << ", residual "
     << residual << ")";
  throw Error(ErrorKind::kNumerical, os.str());
}

PositivitySearch find_positive_product(const PositiveMatrixSpec& spec) {
  PositivitySearch out;
  out.status = "unverified";
  if (spec.atoms.empty()) return out;
  // Log-normal perturbation keeps the zero pattern of every atom, so the
  // search over atom products also covers the generative case.
  std::vector<MatQ> frontier;
  for (const auto& a : spec.atoms) frontier.push_back(a.m);
  for (int n = 1; n <= spec.positivity_search_cap; ++n) {
    for (const auto& m : frontier) {
      if (strictly_positive(m)) {
        out.n0 = n;
        out.status = "verified";
        return out;
      }
    }
    if (n == spec.positivity_search_cap) break;
    // Products differ only through their zero pattern, so dedupe on it.
    std::vector<MatQ> next;
    std::vector<std::vector<bool>> patterns;
    for (const auto& m : frontier) {
      for (const auto& a : spec.atoms) {
        MatQ p = a.m * m;
        std::vector<bool> pat;
        for (Eigen::Index i = 0; i < p.size(); ++i) pat.push_back(p.data()[i] > 0.0);
        bool seen = false;
        for (const auto& q : patterns) seen = seen || q == pat;
        if (!seen) {
          patterns.push_back(pat);
          next.push_back(p);
        }
      }
    }
    frontier = std::move(next);
  }
  return out;
}

SystemModel make_matrix_model(const PositiveMatrixSpec& spec,
                              std::optional<double> gamma1_hint,
                              const DriftOptions& drift) {
  if (spec.dim < 2 || spec.dim > kMaxDim)
    throw Error(ErrorKind::kParameter, "matrix dimension must be in [2, 4]");
  std::vector<WeightedMap> atoms;
  for (const auto& a : spec.atoms) {
    if (a.m.rows() != spec.dim || a.m.cols() != spec.dim)
      throw Error(ErrorKind::kParameter, "matrix atom has the wrong shape");
    if (!allowable(a.m))
      throw Error(ErrorKind::kParameter,
                  "matrix atom is not allowable: every row and column needs a "
                  "strictly positive entry");
    WeightedMap w;
    w.map.a = a.m;
    w.map.b = VecQ::Zero(spec.dim);
    w.weight = a.weight;
    atoms.push_back(std::move(w));
  }
  SystemModel::Parts parts;
  parts.family = Family::kPositiveMatrix;
  parts.name = spec.name;
  parts.dim = spec.dim;
  parts.alpha = 1.0;
  MapNoise noise;
  if (spec.noise) noise = *spec.noise;
  parts.pi = MapDistribution(std::move(atoms), noise);
  parts.x0 = StatePoint(VecQ::Constant(spec.dim, 1.0 / spec.dim));
  parts.xi = Observable::cocycle();
  parts.envelope.r = 0.0;
  parts.envelope.s = 0.0;
  parts.envelope.R = [](const Map& g) {
    return 2.0 * (std::abs(std::log(simplex_norm(g.a))) +
                  std::abs(std::log(simplex_conorm(g.a))));
  };
  parts.envelope.S = [](const Map&) { return 1.0; };
  SystemModel model(std::move(parts));
  if (gamma1_hint) return model.with_centering(*gamma1_hint, "hint");
  const auto est = simulate::estimate_drift(model, drift.steps, drift.paths,
                                            drift.seed, drift.burn_in);
  return model.with_centering(est.value, "estimated");
}

}  // namespace irlm::models
