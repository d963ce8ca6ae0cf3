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

#include "irlm/core.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "irlm/models.hpp"

namespace irlm {

StatePoint::StatePoint(std::initializer_list<double> values)
    : coords(static_cast<Eigen::Index>(values.size())) {
  if (values.size() == 0 || values.size() > static_cast<std::size_t>(kMaxDim))
    throw Error(ErrorKind::kParameter, "state dimension must be in [1, 4]");
  Eigen::Index i = 0;
  for (double v : values) coords[i++] = v;
}

std::string describe(const StatePoint& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (int i = 0; i < x.dim(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

const char* to_string(Family family) {
  switch (family) {
    case Family::kAffine: return "affine";
    case Family::kFunctionalAR: return "functional_ar";
    case Family::kPositiveMatrix: return "matrix";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// MapDistribution

MapDistribution::MapDistribution(std::vector<WeightedMap> atoms, MapNoise noise)
    : atoms_(std::move(atoms)), noise_(noise) {
  if (atoms_.empty())
    throw Error(ErrorKind::kParameter, "map distribution needs at least one atom");
  double total = 0.0;
  cumulative_.reserve(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const double w = atoms_[i].weight;
    if (!(w > 0.0) || !std::isfinite(w))
      throw Error(ErrorKind::kParameter, "atom weights must be positive");
    total += w;
    cumulative_.push_back(total);
    atoms_[i].map.atom = static_cast<int>(i);
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(ErrorKind::kParameter,
                "atom weights must sum to 1 (got " + std::to_string(total) + ")");
  cumulative_.back() = 1.0;
  if (const auto* g = std::get_if<GaussianTranslation>(&noise_); g && !(g->sd >= 0.0))
    throw Error(ErrorKind::kParameter, "noise standard deviation must be >= 0");
  if (const auto* l = std::get_if<LogNormalEntries>(&noise_); l && !(l->sigma >= 0.0))
    throw Error(ErrorKind::kParameter, "log-normal sigma must be >= 0");
}

Map MapDistribution::draw(Rng& rng) const {
  std::size_t k = 0;
  if (atoms_.size() > 1) {
    const double u = uniform01(rng);
    k = static_cast<std::size_t>(
        std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
        cumulative_.begin());
    if (k >= atoms_.size()) k = atoms_.size() - 1;
  }
  if (finite_support()) return atoms_[k].map;
  Map g = atoms_[k].map;
  g.atom = -1;
  std::normal_distribution<double> normal;
  if (const auto* gt = std::get_if<GaussianTranslation>(&noise_)) {
    for (Eigen::Index i = 0; i < g.b.size(); ++i) g.b[i] += gt->sd * normal(rng);
  } else if (const auto* ln = std::get_if<LogNormalEntries>(&noise_)) {
    for (Eigen::Index c = 0; c < g.a.cols(); ++c)
      for (Eigen::Index r = 0; r < g.a.rows(); ++r)
        if (g.a(r, c) != 0.0) g.a(r, c) *= std::exp(ln->sigma * normal(rng));
  }
  return g;
}

void MapDistribution::draw_scalar(Rng& rng, double& a, double& b, double& label) const {
  std::size_t k = 0;
  if (atoms_.size() > 1) {
    const double u = uniform01(rng);
    k = static_cast<std::size_t>(
        std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
        cumulative_.begin());
    if (k >= atoms_.size()) k = atoms_.size() - 1;
  }
  const Map& m = atoms_[k].map;
  a = m.a(0, 0);
  b = m.b[0];
  label = m.label;
  if (const auto* gt = std::get_if<GaussianTranslation>(&noise_)) {
    std::normal_distribution<double> normal;
    b += gt->sd * normal(rng);
  } else if (const auto* ln = std::get_if<LogNormalEntries>(&noise_)) {
    std::normal_distribution<double> normal;
    if (a != 0.0) a *= std::exp(ln->sigma * normal(rng));
  }
}

// ---------------------------------------------------------------------------
// Observable

Observable Observable::zero() { return Observable{}; }

Observable Observable::constant(double c) {
  Observable o;
  o.kind_ = Kind::kConstant;
  o.name_ = "constant";
  o.coeffs_.c0 = c;
  return o;
}

Observable Observable::linear(double c0, double c_prev, double c_next,
                              double c_label, int coord) {
  Observable o;
  o.kind_ = Kind::kLinear;
  o.name_ = "linear";
  o.coord_ = coord;
  o.coeffs_ = {c0, c_prev, c_next, c_label, 0.0};
  return o;
}

Observable Observable::state(int coord, double shift) {
  Observable o = linear(-shift, 1.0, 0.0, 0.0, coord);
  o.name_ = "state";
  o.shift_ = shift;
  return o;
}

Observable Observable::label() {
  Observable o = linear(0.0, 0.0, 0.0, 1.0);
  o.name_ = "label";
  return o;
}

Observable Observable::coboundary_of_state(int coord) {
  Observable o = linear(0.0, 1.0, -1.0, 0.0, coord);
  o.name_ = "coboundary";
  return o;
}

Observable Observable::label_times_state(int coord, double shift) {
  Observable o;
  o.kind_ = Kind::kLabelTimesState;
  o.name_ = "label_times_state";
  o.coord_ = coord;
  o.shift_ = shift;
  return o;
}

Observable Observable::cocycle() {
  Observable o;
  o.kind_ = Kind::kCocycle;
  o.name_ = "cocycle";
  return o;
}

Observable Observable::custom(std::string name, CustomFn fn, bool needs_image) {
  Observable o;
  o.kind_ = Kind::kCustom;
  o.name_ = std::move(name);
  o.custom_ = std::move(fn);
  o.custom_needs_image_ = needs_image;
  return o;
}

bool Observable::needs_image() const {
  switch (kind_) {
    case Kind::kLinear: return coeffs_.c_next != 0.0;
    case Kind::kCustom: return custom_needs_image_;
    default: return false;
  }
}

double Observable::evaluate(const Map& g, const StatePoint& x,
                            const StatePoint& gx) const {
  switch (kind_) {
    case Kind::kZero: return 0.0;
    case Kind::kConstant: return coeffs_.c0;
    case Kind::kLinear: {
      // Same operation order as kernels::affine_observe_step.
      const double xn = coeffs_.c_next != 0.0 ? gx[coord_] : 0.0;
      return ((coeffs_.c0 + coeffs_.c_prev * x[coord_]) + coeffs_.c_next * xn) +
             coeffs_.c_label * g.label;
    }
    case Kind::kLabelTimesState: return g.label * (x[coord_] - shift_);
    case Kind::kCocycle: return models::cocycle(g.a, x);
    case Kind::kCustom: return custom_(g, x, gx);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// SystemModel

double operator_norm(const MatQ& a) {
  if (a.size() == 1) return std::abs(a(0, 0));
  Eigen::JacobiSVD<MatQ> svd(a);
  return svd.singularValues()(0);
}

SystemModel::SystemModel(Parts parts)
    : p_(std::make_shared<const Parts>(std::move(parts))) {
  const Parts& p = *p_;
  if (p.dim < 1 || p.dim > kMaxDim)
    throw Error(ErrorKind::kParameter, "state dimension must be in [1, 4]");
  if (!(p.alpha > 0.0 && p.alpha <= 1.0))
    throw Error(ErrorKind::kParameter, "metric exponent alpha must lie in (0, 1]");
  if (p.x0.dim() != p.dim)
    throw Error(ErrorKind::kParameter, "base point dimension mismatch");
  check_point(p.x0);
  if (p.family == Family::kFunctionalAR && !p.f)
    throw Error(ErrorKind::kParameter, "functional autoregression needs f");
  if (p.xi.coord() >= p.dim)
    throw Error(ErrorKind::kParameter, "observable coordinate out of range");
  for (const auto& atom : p.pi.atoms()) {
    if (atom.map.b.size() != p.dim ||
        (p.family != Family::kFunctionalAR &&
         (atom.map.a.rows() != p.dim || atom.map.a.cols() != p.dim)))
      throw Error(ErrorKind::kParameter, "map dimension does not match the model");
    if (!atom.map.a.allFinite() || !atom.map.b.allFinite())
      throw Error(ErrorKind::kParameter, "map coefficients must be finite");
  }
  if (p.pi.finite_support()) {
    atom_samples_.reserve(p.pi.support_size());
    for (const auto& atom : p.pi.atoms()) atom_samples_.push_back(sample(atom.map));
  }
}

bool SystemModel::exact_lipschitz() const {
  switch (family()) {
    case Family::kAffine: return true;
    case Family::kFunctionalAR: return p_->f_lip.has_value();
    case Family::kPositiveMatrix: return false;
  }
  return false;
}

ObservableEnvelope SystemModel::envelope() const {
  ObservableEnvelope env = p_->envelope;
  const double m = std::abs(p_->centering);
  if (m != 0.0) {
    auto base = env.R;
    env.R = [base, m](const Map& g) { return base(g) + m; };
  }
  return env;
}

SystemModel SystemModel::with_centering(double m, std::string source) const {
  Parts parts = *p_;
  parts.centering = m;
  parts.centering_source = std::move(source);
  return SystemModel(std::move(parts));
}

SystemModel SystemModel::with_observable(Observable xi,
                                         ObservableEnvelope envelope) const {
  Parts parts = *p_;
  parts.xi = std::move(xi);
  parts.envelope = std::move(envelope);
  parts.centering = 0.0;
  parts.centering_source = "none";
  return SystemModel(std::move(parts));
}

void SystemModel::check_point(const StatePoint& x) const {
  if (x.dim() != p_->dim)
    throw Error(ErrorKind::kInvalidInput,
                "state " + describe(x) + " has the wrong dimension");
  if (!x.finite())
    throw Error(ErrorKind::kInvalidInput, "state " + describe(x) + " is not finite");
  if (p_->family == Family::kPositiveMatrix) {
    if ((x.coords.array() <= 0.0).any())
      throw Error(ErrorKind::kInvalidInput,
                  "simplex point " + describe(x) + " has a nonpositive coordinate");
    if (std::abs(x.coords.sum() - 1.0) > 1e-12)
      throw Error(ErrorKind::kInvalidInput,
                  "simplex point " + describe(x) + " does not sum to 1");
  }
}

StatePoint SystemModel::apply(const Map& g, const StatePoint& x) const {
  switch (p_->family) {
    case Family::kAffine: {
      if (p_->dim == 1) return StatePoint(g.a(0, 0) * x[0] + g.b[0]);
      return StatePoint(VecQ(g.a * x.coords + g.b));
    }
    case Family::kFunctionalAR: return StatePoint(VecQ(p_->f(x.coords) + g.b));
    case Family::kPositiveMatrix:
      if ((x.coords.array() <= 0.0).any())
        throw Error(ErrorKind::kInvalidInput,
                    "simplex point " + describe(x) + " has a nonpositive coordinate");
      return models::projective_apply(g.a, x);
  }
  return x;
}

double SystemModel::distance(const StatePoint& x, const StatePoint& y) const {
  if (p_->family == Family::kPositiveMatrix) return models::hilbert_distance(x, y);
  const double e = (x.coords - y.coords).norm();
  return p_->alpha == 1.0 ? e : std::pow(e, p_->alpha);
}

namespace {
[[noreturn]] void evaluation_failure(const Map& g, const StatePoint& x, double v) {
  std::ostringstream os;
  os << "observable evaluated to " << v << " at x = " << describe(x)
     << " (map atom " << g.atom << ", label " << g.label << ")";
  throw Error(ErrorKind::kEvaluation, os.str());
}
}  // namespace

double SystemModel::xi_raw(const Map& g, const StatePoint& x) const {
  const Observable& o = p_->xi;
  const double v = o.needs_image() ? o.evaluate(g, x, apply(g, x))
                                   : o.evaluate(g, x, x);
  if (!std::isfinite(v)) evaluation_failure(g, x, v);
  return v;
}

double SystemModel::xi(const Map& g, const StatePoint& x) const {
  return xi_raw(g, x) - p_->centering;
}

std::pair<StatePoint, double> SystemModel::step(const Map& g,
                                                const StatePoint& x) const {
  StatePoint gx = apply(g, x);
  const double v = p_->xi.evaluate(g, x, gx);
  if (!std::isfinite(v)) evaluation_failure(g, x, v);
  return {std::move(gx), v - p_->centering};
}

double SystemModel::matrix_lip(const MatQ& m, std::uint64_t seed) const {
  if (!models::strictly_positive(m)) return 1.0;
  auto fn = [&m](const StatePoint& y) { return models::projective_apply(m, y); };
  return std::min(1.0, sampled_lip(fn, seed));
}

double SystemModel::sampled_lip(
    const std::function<StatePoint(const StatePoint&)>& fn,
    std::uint64_t seed) const {
  Rng rng(stream_seed(p_->lip_seed, seed));
  std::normal_distribution<double> normal;
  double best = 0.0;
  for (std::size_t k = 0; k < p_->lip_pairs; ++k) {
    const StatePoint x = random_point(rng);
    StatePoint y;
    if (k % 2 == 0) {
      y = random_point(rng);
    } else {
      // Nearby pair: estimates the local expansion rate.
      y = x;
      for (int i = 0; i < y.dim(); ++i) y[i] += 1e-4 * normal(rng) * std::abs(x[i] + 1e-3);
      if (p_->family == Family::kPositiveMatrix) {
        y.coords = y.coords.cwiseMax(models::kSimplexFloor);
        y.coords /= y.coords.sum();
      }
    }
    const double dxy = distance(x, y);
    if (!(dxy > 0.0)) continue;
    const double ratio = distance(fn(x), fn(y)) / dxy;
    if (std::isfinite(ratio)) best = std::max(best, ratio);
  }
  return kLipInflation * best;
}

double SystemModel::exact_or_sampled_lip(const Map& g) const {
  switch (p_->family) {
    case Family::kAffine: {
      const double n = operator_norm(g.a);
      return p_->alpha == 1.0 ? n : std::pow(n, p_->alpha);
    }
    case Family::kFunctionalAR: {
      if (p_->f_lip) return std::pow(*p_->f_lip, p_->alpha);
      // c(g) does not depend on b for gx = f(x) + b.
      auto fn = [this](const StatePoint& x) { return StatePoint(VecQ(p_->f(x.coords))); };
      return sampled_lip(fn, 0xf00d);
    }
    case Family::kPositiveMatrix:
      return matrix_lip(g.a, g.atom >= 0 ? static_cast<std::uint64_t>(g.atom) : 0x77);
  }
  return 0.0;
}

MapSample SystemModel::sample(const Map& g) const {
  if (g.atom >= 0 && static_cast<std::size_t>(g.atom) < atom_samples_.size())
    return atom_samples_[static_cast<std::size_t>(g.atom)];
  MapSample s;
  s.map = g;
  s.lip = exact_or_sampled_lip(g);
  s.disp = distance(apply(g, p_->x0), p_->x0);
  return s;
}

double SystemModel::composite_lip(std::span<const Map> maps) const {
  if (maps.empty()) return 1.0;
  switch (p_->family) {
    case Family::kAffine: {
      if (p_->dim == 1) {
        double prod = 1.0;
        for (const Map& g : maps) prod *= g.a(0, 0);
        return p_->alpha == 1.0 ? std::abs(prod) : std::pow(std::abs(prod), p_->alpha);
      }
      MatQ prod = MatQ::Identity(p_->dim, p_->dim);
      for (const Map& g : maps) prod = (g.a * prod).eval();
      const double n = operator_norm(prod);
      return p_->alpha == 1.0 ? n : std::pow(n, p_->alpha);
    }
    case Family::kPositiveMatrix: {
      if (maps.size() == 1) return sample(maps[0]).lip;
      MatQ prod = MatQ::Identity(p_->dim, p_->dim);
      for (const Map& g : maps) prod = (g.a * prod).eval();
      return matrix_lip(prod, 0x99 + maps.size());
    }
    case Family::kFunctionalAR: {
      if (p_->f_lip) return std::pow(std::pow(*p_->f_lip, static_cast<double>(maps.size())), p_->alpha);
      auto fn = [this, maps](const StatePoint& x) {
        StatePoint y = x;
        for (const Map& g : maps) y = apply(g, y);
        return y;
      };
      return sampled_lip(fn, 0xc0 + maps.size());
    }
  }
  return 1.0;
}

double SystemModel::composite_disp(std::span<const Map> maps) const {
  StatePoint y = p_->x0;
  for (const Map& g : maps) y = apply(g, y);
  return distance(y, p_->x0);
}

StatePoint SystemModel::random_point(Rng& rng, double scale) const {
  std::normal_distribution<double> normal;
  StatePoint x(VecQ::Zero(p_->dim));
  if (p_->family == Family::kPositiveMatrix) {
    for (int i = 0; i < p_->dim; ++i) x[i] = std::exp(0.5 * scale * normal(rng));
    x.coords /= x.coords.sum();
    x.coords = x.coords.cwiseMax(models::kSimplexFloor);
    x.coords /= x.coords.sum();
    return x;
  }
  for (int i = 0; i < p_->dim; ++i) x[i] = p_->x0[i] + scale * normal(rng);
  return x;
}

std::optional<kernels::LinearObservableCoeffs> SystemModel::lockstep_coeffs() const {
  if (p_->family != Family::kAffine || p_->dim != 1) return std::nullopt;
  if (p_->xi.kind() != Observable::Kind::kLinear) return std::nullopt;
  kernels::LinearObservableCoeffs k = p_->xi.coeffs();
  k.shift = p_->centering;
  return k;
}

// ---------------------------------------------------------------------------

double delta_tilde(const MapSample& g) { return 1.0 + g.lip + g.disp; }

namespace {
void check_lambda(double lambda0) {
  if (!(lambda0 > 0.0 && lambda0 <= 1.0))
    throw Error(ErrorKind::kParameter, "lambda0 must lie in (0, 1]");
}
}  // namespace

double p_lambda(const SystemModel& model, const StatePoint& x, double lambda0) {
  check_lambda(lambda0);
  return 1.0 + lambda0 * model.distance(x, model.x0());
}

double delta_lambda(const MapSample& g, double lambda0) {
  check_lambda(lambda0);
  return std::max(g.lip, 1.0) + lambda0 * g.disp;
}

}  // namespace irlm
