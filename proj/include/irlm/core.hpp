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

// Model abstraction for Markov chains driven by i.i.d. random Lipschitz
// maps, Z_{n+1} = Y_{n+1} Z_n, and the scalar weights derived from a map's
// Lipschitz constant and displacement.

#include <Eigen/Core>

#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "irlm/error.hpp"
#include "irlm/kernels.hpp"
#include "irlm/parallel.hpp"

namespace irlm {

inline constexpr int kMaxDim = 4;

using VecQ = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using MatQ =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// A point of the state space. Matrix models use simplex points whose
/// coordinates are positive and sum to one.
struct StatePoint {
  VecQ coords = VecQ::Zero(1);

  StatePoint() = default;
  explicit StatePoint(double x) : coords(VecQ::Constant(1, x)) {}
  explicit StatePoint(const VecQ& v) : coords(v) {}
  StatePoint(std::initializer_list<double> values);

  int dim() const { return static_cast<int>(coords.size()); }
  double operator[](int i) const { return coords[i]; }
  double& operator[](int i) { return coords[i]; }
  bool finite() const { return coords.allFinite(); }

  friend bool operator==(const StatePoint& a, const StatePoint& b) {
    return a.coords.size() == b.coords.size() && a.coords == b.coords;
  }
};

/// One concrete mapping g. Affine and functional maps use `a`/`b`
/// (gx = a x + b, resp. f(x) + b); matrix models store the nonnegative
/// matrix in `a`. `label` is a per-map scalar u(g) read by label
/// observables.
struct Map {
  MatQ a = MatQ::Identity(1, 1);
  VecQ b = VecQ::Zero(1);
  double label = 0.0;
  int atom = -1;  // index into a finite support, -1 once perturbed by noise
};

/// A drawn map together with its Lipschitz bound c(g) and d(g x0, x0).
struct MapSample {
  Map map;
  double lip = 0.0;
  double disp = 0.0;
};

struct WeightedMap {
  Map map;
  double weight = 0.0;
};

/// b <- b + sd * N(0, I) on every draw.
struct GaussianTranslation {
  double sd = 1.0;
};

/// Every nonzero entry of the matrix is multiplied by exp(sigma * N(0,1)).
struct LogNormalEntries {
  double sigma = 0.0;
};

using MapNoise = std::variant<std::monostate, GaussianTranslation, LogNormalEntries>;

/// The law pi of the random maps: a finite set of weighted atoms,
/// optionally perturbed by a continuous noise law (which makes it
/// generative).
class MapDistribution {
 public:
  MapDistribution() = default;
  explicit MapDistribution(std::vector<WeightedMap> atoms, MapNoise noise = {});

  bool finite_support() const {
    return std::holds_alternative<std::monostate>(noise_);
  }
  std::size_t support_size() const { return atoms_.size(); }
  const std::vector<WeightedMap>& atoms() const { return atoms_; }
  const MapNoise& noise() const { return noise_; }

  Map draw(Rng& rng) const;

  /// Same draw as `draw` for 1x1 affine atoms, returning (a, b, label)
  /// without building a Map. Consumes the same random numbers.
  void draw_scalar(Rng& rng, double& a, double& b, double& label) const;

 private:
  std::vector<WeightedMap> atoms_;
  std::vector<double> cumulative_;
  MapNoise noise_;
};

/// The observable xi(g, x). Built-in kinds are evaluated without a
/// function-call indirection; `custom` accepts any callable.
class Observable {
 public:
  enum class Kind {
    kZero,
    kConstant,
    kLinear,           // c0 + c_prev x_k + c_next (gx)_k + c_label u(g)
    kLabelTimesState,  // u(g) * (x_k - shift)
    kCocycle,          // ln ||g y||_1 for matrix models
    kCustom,
  };

  using CustomFn =
      std::function<double(const Map&, const StatePoint& x, const StatePoint& gx)>;

  static Observable zero();
  static Observable constant(double c);
  /// chi(x) = x_k - shift.
  static Observable state(int coord = 0, double shift = 0.0);
  static Observable label();
  static Observable linear(double c0, double c_prev, double c_next,
                           double c_label, int coord = 0);
  /// chi(x) - chi(gx) with chi(x) = x_k: a coboundary, so sigma^2 = 0.
  static Observable coboundary_of_state(int coord = 0);
  static Observable label_times_state(int coord = 0, double shift = 0.0);
  static Observable cocycle();
  static Observable custom(std::string name, CustomFn fn, bool needs_image);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  int coord() const { return coord_; }
  double shift() const { return shift_; }
  const kernels::LinearObservableCoeffs& coeffs() const { return coeffs_; }

  /// True when evaluation needs the image gx.
  bool needs_image() const;

  /// Uncentered value; `gx` is ignored unless needs_image().
  double evaluate(const Map& g, const StatePoint& x, const StatePoint& gx) const;

 private:
  Kind kind_ = Kind::kZero;
  std::string name_ = "zero";
  int coord_ = 0;
  double shift_ = 0.0;
  kernels::LinearObservableCoeffs coeffs_;
  CustomFn custom_;
  bool custom_needs_image_ = false;
};

/// Condition RS envelope for the uncentered observable:
///   |xi(g,x)| <= R(g) (1 + d(x,x0))^r
///   |xi(g,x) - xi(g,y)| <= S(g) d(x,y) (1 + d(x,x0) + d(y,x0))^s.
struct ObservableEnvelope {
  double r = 0.0;
  double s = 0.0;
  std::function<double(const Map&)> R = [](const Map&) { return 0.0; };
  std::function<double(const Map&)> S = [](const Map&) { return 0.0; };
};

enum class Family { kAffine, kFunctionalAR, kPositiveMatrix };

const char* to_string(Family family);

/// Relative inflation applied to sampled Lipschitz bounds.
inline constexpr double kLipInflation = 1.05;

/// Bundles the state space, the law pi, the base point x0, the observable
/// and its centering m. Immutable once built; share freely across threads.
class SystemModel {
 public:
  using FunctionalMap = std::function<VecQ(const VecQ&)>;

  struct Parts {
    Family family = Family::kAffine;
    std::string name;
    int dim = 1;
    double alpha = 1.0;
    MapDistribution pi;
    StatePoint x0;
    Observable xi;
    ObservableEnvelope envelope;
    double centering = 0.0;
    std::string centering_source = "none";
    FunctionalMap f;                  // functional AR only
    std::optional<double> f_lip;      // Euclidean Lipschitz constant of f
    std::size_t lip_pairs = 1000;     // pairs for sampled bounds
    std::uint64_t lip_seed = 0x5eed;  // seed for sampled bounds
  };

  explicit SystemModel(Parts parts);

  Family family() const { return p_->family; }
  const std::string& name() const { return p_->name; }
  int dim() const { return p_->dim; }
  double alpha() const { return p_->alpha; }
  const MapDistribution& pi() const { return p_->pi; }
  const StatePoint& x0() const { return p_->x0; }
  const Observable& observable() const { return p_->xi; }
  double centering() const { return p_->centering; }
  const std::string& centering_source() const { return p_->centering_source; }
  bool finite_support() const { return p_->pi.finite_support(); }

  /// True when c(g) is exact for every map; false when it is a sampled,
  /// inflated bound.
  bool exact_lipschitz() const;

  /// Envelope of the centered observable (R grows by |m|).
  ObservableEnvelope envelope() const;
  const ObservableEnvelope& raw_envelope() const { return p_->envelope; }

  SystemModel with_centering(double m, std::string source) const;
  SystemModel with_observable(Observable xi, ObservableEnvelope envelope) const;

  /// g(x); for matrix models the renormalized image g(y)/||g(y)||_1.
  StatePoint apply(const Map& g, const StatePoint& x) const;
  double distance(const StatePoint& x, const StatePoint& y) const;

  /// Uncentered and centered observable values.
  double xi_raw(const Map& g, const StatePoint& x) const;
  double xi(const Map& g, const StatePoint& x) const;

  /// (gx, centered xi(g, x)) with a single map application.
  std::pair<StatePoint, double> step(const Map& g, const StatePoint& x) const;

  Map draw(Rng& rng) const { return p_->pi.draw(rng); }
  MapSample sample(const Map& g) const;
  MapSample draw_sample(Rng& rng) const { return sample(draw(rng)); }

  /// The finite support with constants attached (empty when generative).
  const std::vector<MapSample>& atom_samples() const { return atom_samples_; }

  /// Lipschitz bound of g_n o ... o g_1 (maps[0] applied first).
  double composite_lip(std::span<const Map> maps) const;
  /// d(g_n ... g_1 x0, x0).
  double composite_disp(std::span<const Map> maps) const;

  /// Random state used by property checks.
  StatePoint random_point(Rng& rng, double scale = 3.0) const;

  /// Validates that x lies in the state space; throws kInvalidInput.
  void check_point(const StatePoint& x) const;

  /// Coefficients for the lockstep SIMD kernel when the model is a scalar
  /// affine chain with a linear observable; nullopt otherwise.
  std::optional<kernels::LinearObservableCoeffs> lockstep_coeffs() const;

  /// Sampled Lipschitz bound of an arbitrary composite (inflated by 5%).
  double sampled_lip(const std::function<StatePoint(const StatePoint&)>& fn,
                     std::uint64_t seed) const;

 private:
  double exact_or_sampled_lip(const Map& g) const;
  double matrix_lip(const MatQ& m, std::uint64_t seed) const;

  std::shared_ptr<const Parts> p_;
  std::vector<MapSample> atom_samples_;
};

/// 1 + c(g) + d(g x0, x0).
double delta_tilde(const MapSample& g);

/// 1 + lambda d(x, x0); lambda in (0, 1].
double p_lambda(const SystemModel& model, const StatePoint& x, double lambda0);

/// max{c(g), 1} + lambda d(g x0, x0); lambda in (0, 1].
double delta_lambda(const MapSample& g, double lambda0);

/// Operator 2-norm of a small matrix.
double operator_norm(const MatQ& a);

std::string describe(const StatePoint& x);

}  // namespace irlm
