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

// Discretized Fourier kernels
//   P(t) f(x) = sum_i p_i exp(i t xi(g_i, x)) f(g_i x)
// of a finite-support model on a node grid, their dominant eigenvalue
// lambda(t), the Taylor coefficients of lambda at 0 and consistency checks
// against Monte Carlo.
//
// f(g_i x) is replaced by the interpolant of f through the nodes
// (piecewise linear on a line window, barycentric on a structured
// triangulation of the simplex). Interpolation weights are nonnegative, so
// P(0) is exactly row-stochastic. Images outside the window are clamped to
// its boundary and the clamped mass is reported as leak.

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irlm/core.hpp"
#include "irlm/kernels.hpp"
#include "irlm/simulate.hpp"

namespace irlm::spectral {

using cplx = std::complex<double>;

/// Complex vector with split storage, as consumed by the matvec kernel.
struct CVec {
  std::vector<double> re;
  std::vector<double> im;

  CVec() = default;
  explicit CVec(std::size_t n) : re(n, 0.0), im(n, 0.0) {}
  std::size_t size() const { return re.size(); }
  cplx operator[](std::size_t i) const { return {re[i], im[i]}; }
  void set(std::size_t i, cplx v) { re[i] = v.real(); im[i] = v.imag(); }
};

class OperatorGrid {
 public:
  enum class Kind { kLine, kSimplex2, kSimplex3 };

  /// Interpolation stencil of a point: up to three nodes with weights.
  struct Stencil {
    std::array<std::size_t, 3> node{};
    std::array<double, 3> weight{};
    int count = 0;
    bool clamped = false;
  };

  /// `nodes` equispaced nodes on [lo, hi] (1D state spaces).
  static OperatorGrid line(double lo, double hi, std::size_t nodes);
  /// The 2-simplex edge {(s, 1 - s): eps <= s <= 1 - eps}.
  static OperatorGrid simplex2(std::size_t nodes, double eps = 1e-6);
  /// The shrunk 3-simplex {y_i >= eps} with `resolution` cells per edge.
  static OperatorGrid simplex3(std::size_t resolution, double eps = 1e-6);

  Kind kind() const { return kind_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<StatePoint>& nodes() const { return nodes_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t resolution() const { return resolution_; }
  double eps() const { return eps_; }
  std::string describe() const;

  Stencil locate(const StatePoint& y) const;

  /// Same window, twice the resolution.
  OperatorGrid refined() const;

  /// Values of f at the nodes.
  std::vector<double> sample(const std::function<double(const StatePoint&)>& f) const;
  /// Interpolant of node values at y.
  double interpolate(const std::vector<double>& values, const StatePoint& y) const;

 private:
  std::size_t simplex_index(std::size_t i, std::size_t j) const;

  Kind kind_ = Kind::kLine;
  std::vector<StatePoint> nodes_;
  double lo_ = 0.0, hi_ = 1.0;
  std::size_t resolution_ = 0;
  double eps_ = 0.0;
};

struct GridOptions {
  std::size_t nodes = 513;           // line and 2-simplex grids
  std::size_t simplex_resolution = 40;
  double lower_quantile = 0.005;
  double upper_quantile = 0.995;
  double padding = 0.10;             // fraction of the quantile range
  std::optional<std::pair<double, double>> window;  // explicit line window
};

/// Default grid for a model: a quantile window of nu_hat on the line, the
/// simplex for matrix models. Throws kUnsupported for multi-dimensional
/// affine or functional models.
OperatorGrid default_grid(const SystemModel& model, const simulate::EmpiricalMeasure& nu_hat,
                          const GridOptions& options = {});

/// Mass of nu_hat inside the window (before clamping).
double window_mass(const OperatorGrid& grid, const simulate::EmpiricalMeasure& nu_hat);

/// nu_hat pushed onto the nodes through the interpolation stencils.
std::vector<double> node_weights(const OperatorGrid& grid, const simulate::EmpiricalMeasure& nu_hat);
std::vector<double> node_weights(const OperatorGrid& grid, const simulate::InitialLaw& mu);

class FourierMatrix {
 public:
  double t = 0.0;
  int power = 0;            // weight (i xi)^power; 0 for P(t)
  std::size_t n = 0;
  std::vector<double> re;   // row-major n x n
  std::vector<double> im;
  double leak_mean = 0.0;   // average clamped mass per row
  double leak_max = 0.0;
  std::size_t clamped_images = 0;

  cplx at(std::size_t r, std::size_t c) const { return {re[r * n + c], im[r * n + c]}; }
  kernels::SplitComplexMatrixView view() const;

  /// y = A x, parallel over row blocks.
  void apply(const CVec& x, CVec& y) const;
  /// Largest row sum of |entries| deviation from 1 (meaningful at t = 0).
  double max_row_sum_error() const;
};

/// P(t) (power = 0) or the kernel with weight (i xi)^power e^{i t xi}.
/// Throws kUnsupported for generative laws.
FourierMatrix build_operator(const SystemModel& model, const OperatorGrid& grid, double t,
                             int power = 0);

struct EigenOptions {
  double tolerance = 1e-13;          // Rayleigh residual for convergence
  std::size_t max_iter = 20000;
  std::size_t deflation_iter = 3000;
  double ambiguity = 1e-3;           // relative modulus gap treated as a tie
  bool second = true;                // estimate the second eigenvalue
};

struct EigenResult {
  cplx lambda;
  CVec v;                            // normalized so sum_j w_j v_j = 1
  double second_modulus = 0.0;
  double gap = 0.0;
  bool second_converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Dominant eigenpair by power iteration with Rayleigh quotients; the gap
/// comes from power iteration on the Wielandt deflation A - lambda v w^T.
/// Throws kAmbiguousDominance when two eigenvalues of nearly equal modulus
/// compete.
EigenResult leading_eigen(const FourierMatrix& a, const std::vector<double>& weights,
                          const EigenOptions& options = {});

/// Spectral radius from the growth rate of ||A^k x||.
double dominant_modulus(const FourierMatrix& a, std::size_t iters = 2000);

struct ExpansionPoint {
  double t = 0.0;
  cplx lambda;
  double remainder_ratio = 0.0;  // |lambda - (1 + i m t - s2 t^2/2)| / |t|^3
  double gap = 0.0;              // |lambda| - |second eigenvalue|
};

struct ExpansionResult {
  double m_hat = 0.0;
  double sigma2_hat = 0.0;
  double h = 0.0;
  std::array<double, 2> sigma2_pair{};  // estimates at steps h and h/2
  std::array<double, 2> m_pair{};
  std::vector<ExpansionPoint> table;
  double max_modulus = 0.0;
  double max_conjugate_error = 0.0;     // |lambda(-t) - conj lambda(t)|
};

struct ExpansionOptions {
  std::optional<double> h;              // default 0.05 / sqrt(sigma2_prior + 1)
  double sigma2_prior = 0.0;
  std::vector<double> t_grid;           // remainder table; symmetric
  double richardson_tolerance = 0.05;   // relative gap of the step pair
  EigenOptions eigen;
};

/// m = Im lambda'(0) and sigma^2 = -Re lambda''(0) by central differences
/// at h and h/2 combined by Richardson extrapolation.
ExpansionResult lambda_expansion(const SystemModel& model, const OperatorGrid& grid,
                                 const std::vector<double>& weights,
                                 const ExpansionOptions& options = {});

struct TaylorRow {
  int order = 0;
  double t = 0.0;
  double residual = 0.0;     // max entry of P(t) - P - sum_k t^k/k! L_k
  double normalized = 0.0;   // residual / |t|^order
};

struct DerivativeKernels {
  std::vector<FourierMatrix> L;  // L[k-1] = L_k
  std::vector<TaylorRow> residuals;
};

DerivativeKernels derivative_kernels(const SystemModel& model, const OperatorGrid& grid,
                                     int kmax, const std::vector<double>& t_ladder = {});

struct CharCheck {
  cplx operator_value;
  cplx mc_value;
  double se_re = 0.0;
  double se_im = 0.0;
  double interpolation_allowance = 0.0;
  double z = 0.0;
};

/// Compares mu(P(t)^n f) with the Monte Carlo mean of f(Z_n) exp(i t S_n)
/// from Z_0 ~ mu. f enters through its interpolant on the grid; the
/// allowance is the change of the operator value on the refined grid.
CharCheck char_function_check(const SystemModel& model, const OperatorGrid& grid,
                              const simulate::InitialLaw& mu,
                              const std::function<double(const StatePoint&)>& f, double t,
                              std::size_t n, std::size_t paths, std::uint64_t seed,
                              bool refine = true);

struct RationalCheck {
  double rho1 = 0.0, rho2 = 0.0;
  double ratio = 0.0;                   // ln rho2 / ln rho1
  std::optional<std::pair<long long, long long>> fraction;  // p, q
  std::string status;                   // "rational", "none-found", "degenerate"
};

/// Smallest q <= max_q (continued-fraction convergents) with
/// |q x - p| < tol for x = ln rho2 / ln rho1.
RationalCheck rational_ratio_check(double rho1, double rho2, long long max_q = 1000000,
                                   double tol = 1e-12);

struct ScanPoint {
  double t = 0.0;
  double modulus = 0.0;
  std::string note;
};

struct PeripheralScan {
  std::vector<ScanPoint> points;
  double max_modulus = 0.0;
  double worst_t = 0.0;
  std::string verdict;                  // "nonarithmetic-consistent" or "arithmetic-suspect"
  std::vector<RationalCheck> rational;  // matrix models
  std::string rational_verdict;         // "", "cleared", "arithmetic-suspect", "unavailable"
};

PeripheralScan peripheral_scan(const SystemModel& model, const OperatorGrid& grid,
                               const std::vector<double>& t_values, double margin = 1e-3);

/// Rational-independence check on the Perron radii of the strictly
/// positive atoms of a matrix model.
std::vector<RationalCheck> matrix_rational_checks(const SystemModel& model);

}  // namespace irlm::spectral
