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

#include "irlm/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "irlm/models.hpp"

namespace irlm::spectral {

namespace {
constexpr std::size_t kRowBlock = 64;
constexpr std::uint64_t kCharStream = 0xc4a2;
}  // namespace

// ---------------------------------------------------------------------------
// Grids

OperatorGrid OperatorGrid::line(double lo, double hi, std::size_t nodes) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorKind::kParameter, "line grid needs lo < hi");
  if (nodes < 2) throw Error(ErrorKind::kParameter, "line grid needs >= 2 nodes");
  OperatorGrid g;
  g.kind_ = Kind::kLine;
  g.lo_ = lo;
  g.hi_ = hi;
  g.resolution_ = nodes - 1;
  g.nodes_.reserve(nodes);
  for (std::size_t j = 0; j < nodes; ++j)
    g.nodes_.emplace_back(lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(nodes - 1));
  return g;
}

OperatorGrid OperatorGrid::simplex2(std::size_t nodes, double eps) {
  if (!(eps > 0.0 && eps < 0.25)) throw Error(ErrorKind::kParameter, "simplex eps out of range");
  OperatorGrid g = line(eps, 1.0 - eps, nodes);
  g.kind_ = Kind::kSimplex2;
  g.eps_ = eps;
  for (auto& x : g.nodes_) {
    const double s = x[0];
    x = StatePoint{s, 1.0 - s};
  }
  return g;
}

OperatorGrid OperatorGrid::simplex3(std::size_t resolution, double eps) {
  if (resolution < 1) throw Error(ErrorKind::kParameter, "simplex grid needs resolution >= 1");
  if (!(eps > 0.0 && eps < 0.1)) throw Error(ErrorKind::kParameter, "simplex eps out of range");
  OperatorGrid g;
  g.kind_ = Kind::kSimplex3;
  g.resolution_ = resolution;
  g.eps_ = eps;
  const double m = static_cast<double>(resolution);
  const double scale = 1.0 - 3.0 * eps;
  for (std::size_t i = 0; i <= resolution; ++i)
    for (std::size_t j = 0; i + j <= resolution; ++j) {
      const double b0 = static_cast<double>(i) / m, b1 = static_cast<double>(j) / m;
      g.nodes_.push_back(StatePoint{eps + scale * b0, eps + scale * b1,
                                    eps + scale * (1.0 - b0 - b1)});
    }
  return g;
}

std::size_t OperatorGrid::simplex_index(std::size_t i, std::size_t j) const {
  return i * (resolution_ + 1) - i * (i - 1) / 2 + j;
}

std::string OperatorGrid::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kLine: os << "line[" << lo_ << ", " << hi_ << "] x " << size(); break;
    case Kind::kSimplex2: os << "simplex2(eps=" << eps_ << ") x " << size(); break;
    case Kind::kSimplex3:
      os << "simplex3(eps=" << eps_ << ", resolution=" << resolution_ << ") x " << size();
      break;
  }
  return os.str();
}

OperatorGrid::Stencil OperatorGrid::locate(const StatePoint& y) const {
  Stencil st;
  if (kind_ == Kind::kLine || kind_ == Kind::kSimplex2) {
    double s = y[0];
    if (kind_ == Kind::kSimplex2) s = y[0] / (y[0] + y[1]);
    if (s < lo_) { s = lo_; st.clamped = true; }
    if (s > hi_) { s = hi_; st.clamped = true; }
    const double u = (s - lo_) / (hi_ - lo_) * static_cast<double>(resolution_);
    std::size_t j = static_cast<std::size_t>(std::floor(u));
    if (j >= resolution_) j = resolution_ - 1;
    const double f = std::clamp(u - static_cast<double>(j), 0.0, 1.0);
    st.count = 2;
    st.node = {j, j + 1, 0};
    st.weight = {1.0 - f, f, 0.0};
    return st;
  }
  // Barycentric coordinates on the shrunk simplex.
  const double scale = 1.0 - 3.0 * eps_;
  const double total = y[0] + y[1] + y[2];
  std::array<double, 3> b{};
  for (int c = 0; c < 3; ++c) {
    b[static_cast<std::size_t>(c)] = (y[c] / total - eps_) / scale;
    if (b[static_cast<std::size_t>(c)] < 0.0) {
      b[static_cast<std::size_t>(c)] = 0.0;
      st.clamped = true;
    }
  }
  const double bs = b[0] + b[1] + b[2];
  for (double& v : b) v /= bs;
  const double m = static_cast<double>(resolution_);
  const double u = b[0] * m, v = b[1] * m;
  std::size_t i = std::min(static_cast<std::size_t>(std::floor(u)), resolution_ - 1);
  std::size_t j = static_cast<std::size_t>(std::floor(v));
  if (i + j > resolution_ - 1) j = resolution_ - 1 - i;
  const double fu = std::clamp(u - static_cast<double>(i), 0.0, 1.0);
  const double fv = std::clamp(v - static_cast<double>(j), 0.0, 1.0);
  st.count = 3;
  if (fu + fv <= 1.0 || i + j + 2 > resolution_) {
    // Lower triangle; on the outer diagonal rounding can push fu + fv
    // slightly above 1, which the clamp below absorbs.
    const double w0 = std::max(0.0, 1.0 - fu - fv);
    const double norm = w0 + fu + fv;
    st.node = {simplex_index(i, j), simplex_index(i + 1, j), simplex_index(i, j + 1)};
    st.weight = {w0 / norm, fu / norm, fv / norm};
  } else {
    st.node = {simplex_index(i + 1, j), simplex_index(i, j + 1), simplex_index(i + 1, j + 1)};
    st.weight = {1.0 - fv, 1.0 - fu, fu + fv - 1.0};
  }
  return st;
}

OperatorGrid OperatorGrid::refined() const {
  switch (kind_) {
    case Kind::kLine: return line(lo_, hi_, 2 * resolution_ + 1);
    case Kind::kSimplex2: return simplex2(2 * resolution_ + 1, eps_);
    case Kind::kSimplex3: return simplex3(2 * resolution_, eps_);
  }
  return *this;
}

std::vector<double> OperatorGrid::sample(const std::function<double(const StatePoint&)>& f) const {
  std::vector<double> v(nodes_.size());
  for (std::size_t j = 0; j < nodes_.size(); ++j) v[j] = f(nodes_[j]);
  return v;
}

double OperatorGrid::interpolate(const std::vector<double>& values, const StatePoint& y) const {
  const Stencil st = locate(y);
  double s = 0.0;
  for (int k = 0; k < st.count; ++k)
    s += st.weight[static_cast<std::size_t>(k)] * values[st.node[static_cast<std::size_t>(k)]];
  return s;
}

namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, v.size() - 1);
  return v[i] + (pos - static_cast<double>(i)) * (v[j] - v[i]);
}

}  // namespace

OperatorGrid default_grid(const SystemModel& model, const simulate::EmpiricalMeasure& nu,
                          const GridOptions& o) {
  if (model.family() == Family::kPositiveMatrix) {
    if (model.dim() == 2) return OperatorGrid::simplex2(o.nodes);
    if (model.dim() == 3) return OperatorGrid::simplex3(o.simplex_resolution);
    throw Error(ErrorKind::kUnsupported, "operator grids cover simplices of dimension 2 and 3 only");
  }
  if (model.dim() != 1)
    throw Error(ErrorKind::kUnsupported,
                "operator grids need a one-dimensional state space; use the Monte Carlo routes");
  if (o.window) return OperatorGrid::line(o.window->first, o.window->second, o.nodes);
  if (nu.points.empty()) throw Error(ErrorKind::kParameter, "empty nu_hat for the grid window");
  std::vector<double> xs;
  xs.reserve(nu.points.size());
  for (const auto& p : nu.points) xs.push_back(p[0]);
  double lo = quantile(xs, o.lower_quantile), hi = quantile(xs, o.upper_quantile);
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = o.padding * (hi - lo);
  return OperatorGrid::line(lo - pad, hi + pad, o.nodes);
}

double window_mass(const OperatorGrid& grid, const simulate::EmpiricalMeasure& nu) {
  double in = 0.0, total = 0.0;
  for (std::size_t i = 0; i < nu.points.size(); ++i) {
    const double w = nu.weights.empty() ? 1.0 : nu.weights[i];
    total += w;
    if (!grid.locate(nu.points[i]).clamped) in += w;
  }
  return total > 0.0 ? in / total : 0.0;
}

namespace {
std::vector<double> push_forward(const OperatorGrid& grid, const std::vector<StatePoint>& pts,
                                 const std::vector<double>& wts) {
  std::vector<double> w(grid.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double m = wts.empty() ? 1.0 : wts[i];
    const auto st = grid.locate(pts[i]);
    for (int k = 0; k < st.count; ++k)
      w[st.node[static_cast<std::size_t>(k)]] += m * st.weight[static_cast<std::size_t>(k)];
    total += m;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::kParameter, "measure has no mass");
  for (double& x : w) x /= total;
  return w;
}
}  // namespace

std::vector<double> node_weights(const OperatorGrid& grid, const simulate::EmpiricalMeasure& nu) {
  return push_forward(grid, nu.points, nu.weights);
}

std::vector<double> node_weights(const OperatorGrid& grid, const simulate::InitialLaw& mu) {
  return push_forward(grid, mu.points(), mu.weights());
}

// ---------------------------------------------------------------------------
// Matrices

kernels::SplitComplexMatrixView FourierMatrix::view() const {
  return {n, n, re, im};
}

void FourierMatrix::apply(const CVec& x, CVec& y) const {
  if (x.size() != n) throw Error(ErrorKind::kParameter, "matvec size mismatch");
  y.re.assign(n, 0.0);
  y.im.assign(n, 0.0);
  const std::size_t blocks = (n + kRowBlock - 1) / kRowBlock;
  parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
    const std::size_t r0 = b0 * kRowBlock, r1 = std::min(n, b1 * kRowBlock);
    kernels::SplitComplexMatrixView v{r1 - r0, n,
                                      std::span<const double>(re).subspan(r0 * n, (r1 - r0) * n),
                                      std::span<const double>(im).subspan(r0 * n, (r1 - r0) * n)};
    kernels::cmatvec(v, x.re, x.im, std::span<double>(y.re).subspan(r0, r1 - r0),
                     std::span<double>(y.im).subspan(r0, r1 - r0));
  });
}

double FourierMatrix::max_row_sum_error() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    cplx s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += at(r, c);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

FourierMatrix build_operator(const SystemModel& model, const OperatorGrid& grid, double t,
                             int power) {
  if (!model.finite_support())
    throw Error(ErrorKind::kUnsupported,
                "operator routes need a finite-support map law; use the Monte Carlo routes");
  if (power < 0) throw Error(ErrorKind::kParameter, "kernel power must be >= 0");
  if (grid.kind() == OperatorGrid::Kind::kLine && model.dim() != 1)
    throw Error(ErrorKind::kUnsupported, "line grids need a one-dimensional state space");
  if (grid.kind() != OperatorGrid::Kind::kLine && model.family() != Family::kPositiveMatrix)
    throw Error(ErrorKind::kUnsupported, "simplex grids need a matrix model");
  const std::size_t n = grid.size();
  FourierMatrix a;
  a.t = t;
  a.power = power;
  a.n = n;
  a.re.assign(n * n, 0.0);
  a.im.assign(n * n, 0.0);
  const auto& atoms = model.pi().atoms();
  std::vector<double> leak(n, 0.0);
  std::vector<std::size_t> clamped(n, 0);
  parallel_for(n, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      const StatePoint& x = grid.nodes()[r];
      for (const auto& atom : atoms) {
        auto [gx, xi] = model.step(atom.map, x);
        cplx w = atom.weight * std::exp(cplx(0.0, t * xi));
        for (int k = 0; k < power; ++k) w *= cplx(0.0, xi);
        const auto st = grid.locate(gx);
        if (st.clamped) {
          leak[r] += atom.weight;
          ++clamped[r];
        }
        for (int k = 0; k < st.count; ++k) {
          const std::size_t c = st.node[static_cast<std::size_t>(k)];
          const double s = st.weight[static_cast<std::size_t>(k)];
          a.re[r * n + c] += s * w.real();
          a.im[r * n + c] += s * w.imag();
        }
      }
    }
  });
  for (std::size_t r = 0; r < n; ++r) {
    a.leak_mean += leak[r] / static_cast<double>(n);
    a.leak_max = std::max(a.leak_max, leak[r]);
    a.clamped_images += clamped[r];
  }
  return a;
}

// ---------------------------------------------------------------------------
// Eigenvalues

namespace {

cplx dot(const CVec& a, const CVec& b) {  // a^H b
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double norm2(const CVec& a) {
  return std::sqrt(kernels::sum_squares(a.re) + kernels::sum_squares(a.im));
}

void scale(CVec& a, cplx s) {
  for (std::size_t i = 0; i < a.size(); ++i) a.set(i, a[i] * s);
}

CVec start_vector(std::size_t n, double phase) {
  CVec x(n);
  for (std::size_t j = 0; j < n; ++j) x.re[j] = 1.0 + 0.01 * std::sin(phase * static_cast<double>(j + 1));
  return x;
}

/// Ritz values of A on span{x, Ax}.
std::array<cplx, 2> ritz_pair(const FourierMatrix& a, const CVec& x) {
  CVec ax;
  a.apply(x, ax);
  const cplx h11 = dot(x, ax);
  CVec q2 = ax;
  for (std::size_t i = 0; i < q2.size(); ++i) q2.set(i, q2[i] - h11 * x[i]);
  const double nq = norm2(q2);
  if (nq < 1e-300) return {h11, cplx(0.0)};
  scale(q2, 1.0 / nq);
  CVec aq2;
  a.apply(q2, aq2);
  Eigen::Matrix2cd h;
  h << h11, dot(x, aq2), dot(q2, ax), dot(q2, aq2);
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(h);
  return {es.eigenvalues()(0), es.eigenvalues()(1)};
}

struct PowerResult {
  cplx lambda;
  CVec x;
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;
  double growth = 0.0;  // mean log growth over the second half
};

template <class Apply>
PowerResult power_iterate(Apply&& apply, CVec x, std::size_t max_iter, double tol) {
  PowerResult pr;
  double nx = norm2(x);
  scale(x, 1.0 / nx);
  CVec y;
  std::vector<double> logs;
  for (std::size_t k = 1; k <= max_iter; ++k) {
    apply(x, y);
    const cplx lam = dot(x, y);
    double res2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) res2 += std::norm(y[i] - lam * x[i]);
    pr.lambda = lam;
    pr.residual = std::sqrt(res2);
    pr.iterations = k;
    const double ny = norm2(y);
    if (ny == 0.0) {
      pr.lambda = 0.0;
      pr.converged = true;
      pr.growth = -INFINITY;
      return pr;
    }
    logs.push_back(std::log(ny));
    if (pr.residual <= tol * std::max(1.0, std::abs(lam))) {
      pr.converged = true;
      scale(y, 1.0 / ny);
      pr.x = std::move(y);
      pr.growth = std::log(std::abs(lam));
      return pr;
    }
    scale(y, 1.0 / ny);
    std::swap(x, y);
  }
  pr.x = std::move(x);
  const std::size_t half = logs.size() / 2;
  pr.growth = std::accumulate(logs.begin() + static_cast<long>(half), logs.end(), 0.0) /
              static_cast<double>(logs.size() - half);
  return pr;
}

}  // namespace

EigenResult leading_eigen(const FourierMatrix& a, const std::vector<double>& weights,
                          const EigenOptions& o) {
  if (weights.size() != a.n) throw Error(ErrorKind::kParameter, "node weights size mismatch");
  auto apply = [&](const CVec& x, CVec& y) { a.apply(x, y); };
  PowerResult pr = power_iterate(apply, start_vector(a.n, 0.37), o.max_iter, o.tolerance);
  EigenResult res;
  res.iterations = pr.iterations;
  res.residual = pr.residual;
  res.converged = pr.converged;
  if (!pr.converged) {
    const auto ritz = ritz_pair(a, pr.x);
    const double m0 = std::abs(ritz[0]), m1 = std::abs(ritz[1]);
    if (std::abs(m0 - m1) <= o.ambiguity * std::max(m0, m1)) {
      std::ostringstream os;
      os << "ambiguous dominance at t = " << a.t << ": candidates " << ritz[0] << " and "
         << ritz[1];
      throw Error(ErrorKind::kAmbiguousDominance, os.str());
    }
    spdlog::warn("power iteration at t = {} stopped after {} steps (residual {:.3g})", a.t,
                 pr.iterations, pr.residual);
  }
  res.lambda = pr.lambda;
  // Normalize so that <nu_hat, v> = 1.
  cplx nv = 0.0;
  for (std::size_t j = 0; j < a.n; ++j) nv += weights[j] * pr.x[j];
  if (std::abs(nv) < 1e-12)
    throw Error(ErrorKind::kNumerical, "eigenvector is orthogonal to the node weights");
  res.v = pr.x;
  scale(res.v, 1.0 / nv);
  if (!o.second) return res;

  // Wielandt deflation B = A - lambda v w^T; since w^T v = 1 the spectrum
  // of B is that of A with lambda replaced by 0.
  const cplx lam = res.lambda;
  auto deflated = [&](const CVec& x, CVec& y) {
    a.apply(x, y);
    cplx wx = 0.0;
    for (std::size_t j = 0; j < a.n; ++j) wx += weights[j] * x[j];
    for (std::size_t j = 0; j < a.n; ++j) y.set(j, y[j] - lam * wx * res.v[j]);
  };
  CVec z(a.n);
  for (std::size_t j = 0; j < a.n; ++j) {
    const double s = static_cast<double>(j);
    z.re[j] = std::cos(0.7 * s + 0.3) + 0.5 * std::sin(1.9 * s);
    z.im[j] = 0.25 * std::cos(1.3 * s);
  }
  const PowerResult sec = power_iterate(deflated, z, o.deflation_iter, 1e-10);
  res.second_converged = sec.converged;
  res.second_modulus = sec.converged ? std::abs(sec.lambda) : std::exp(sec.growth);
  res.gap = std::abs(res.lambda) - res.second_modulus;
  return res;
}

double dominant_modulus(const FourierMatrix& a, std::size_t iters) {
  auto apply = [&](const CVec& x, CVec& y) { a.apply(x, y); };
  const PowerResult pr = power_iterate(apply, start_vector(a.n, 0.37), iters, 1e-12);
  return pr.converged ? std::abs(pr.lambda) : std::exp(pr.growth);
}

// ---------------------------------------------------------------------------
// Expansion of lambda(t)

ExpansionResult lambda_expansion(const SystemModel& model, const OperatorGrid& grid,
                                 const std::vector<double>& weights, const ExpansionOptions& o) {
  ExpansionResult out;
  const double h = o.h.value_or(0.05 / std::sqrt(std::max(0.0, o.sigma2_prior) + 1.0));
  if (!(h > 0.0)) throw Error(ErrorKind::kParameter, "finite-difference step must be > 0");
  out.h = h;
  EigenOptions eo = o.eigen;
  eo.second = false;
  auto lambda_at = [&](double t) {
    return leading_eigen(build_operator(model, grid, t), weights, eo).lambda;
  };
  const cplx l0 = lambda_at(0.0);
  const cplx lp1 = lambda_at(h), lm1 = lambda_at(-h);
  const cplx lp2 = lambda_at(h / 2), lm2 = lambda_at(-h / 2);
  const cplx d1a = (lp1 - lm1) / (2.0 * h), d1b = (lp2 - lm2) / h;
  const cplx d2a = (lp1 - 2.0 * l0 + lm1) / (h * h);
  const cplx d2b = (lp2 - 2.0 * l0 + lm2) / (h * h / 4.0);
  const cplx d1 = (4.0 * d1b - d1a) / 3.0;
  const cplx d2 = (4.0 * d2b - d2a) / 3.0;
  out.m_pair = {d1a.imag(), d1b.imag()};
  out.sigma2_pair = {-d2a.real(), -d2b.real()};
  out.m_hat = d1.imag();
  out.sigma2_hat = -d2.real();
  const double gap2 = std::abs(out.sigma2_pair[0] - out.sigma2_pair[1]);
  if (gap2 > o.richardson_tolerance * std::abs(out.sigma2_pair[1]) + 1e-8) {
    std::ostringstream os;
    os << "second-derivative estimates at h = " << h << " and h/2 disagree: "
       << out.sigma2_pair[0] << " vs " << out.sigma2_pair[1] << "; reduce the step";
    throw Error(ErrorKind::kNumerical, os.str());
  }
  out.max_modulus = std::max({std::abs(l0), std::abs(lp1), std::abs(lm1), std::abs(lp2), std::abs(lm2)});
  out.max_conjugate_error = std::max(std::abs(lm1 - std::conj(lp1)), std::abs(lm2 - std::conj(lp2)));
  for (double t : o.t_grid) {
    ExpansionPoint p;
    p.t = t;
    EigenOptions full = o.eigen;
    full.second = true;
    const EigenResult e = leading_eigen(build_operator(model, grid, t), weights, full);
    p.lambda = t == 0.0 ? l0 : e.lambda;
    p.gap = e.gap;
    const cplx model_value(1.0 - out.sigma2_hat * t * t / 2.0, out.m_hat * t);
    p.remainder_ratio = t == 0.0 ? 0.0 : std::abs(p.lambda - model_value) / std::pow(std::abs(t), 3.0);
    out.max_modulus = std::max(out.max_modulus, std::abs(p.lambda));
    out.table.push_back(p);
  }
  for (const auto& p : out.table)
    for (const auto& q : out.table)
      if (p.t != 0.0 && q.t == -p.t)
        out.max_conjugate_error = std::max(out.max_conjugate_error, std::abs(q.lambda - std::conj(p.lambda)));
  return out;
}

// ---------------------------------------------------------------------------
// Derivative kernels

DerivativeKernels derivative_kernels(const SystemModel& model, const OperatorGrid& grid, int kmax,
                                     const std::vector<double>& t_ladder) {
  if (kmax < 1 || kmax > 3) throw Error(ErrorKind::kParameter, "derivative order must be 1..3");
  DerivativeKernels out;
  for (int k = 1; k <= kmax; ++k) out.L.push_back(build_operator(model, grid, 0.0, k));
  if (t_ladder.empty()) return out;
  const FourierMatrix p0 = build_operator(model, grid, 0.0);
  const std::size_t nn = p0.n * p0.n;
  for (double t : t_ladder) {
    const FourierMatrix pt = build_operator(model, grid, t);
    std::vector<cplx> rem(nn);
    for (std::size_t e = 0; e < nn; ++e) rem[e] = cplx(pt.re[e] - p0.re[e], pt.im[e] - p0.im[e]);
    double fact = 1.0;
    for (int k = 1; k <= kmax; ++k) {
      fact *= static_cast<double>(k);
      const double c = std::pow(t, k) / fact;
      const auto& lk = out.L[static_cast<std::size_t>(k - 1)];
      double worst = 0.0;
      for (std::size_t e = 0; e < nn; ++e) {
        rem[e] -= c * cplx(lk.re[e], lk.im[e]);
        worst = std::max(worst, std::abs(rem[e]));
      }
      out.residuals.push_back({k, t, worst, worst / std::pow(std::abs(t), k)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo cross-check

namespace {
cplx operator_side(const SystemModel& model, const OperatorGrid& grid,
                   const simulate::InitialLaw& mu,
                   const std::function<double(const StatePoint&)>& f, double t, std::size_t n) {
  const FourierMatrix a = build_operator(model, grid, t);
  CVec y(grid.size());
  y.re = grid.sample(f);
  CVec tmp;
  for (std::size_t k = 0; k < n; ++k) {
    a.apply(y, tmp);
    std::swap(y, tmp);
  }
  const auto w = node_weights(grid, mu);
  cplx s = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) s += w[j] * y[j];
  return s;
}
}  // namespace

CharCheck char_function_check(const SystemModel& model, const OperatorGrid& grid,
                              const simulate::InitialLaw& mu,
                              const std::function<double(const StatePoint&)>& f, double t,
                              std::size_t n, std::size_t paths, std::uint64_t seed, bool refine) {
  if (paths < 2) throw Error(ErrorKind::kParameter, "char_function_check needs paths >= 2");
  CharCheck out;
  out.operator_value = operator_side(model, grid, mu, f, t, n);
  if (refine) {
    const cplx fine = operator_side(model, grid.refined(), mu, f, t, n);
    out.interpolation_allowance = std::abs(fine - out.operator_value);
  }
  const std::vector<double> fv = grid.sample(f);
  std::vector<double> re(paths), im(paths);
  parallel_for(paths, [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      Rng rng = make_rng(stream_seed(seed, kCharStream), p);
      StatePoint z = mu.draw(rng);
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        auto [next, xi] = model.step(model.draw(rng), z);
        s += xi;
        z = std::move(next);
      }
      const cplx v = grid.interpolate(fv, z) * std::exp(cplx(0.0, t * s));
      re[p] = v.real();
      im[p] = v.imag();
    }
  });
  const Estimate er = mean_estimate(re), ei = mean_estimate(im);
  out.mc_value = cplx(er.value, ei.value);
  out.se_re = er.se;
  out.se_im = ei.se;
  const double denom = std::sqrt(er.se * er.se + ei.se * ei.se +
                                 out.interpolation_allowance * out.interpolation_allowance);
  const double gap = std::abs(out.mc_value - out.operator_value);
  out.z = denom > 0.0 ? gap / denom : (gap <= 1e-10 ? 0.0 : INFINITY);
  return out;
}

// ---------------------------------------------------------------------------
// Peripheral spectrum

RationalCheck rational_ratio_check(double rho1, double rho2, long long max_q, double tol) {
  if (!(rho1 > 0.0) || !(rho2 > 0.0))
    throw Error(ErrorKind::kParameter, "spectral radii must be positive");
  RationalCheck rc;
  rc.rho1 = rho1;
  rc.rho2 = rho2;
  const double l1 = std::log(rho1), l2 = std::log(rho2);
  if (l1 == 0.0) {
    rc.status = "degenerate";
    rc.ratio = NAN;
    return rc;
  }
  const double x = l2 / l1;
  rc.ratio = x;
  // Convergents p_k / q_k of the continued fraction of x.
  long long p_prev = 1, q_prev = 0, p = static_cast<long long>(std::floor(x)), q = 1;
  double frac = x - std::floor(x);
  for (int iter = 0; iter < 64 && q <= max_q; ++iter) {
    if (std::abs(static_cast<double>(q) * x - static_cast<double>(p)) < tol) {
      rc.fraction = std::make_pair(p, q);
      rc.status = "rational";
      return rc;
    }
    if (frac < 1e-300) break;
    const double inv = 1.0 / frac;
    const long long a = static_cast<long long>(std::floor(inv));
    frac = inv - std::floor(inv);
    const long long pn = a * p + p_prev, qn = a * q + q_prev;
    p_prev = p;
    q_prev = q;
    p = pn;
    q = qn;
  }
  rc.status = "none-found";
  return rc;
}

std::vector<RationalCheck> matrix_rational_checks(const SystemModel& model) {
  std::vector<RationalCheck> out;
  if (model.family() != Family::kPositiveMatrix) return out;
  std::vector<MatQ> pos;
  const auto& atoms = model.pi().atoms();
  for (const auto& a : atoms)
    if (models::strictly_positive(a.map.a)) pos.push_back(a.map.a);
  if (pos.size() < 2) {
    for (const auto& a : atoms)
      for (const auto& b : atoms) {
        const MatQ m = b.map.a * a.map.a;
        if (models::strictly_positive(m)) pos.push_back(m);
      }
  }
  std::vector<double> radii;
  for (const auto& m : pos) {
    const double r = models::perron_radius(m);
    bool dup = false;
    for (double s : radii) dup = dup || std::abs(s - r) <= 1e-12 * r;
    if (!dup) radii.push_back(r);
  }
  for (std::size_t i = 0; i < radii.size(); ++i)
    for (std::size_t j = i + 1; j < radii.size(); ++j)
      out.push_back(rational_ratio_check(radii[i], radii[j]));
  return out;
}

PeripheralScan peripheral_scan(const SystemModel& model, const OperatorGrid& grid,
                               const std::vector<double>& t_values, double margin) {
  PeripheralScan scan;
  for (double t : t_values) {
    if (t == 0.0) throw Error(ErrorKind::kParameter, "peripheral scan excludes t = 0");
    ScanPoint sp;
    sp.t = t;
    try {
      sp.modulus = dominant_modulus(build_operator(model, grid, t));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kUnsupported) throw;
      sp.note = e.what();
      sp.modulus = NAN;
    }
    if (std::isfinite(sp.modulus) && sp.modulus > scan.max_modulus) {
      scan.max_modulus = sp.modulus;
      scan.worst_t = t;
    }
    scan.points.push_back(sp);
  }
  scan.verdict = scan.max_modulus < 1.0 - margin ? "nonarithmetic-consistent" : "arithmetic-suspect";
  if (model.family() == Family::kPositiveMatrix) {
    scan.rational = matrix_rational_checks(model);
    if (scan.rational.empty()) {
      scan.rational_verdict = "unavailable";
    } else {
      bool cleared = false;
      for (const auto& r : scan.rational) cleared = cleared || r.status == "none-found";
      scan.rational_verdict = cleared ? "cleared" : "arithmetic-suspect";
    }
  }
  return scan;
}

}  // namespace irlm::spectral
