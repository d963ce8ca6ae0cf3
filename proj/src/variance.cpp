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

#include "irlm/variance.hpp"

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace irlm::variance {

namespace {
constexpr std::uint64_t kPlanStream = 0x91a;
constexpr std::uint64_t kPoissonStream = 0x9015;
constexpr std::uint64_t kThetaStream = 0x7e7a;
constexpr std::uint64_t kFitStream = 0xc0b;
}  // namespace

Estimate theta_eval(const SystemModel& model, const StatePoint& x, std::size_t nsamples,
                    std::uint64_t seed) {
  model.check_point(x);
  if (model.finite_support()) {
    Estimate e;
    e.exact = true;
    e.count = model.pi().atoms().size();
    for (const auto& a : model.pi().atoms()) e.value += a.weight * model.xi(a.map, x);
    return e;
  }
  if (nsamples < 2) throw Error(ErrorKind::kParameter, "theta_eval needs nsamples >= 2");
  Rng rng = make_rng(seed, kThetaStream);
  std::vector<double> v(nsamples);
  for (auto& s : v) s = model.xi(model.draw(rng), x);
  return mean_estimate(v);
}

std::vector<StatePoint> PoissonPlan::eval_points() const {
  std::vector<StatePoint> pts = support;
  pts.insert(pts.end(), images.begin(), images.end());
  return pts;
}

PoissonPlan poisson_plan(const SystemModel& model, const simulate::EmpiricalMeasure& nu,
                         std::uint64_t seed) {
  if (nu.points.empty()) throw Error(ErrorKind::kParameter, "empty nu_hat");
  PoissonPlan plan;
  plan.support = nu.points;
  plan.chains = std::max<std::size_t>(1, nu.chains);
  const std::size_t m = nu.points.size();
  const std::size_t len = std::max<std::size_t>(1, m / plan.chains);
  double wsum = 0.0;
  for (std::size_t i = 0; i < m; ++i) wsum += nu.weights.empty() ? 1.0 : nu.weights[i];
  plan.support_weight.resize(m);
  plan.chain_of.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    plan.support_weight[i] = (nu.weights.empty() ? 1.0 : nu.weights[i]) / wsum;
    plan.chain_of[i] = std::min(i / len, plan.chains - 1);
  }
  plan.exact_pi = model.finite_support();
  const std::size_t k = plan.exact_pi ? model.pi().atoms().size() : 1;
  plan.pair_point.resize(m * k);
  plan.pair_weight.resize(m * k);
  plan.pair_xi.resize(m * k);
  plan.images.resize(m * k);
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (plan.exact_pi) {
        const auto& atoms = model.pi().atoms();
        for (std::size_t a = 0; a < k; ++a) {
          auto [gx, xi] = model.step(atoms[a].map, plan.support[i]);
          const std::size_t j = i * k + a;
          plan.pair_point[j] = i;
          plan.pair_weight[j] = plan.support_weight[i] * atoms[a].weight;
          plan.pair_xi[j] = xi;
          plan.images[j] = std::move(gx);
        }
      } else {
        Rng rng = make_rng(stream_seed(seed, kPlanStream), i);
        auto [gx, xi] = model.step(model.draw(rng), plan.support[i]);
        plan.pair_point[i] = i;
        plan.pair_weight[i] = plan.support_weight[i];
        plan.pair_xi[i] = xi;
        plan.images[i] = std::move(gx);
      }
    }
  });
  double mean = 0.0;
  for (std::size_t j = 0; j < plan.pair_xi.size(); ++j) mean += plan.pair_weight[j] * plan.pair_xi[j];
  plan.recentering = mean;
  for (double& x : plan.pair_xi) x -= mean;
  return plan;
}

namespace {

/// Map sequences shared by every starting point; path p, step n.
std::vector<std::vector<Map>> draw_sequences(const SystemModel& model, std::size_t paths,
                                             std::size_t steps, std::uint64_t seed) {
  std::vector<std::vector<Map>> maps(paths);
  for (std::size_t p = 0; p < paths; ++p) {
    Rng rng = make_rng(stream_seed(seed, kPoissonStream), p);
    maps[p].reserve(steps);
    for (std::size_t n = 0; n < steps; ++n) maps[p].push_back(model.draw(rng));
  }
  return maps;
}

/// theta(R_n x) for n = 0..terms-1 along one map sequence. Exact theta for
/// finite supports, otherwise the unbiased increment xi(Y_{n+1}, R_n x).
void theta_along(const SystemModel& model, const StatePoint& x, const std::vector<Map>& maps,
                 std::size_t terms, double shift, double* out) {
  StatePoint z = x;
  const bool exact = model.finite_support();
  for (std::size_t n = 0; n < terms; ++n) {
    auto [next, xi] = model.step(maps[n], z);
    if (exact) {
      double t = 0.0;
      for (const auto& a : model.pi().atoms()) t += a.weight * model.xi(a.map, z);
      out[n] = t - shift;
    } else {
      out[n] = xi - shift;
    }
    z = std::move(next);
  }
}

struct Truncation {
  std::size_t n = 0;
  double rate = 0.0;
  double scale = 0.0;
  double tail = 0.0;
};

Truncation choose_truncation(const SystemModel& model, const std::vector<StatePoint>& points,
                             const std::vector<std::vector<Map>>& maps,
                             const PoissonOptions& o, double shift) {
  // Pilot points: the largest |theta| among a strided subset of the points.
  const std::size_t stride = std::max<std::size_t>(1, points.size() / 4096);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < points.size(); i += stride) {
    double t;
    if (model.finite_support()) {
      t = theta_eval(model, points[i]).value - shift;
    } else {
      Rng rng = make_rng(stream_seed(o.seed, kThetaStream), i);
      double s = 0.0;
      for (int r = 0; r < 64; ++r) s += model.xi(model.draw(rng), points[i]);
      t = s / 64.0 - shift;
    }
    cand.emplace_back(-std::abs(t), i);
  }
  std::sort(cand.begin(), cand.end());
  const std::size_t np = std::min(o.pilot_points, cand.size());
  const std::size_t terms = o.max_terms + 1;
  const std::size_t paths = maps.size();

  std::vector<double> abs_mean(terms, 0.0), mean_se(terms, 0.0), partial(terms, 0.0);
  std::vector<double> buf(paths * terms);
  for (std::size_t c = 0; c < np; ++c) {
    const StatePoint& x = points[cand[c].second];
    for (std::size_t p = 0; p < paths; ++p) theta_along(model, x, maps[p], terms, shift, &buf[p * terms]);
    double run = 0.0;
    for (std::size_t n = 0; n < terms; ++n) {
      std::vector<double> col(paths);
      for (std::size_t p = 0; p < paths; ++p) col[p] = buf[p * terms + n];
      const Estimate e = mean_estimate(col);
      abs_mean[n] += std::abs(e.value) / static_cast<double>(np);
      mean_se[n] += e.se / static_cast<double>(np);
      run += e.value;
      partial[n] += std::abs(run) / static_cast<double>(np);
    }
  }
  Truncation tr;
  if (abs_mean[0] == 0.0 && mean_se[0] == 0.0) return tr;  // theta vanishes

  std::vector<double> xs, ys;
  for (std::size_t n = 0; n < terms && abs_mean[n] > 3.0 * mean_se[n] && abs_mean[n] > 0.0; ++n) {
    xs.push_back(static_cast<double>(n));
    ys.push_back(std::log(abs_mean[n]));
  }
  if (xs.size() < 2) {
    // Decay reaches the noise within one step; bound the rate by it.
    xs = {0.0, 1.0};
    ys = {std::log(std::max(abs_mean[0], 1e-300)),
          std::log(std::max(abs_mean[1], 3.0 * mean_se[1]) + 1e-300)};
  }
  const LineFit fit = fit_line(xs, ys);
  if (!(fit.slope < 0.0))
    throw Error(ErrorKind::kNumerical,
                "P^n theta does not decay (fitted log slope " + std::to_string(fit.slope) + ")");
  tr.rate = std::exp(fit.slope);
  tr.scale = std::exp(fit.intercept);
  tr.n = o.max_terms;
  for (std::size_t n = 0; n <= o.max_terms; ++n) {
    const double tail = tr.scale * std::pow(tr.rate, static_cast<double>(n + 1)) / (1.0 - tr.rate);
    if (tail < o.tail_ratio * partial[n]) {
      tr.n = n;
      break;
    }
  }
  tr.tail = tr.scale * std::pow(tr.rate, static_cast<double>(tr.n + 1)) / (1.0 - tr.rate);
  if (tr.n == o.max_terms)
    spdlog::warn("Poisson series truncated at the cap N = {} with tail bound {:.3g}", tr.n, tr.tail);
  return tr;
}

}  // namespace

PoissonSolution solve_poisson(const SystemModel& model, const std::vector<StatePoint>& points,
                              const PoissonOptions& o, double theta_shift) {
  if (points.empty()) throw Error(ErrorKind::kParameter, "solve_poisson needs points");
  if (o.paths < 2) throw Error(ErrorKind::kParameter, "solve_poisson needs paths >= 2");
  if (o.max_terms < 1) throw Error(ErrorKind::kParameter, "max_terms must be >= 1");
  for (const auto& x : points) model.check_point(x);
  const auto maps = draw_sequences(model, o.paths, o.max_terms + 1, o.seed);
  const Truncation tr = choose_truncation(model, points, maps, o, theta_shift);

  PoissonSolution sol;
  sol.points = points;
  sol.paths = o.paths;
  sol.truncation = tr.n;
  sol.tail_bound = tr.tail;
  sol.decay_rate = tr.rate;
  sol.decay_scale = tr.scale;
  sol.theta_shift = theta_shift;
  sol.w.assign(points.size(), 0.0);
  sol.w_se.assign(points.size(), 0.0);
  sol.path_w.assign(points.size() * o.paths, 0.0);
  if (tr.scale == 0.0) return sol;
  const std::size_t terms = tr.n + 1;
  parallel_for(
      points.size(),
      [&](std::size_t begin, std::size_t end) {
        std::vector<double> buf(terms);
        std::vector<double> per(o.paths);
        for (std::size_t i = begin; i < end; ++i) {
          for (std::size_t p = 0; p < o.paths; ++p) {
            theta_along(model, points[i], maps[p], terms, theta_shift, buf.data());
            double s = 0.0;
            for (double v : buf) s += v;
            per[p] = s;
            sol.path_w[i * o.paths + p] = s;
          }
          const Estimate e = mean_estimate(per);
          sol.w[i] = e.value;
          sol.w_se[i] = e.se;
        }
      },
      o.threads);
  return sol;
}

VarianceEstimate sigma2_poisson(const SystemModel& model, const PoissonPlan& plan,
                                const PoissonSolution& sol) {
  (void)model;
  const std::size_t m = plan.support.size();
  const std::size_t np = plan.pair_xi.size();
  if (sol.points.size() != m + np)
    throw Error(ErrorKind::kDependency,
                "Poisson solution covers " + std::to_string(sol.points.size()) +
                    " points, the plan needs " + std::to_string(m + np));
  for (std::size_t i = 0; i < m; ++i)
    if (!(sol.points[i] == plan.support[i]))
      throw Error(ErrorKind::kDependency, "w is missing at support point " + describe(plan.support[i]));
  for (std::size_t j = 0; j < np; ++j)
    if (!(sol.points[m + j] == plan.images[j]))
      throw Error(ErrorKind::kDependency, "w is missing at image point " + describe(plan.images[j]));

  VarianceEstimate est;
  est.method = "poisson";
  auto& d = est.diagnostics;
  d.truncation = sol.truncation;
  d.decay_rate = sol.decay_rate;
  d.eval_points = sol.points.size();
  d.pairs = np;
  d.recentering = plan.recentering;
  d.residual_exact = plan.exact_pi;

  std::vector<double> chain_val(plan.chains, 0.0), chain_wt(plan.chains, 0.0);
  std::vector<double> point_val(m, 0.0);
  std::vector<double> path_val(sol.paths, 0.0);
  std::vector<double> theta(m, 0.0), pw(m, 0.0);
  double raw = 0.0, abs_xi = 0.0;
  for (std::size_t j = 0; j < np; ++j) {
    const std::size_t i = plan.pair_point[j];
    const double wt = plan.pair_weight[j];
    const double xi = plan.pair_xi[j];
    const double v = xi * (xi + 2.0 * sol.w[m + j]);
    raw += wt * v;
    abs_xi += wt * std::abs(xi);
    point_val[i] += wt * v;
    chain_val[plan.chain_of[i]] += wt * v;
    chain_wt[plan.chain_of[i]] += wt;
    for (std::size_t p = 0; p < sol.paths; ++p)
      path_val[p] += wt * xi * (xi + 2.0 * sol.path_w[(m + j) * sol.paths + p]);
    const double rel = wt / plan.support_weight[i];
    theta[i] += rel * xi;
    pw[i] += rel * sol.w[m + j];
  }
  if (plan.chains >= 2) {
    std::vector<double> means;
    for (std::size_t c = 0; c < plan.chains; ++c)
      if (chain_wt[c] > 0.0) means.push_back(chain_val[c] / chain_wt[c]);
    d.se_nu = mean_estimate(means).se;
  } else {
    for (std::size_t i = 0; i < m; ++i) point_val[i] /= plan.support_weight[i];
    d.se_nu = batch_means(point_val).se;
  }
  d.se_paths = mean_estimate(path_val).se;
  for (std::size_t i = 0; i < m; ++i)
    d.residual_max = std::max(d.residual_max, std::abs(sol.w[i] - theta[i] - pw[i]));

  est.raw = raw;
  est.se = std::hypot(d.se_nu, d.se_paths);
  est.tail_bound = 2.0 * abs_xi * sol.tail_bound;
  if (raw >= 0.0) {
    est.sigma2 = raw;
  } else if (raw >= -3.0 * est.se - est.tail_bound) {
    spdlog::warn("Poisson sigma^2 estimate {:.3g} is negative within noise; clamped to 0", raw);
    est.sigma2 = 0.0;
    est.clamped = true;
  } else {
    std::ostringstream os;
    os << "Poisson sigma^2 estimate " << raw << " is below -3 se (se = " << est.se << ")";
    throw Error(ErrorKind::kNumerical, os.str());
  }
  return est;
}

VarianceEstimate sigma2_poisson(const SystemModel& model, const simulate::EmpiricalMeasure& nu,
                                const PoissonOptions& o) {
  const PoissonPlan plan = poisson_plan(model, nu, o.seed);
  const PoissonSolution sol = solve_poisson(model, plan.eval_points(), o, plan.recentering);
  return sigma2_poisson(model, plan, sol);
}

VarianceEstimate sigma2_batch(const SystemModel& model, const simulate::InitialLaw& init,
                              const std::vector<std::size_t>& n_grid, std::size_t paths,
                              std::uint64_t seed, const simulate::SumOptions& options) {
  if (n_grid.size() < 3)
    throw Error(ErrorKind::kParameter, "sigma2_batch needs at least three n values");
  if (paths < 2) throw Error(ErrorKind::kParameter, "sigma2_batch needs paths >= 2");
  const auto table = simulate::sample_sums(model, init, n_grid, paths, seed, options);
  const std::size_t g = n_grid.size();

  // Least-squares weights of a and b in y = a + b / n.
  Eigen::MatrixXd X(static_cast<Eigen::Index>(g), 2);
  for (std::size_t k = 0; k < g; ++k) {
    X(static_cast<Eigen::Index>(k), 0) = 1.0;
    X(static_cast<Eigen::Index>(k), 1) = 1.0 / static_cast<double>(n_grid[k]);
  }
  const Eigen::MatrixXd W = (X.transpose() * X).inverse() * X.transpose();

  VarianceEstimate est;
  est.method = "batch";
  auto& d = est.diagnostics;
  d.n_grid = n_grid;
  std::vector<double> a_path(paths), b_path(paths);
  for (std::size_t p = 0; p < paths; ++p) {
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < g; ++k) {
      const double s = table.at(p, k);
      const double y = s * s / static_cast<double>(n_grid[k]);
      a += W(0, static_cast<Eigen::Index>(k)) * y;
      b += W(1, static_cast<Eigen::Index>(k)) * y;
    }
    a_path[p] = a;
    b_path[p] = b;
  }
  for (std::size_t k = 0; k < g; ++k) {
    const auto col = table.column(k);
    std::vector<double> y(paths);
    for (std::size_t p = 0; p < paths; ++p) y[p] = col[p] * col[p] / static_cast<double>(n_grid[k]);
    d.per_n.push_back(mean_estimate(y));
    d.mean_sum.push_back(mean_estimate(col).value);
  }
  const Estimate a = mean_estimate(a_path);
  d.slope = mean_estimate(b_path).value;
  est.raw = a.value;
  est.se = a.se;
  if (a.value >= 0.0) {
    est.sigma2 = a.value;
  } else if (a.value >= -3.0 * a.se) {
    spdlog::warn("batch sigma^2 intercept {:.3g} is negative within noise; clamped to 0", a.value);
    est.clamped = true;
  } else {
    std::ostringstream os;
    os << "batch sigma^2 intercept " << a.value << " is below -3 se (se = " << a.se << ")";
    throw Error(ErrorKind::kNumerical, os.str());
  }
  return est;
}

// ---------------------------------------------------------------------------

const char* to_string(Degeneracy d) {
  switch (d) {
    case Degeneracy::kNondegenerate: return "nondegenerate";
    case Degeneracy::kCoboundarySuspected: return "degenerate-coboundary-suspected";
    case Degeneracy::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

namespace {

struct Monomial {
  std::vector<int> power;
  std::string name;
};

std::vector<Monomial> monomials(int dim, int max_degree) {
  std::vector<Monomial> out;
  std::vector<int> p(static_cast<std::size_t>(dim), 0);
  std::function<void(int, int)> rec = [&](int coord, int left) {
    if (coord == dim) {
      const int deg = std::accumulate(p.begin(), p.end(), 0);
      if (deg == 0) return;
      std::string name;
      for (int c = 0; c < dim; ++c) {
        if (p[static_cast<std::size_t>(c)] == 0) continue;
        if (!name.empty()) name += "*";
        name += dim == 1 ? "x" : "x" + std::to_string(c);
        if (p[static_cast<std::size_t>(c)] > 1) name += "^" + std::to_string(p[static_cast<std::size_t>(c)]);
      }
      out.push_back({p, name});
      return;
    }
    for (int e = 0; e <= left; ++e) {
      p[static_cast<std::size_t>(coord)] = e;
      rec(coord + 1, left - e);
    }
    p[static_cast<std::size_t>(coord)] = 0;
  };
  rec(0, max_degree);
  std::stable_sort(out.begin(), out.end(), [](const Monomial& a, const Monomial& b) {
    return std::accumulate(a.power.begin(), a.power.end(), 0) <
           std::accumulate(b.power.begin(), b.power.end(), 0);
  });
  return out;
}

double eval_monomial(const Monomial& m, const StatePoint& x) {
  double v = 1.0;
  for (std::size_t c = 0; c < m.power.size(); ++c)
    for (int e = 0; e < m.power[c]; ++e) v *= x[static_cast<int>(c)];
  return v;
}

void fit_coboundary(const SystemModel& model, const simulate::EmpiricalMeasure& nu,
                    const DegeneracyOptions& o, DegeneracyReport& rep) {
  const int degree = model.dim() == 1 ? o.max_degree : std::min(o.max_degree, 2);
  const auto basis = monomials(model.dim(), degree);
  const std::size_t stride = std::max<std::size_t>(1, nu.points.size() / 8192);
  std::vector<std::pair<StatePoint, std::pair<StatePoint, double>>> rows;
  for (std::size_t i = 0; i < nu.points.size(); i += stride) {
    const StatePoint& x = nu.points[i];
    if (model.finite_support()) {
      for (const auto& a : model.pi().atoms()) rows.push_back({x, model.step(a.map, x)});
    } else {
      Rng rng = make_rng(stream_seed(o.seed, kFitStream), i);
      rows.push_back({x, model.step(model.draw(rng), x)});
    }
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(basis.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& [x, img] = rows[r];
    for (std::size_t b = 0; b < basis.size(); ++b)
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(b)) =
          eval_monomial(basis[b], x) - eval_monomial(basis[b], img.first);
    y(static_cast<Eigen::Index>(r)) = img.second;
  }
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
  if (y.norm() > 0.0 && A.size() > 0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    // A vanishing design (all points fixed by every map) leaves u = 0.
    if (qr.rank() > 0) coef = qr.solve(y);
  }
  const Eigen::VectorXd res = A * coef - y;
  rep.fitted = true;
  rep.residual_rms = rows.empty() ? 0.0 : res.norm() / std::sqrt(static_cast<double>(rows.size()));
  rep.residual_max = rows.empty() ? 0.0 : res.cwiseAbs().maxCoeff();
  rep.basis.clear();
  rep.coefficients.clear();
  for (std::size_t b = 0; b < basis.size(); ++b) {
    rep.basis.push_back(basis[b].name);
    const double c = coef(static_cast<Eigen::Index>(b));
    rep.coefficients.push_back(std::abs(c) < 1e-12 ? 0.0 : c);
  }
}

}  // namespace

DegeneracyReport degeneracy_test(const SystemModel& model, const simulate::EmpiricalMeasure& nu,
                                 const VarianceEstimate& batch,
                                 const std::optional<VarianceEstimate>& poisson,
                                 const std::optional<ProductForm>& product_form,
                                 const DegeneracyOptions& o) {
  DegeneracyReport rep;
  if (product_form && product_form->u && product_form->chi) {
    Estimate u;
    if (model.finite_support()) {
      u.exact = true;
      u.count = model.pi().atoms().size();
      for (const auto& a : model.pi().atoms()) u.value += a.weight * product_form->u(a.map);
    } else {
      Rng rng = make_rng(stream_seed(o.seed, kThetaStream), 0);
      std::vector<double> v(o.nsamples);
      for (auto& s : v) s = product_form->u(model.draw(rng));
      u = mean_estimate(v);
    }
    rep.u_mean = u;
    double chi_max = 0.0;
    for (const auto& x : nu.points) chi_max = std::max(chi_max, std::abs(product_form->chi(x)));
    const bool u_zero = u.exact ? std::abs(u.value) <= 1e-12 : std::abs(u.value) <= 3.0 * u.se;
    if (u_zero && chi_max > 1e-12) {
      rep.verdict = Degeneracy::kNondegenerate;
      rep.positivity_guaranteed = true;
      rep.reason = "product form u(g) chi(x) with pi(u) = 0 and chi nonzero on the support: sigma^2 > 0";
      return rep;
    }
  }
  auto small = [&](const VarianceEstimate& e) {
    return e.sigma2 <= std::max(o.zero_tolerance, 3.0 * e.se);
  };
  auto positive = [&](const VarianceEstimate& e) {
    return e.sigma2 - 3.0 * e.se - e.tail_bound > 0.0 && e.sigma2 > o.zero_tolerance;
  };
  const bool is_small = small(batch) && (!poisson || small(*poisson));
  if (is_small) {
    fit_coboundary(model, nu, o, rep);
    if (rep.residual_rms <= 1e-6) {
      rep.verdict = Degeneracy::kCoboundarySuspected;
      rep.reason = "sigma^2 is indistinguishable from 0 and a polynomial coboundary fits";
    } else {
      rep.verdict = Degeneracy::kInconclusive;
      rep.reason = "sigma^2 is indistinguishable from 0 but no polynomial coboundary fits";
    }
  } else if (positive(batch) && (!poisson || positive(*poisson))) {
    rep.verdict = Degeneracy::kNondegenerate;
    rep.reason = "sigma^2 exceeds 3 standard errors";
  } else {
    rep.verdict = Degeneracy::kInconclusive;
    rep.reason = "the estimates disagree on whether sigma^2 vanishes";
  }
  return rep;
}

}  // namespace irlm::variance
