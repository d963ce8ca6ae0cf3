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

#include "irlm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "irlm/stats.hpp"

namespace irlm::harness {

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw Error(ErrorKind::kParameter, "KS statistic of an empty sample");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf(v[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

namespace {
double spearman_rho(std::span<const double> rx, std::span<const double> ry) {
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}
}  // namespace

TrendTest spearman_trend(std::span<const double> values, double level) {
  if (values.size() < 2) throw Error(ErrorKind::kParameter, "trend test needs >= 2 values");
  TrendTest tt;
  const std::vector<double> ry = ranks(values);
  std::vector<double> rx(values.size());
  std::iota(rx.begin(), rx.end(), 1.0);
  tt.rho = spearman_rho(rx, ry);
  if (values.size() <= 8) {
    tt.method = "exact-permutation";
    std::vector<double> perm = ry;
    std::sort(perm.begin(), perm.end());
    std::size_t total = 0, hits = 0;
    do {
      ++total;
      if (spearman_rho(rx, perm) >= tt.rho - 1e-12) ++hits;
    } while (std::next_permutation(perm.begin(), perm.end()));
    tt.p_value = static_cast<double>(hits) / static_cast<double>(total);
  } else {
    tt.method = "normal-approximation";
    const double z = tt.rho * std::sqrt(static_cast<double>(values.size()) - 1.0);
    tt.p_value = 1.0 - normal_cdf(z);
  }
  tt.increasing = tt.rho > 0.0 && tt.p_value < level;
  return tt;
}

CltReport clt_test(const SystemModel& model, const simulate::InitialLaw& init, double sigma2,
                   std::string sigma2_source, const std::vector<std::size_t>& n_grid,
                   std::size_t paths, std::uint64_t seed) {
  if (!(sigma2 > 0.0))
    throw Error(ErrorKind::kDegenerate,
                "CLT test refused: sigma^2 = 0 (run the variance degeneracy test)");
  if (paths < 2) throw Error(ErrorKind::kParameter, "clt_test needs paths >= 2");
  const auto table = simulate::sample_sums(model, init, n_grid, paths, seed);
  CltReport rep;
  rep.sigma2 = sigma2;
  rep.sigma2_source = std::move(sigma2_source);
  const double sigma = std::sqrt(sigma2);
  std::vector<double> scaled;
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    const double norm = sigma * std::sqrt(static_cast<double>(n_grid[k]));
    auto col = table.column(k);
    scaled.clear();
    for (double s : col) scaled.push_back(s / norm);
    CltRow row;
    row.n = n_grid[k];
    row.paths = paths;
    row.ks = ks_statistic(scaled);
    row.ks_sqrt_n = row.ks * std::sqrt(static_cast<double>(row.n));
    rep.max_ks_sqrt_n = std::max(rep.max_ks_sqrt_n, row.ks_sqrt_n);
    rep.rows.push_back(row);
  }
  std::vector<double> series;
  for (const auto& r : rep.rows) series.push_back(r.ks_sqrt_n);
  if (series.size() >= 2) {
    rep.trend = spearman_trend(series);
  } else {
    rep.trend.method = "single-point";
  }
  rep.verdict = rep.trend.increasing ? "increasing-trend" : "BE-consistent";
  return rep;
}

// ---------------------------------------------------------------------------

TestFunction TestFunction::gaussian(double width) {
  TestFunction h;
  h.kind_ = Kind::kGaussianBump;
  h.width_ = width;
  if (!(width > 0.0)) throw Error(ErrorKind::kParameter, "test function width must be > 0");
  return h;
}

TestFunction TestFunction::triangle(double width) {
  TestFunction h = gaussian(width);
  h.kind_ = Kind::kTriangle;
  return h;
}

TestFunction TestFunction::raised_cosine(double width) {
  TestFunction h = gaussian(width);
  h.kind_ = Kind::kRaisedCosine;
  return h;
}

TestFunction TestFunction::by_name(const std::string& name, double width) {
  if (name == "gaussian") return gaussian(width);
  if (name == "triangle") return triangle(width);
  if (name == "raised_cosine") return raised_cosine(width);
  throw Error(ErrorKind::kParameter, "unknown test function '" + name + "'");
}

std::string TestFunction::name() const {
  switch (kind_) {
    case Kind::kGaussianBump: return "gaussian";
    case Kind::kTriangle: return "triangle";
    case Kind::kRaisedCosine: return "raised_cosine";
  }
  return "gaussian";
}

double TestFunction::operator()(double u) const {
  const double x = u / width_;
  switch (kind_) {
    case Kind::kGaussianBump: return std::exp(-0.5 * x * x);
    case Kind::kTriangle: return std::max(0.0, 1.0 - std::abs(x));
    case Kind::kRaisedCosine:
      return std::abs(x) <= 1.0 ? 0.5 * (1.0 + std::cos(std::numbers::pi * x)) : 0.0;
  }
  return 0.0;
}

double TestFunction::integral() const {
  switch (kind_) {
    case Kind::kGaussianBump: return width_ * std::sqrt(2.0 * std::numbers::pi);
    case Kind::kTriangle: return width_;
    case Kind::kRaisedCosine: return width_;
  }
  return 0.0;
}

LocalCltReport local_clt_test(const SystemModel& model, const simulate::InitialLaw& init,
                              double sigma2, const TestFunction& h,
                              const std::vector<std::size_t>& n_grid, std::size_t paths,
                              std::uint64_t seed, bool nonarithmetic, bool override_arithmetic) {
  if (!(sigma2 > 0.0))
    throw Error(ErrorKind::kDegenerate, "local limit test refused: sigma^2 = 0");
  if (!nonarithmetic && !override_arithmetic)
    throw Error(ErrorKind::kHypothesis,
                "local limit test refused: the model is not known to satisfy the "
                "nonarithmeticity condition (peripheral scan); set the override to run anyway");
  if (paths < 2) throw Error(ErrorKind::kParameter, "local_clt_test needs paths >= 2");
  const auto table = simulate::sample_sums(model, init, n_grid, paths, seed);
  LocalCltReport rep;
  rep.h = h.name();
  rep.width = h.width();
  rep.integral = h.integral();
  rep.sigma2 = sigma2;
  const double sigma = std::sqrt(sigma2);
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    const double scale = sigma * std::sqrt(2.0 * std::numbers::pi * static_cast<double>(n_grid[k]));
    std::vector<double> v(paths);
    for (std::size_t p = 0; p < paths; ++p) v[p] = scale * h(table.at(p, k));
    const Estimate e = mean_estimate(v);
    rep.rows.push_back({n_grid[k], e.value, e.se, std::abs(e.value - rep.integral)});
  }
  if (rep.rows.size() >= 2)
    rep.allowance = std::abs(rep.rows.back().value - rep.rows[rep.rows.size() - 2].value);
  rep.consistent = rep.rows.back().gap <= 3.0 * rep.rows.back().se + rep.allowance;
  return rep;
}

NullCalibration ks_null_calibration(std::size_t paths, std::size_t reps, std::uint64_t seed) {
  NullCalibration nc;
  nc.reps = reps;
  nc.paths = paths;
  nc.threshold = 1.36 / std::sqrt(static_cast<double>(paths));
  std::vector<double> ks(reps);
  parallel_for(reps, [&](std::size_t b, std::size_t e) {
    std::vector<double> x(paths);
    for (std::size_t r = b; r < e; ++r) {
      Rng rng = make_rng(seed, r);
      std::normal_distribution<double> normal;
      for (auto& v : x) v = normal(rng);
      ks[r] = ks_statistic(x);
    }
  });
  for (double d : ks) {
    nc.max_ks = std::max(nc.max_ks, d);
    if (d > nc.threshold) ++nc.exceedances;
  }
  return nc;
}

}  // namespace irlm::harness
