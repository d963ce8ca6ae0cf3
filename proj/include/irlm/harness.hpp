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

// Statistical checks of the central limit theorem, its Berry-Esseen rate
// and the local limit theorem on simulated partial sums.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "irlm/core.hpp"
#include "irlm/simulate.hpp"

namespace irlm::harness {

/// sup_u |F_n(u) - cdf(u)| evaluated exactly at the order statistics.
double ks_statistic(std::span<const double> samples,
                    const std::function<double(double)>& cdf = normal_cdf);

/// One-sided Spearman test for an increasing trend of `values` in their
/// index. Exact permutation p-value up to 8 values, normal approximation
/// beyond.
struct TrendTest {
  double rho = 0.0;
  double p_value = 1.0;
  bool increasing = false;   // p < level and rho > 0
  std::string method;
};
TrendTest spearman_trend(std::span<const double> values, double level = 0.05);

struct CltRow {
  std::size_t n = 0;
  std::size_t paths = 0;
  double ks = 0.0;
  double ks_sqrt_n = 0.0;
};

struct CltReport {
  std::vector<CltRow> rows;
  double sigma2 = 0.0;
  std::string sigma2_source;
  TrendTest trend;
  double max_ks_sqrt_n = 0.0;
  std::string verdict;       // "BE-consistent" or "increasing-trend"
};

/// KS distance of S_n / (sigma sqrt n) to N(0, 1) for every n in the grid.
/// Throws kDegenerate when sigma2 <= 0.
CltReport clt_test(const SystemModel& model, const simulate::InitialLaw& init, double sigma2,
                   std::string sigma2_source, const std::vector<std::size_t>& n_grid,
                   std::size_t paths, std::uint64_t seed);

/// Built-in test functions with lim u^2 h(u) = 0 and exact integrals.
class TestFunction {
 public:
  enum class Kind { kGaussianBump, kTriangle, kRaisedCosine };

  static TestFunction gaussian(double width = 1.0);      // exp(-u^2 / (2 w^2))
  static TestFunction triangle(double width = 1.0);      // max(0, 1 - |u| / w)
  static TestFunction raised_cosine(double width = 1.0); // (1 + cos(pi u / w)) / 2 on |u| <= w
  /// "gaussian", "triangle" or "raised_cosine"; throws kParameter otherwise.
  static TestFunction by_name(const std::string& name, double width = 1.0);

  Kind kind() const { return kind_; }
  double width() const { return width_; }
  std::string name() const;
  double operator()(double u) const;
  /// Lebesgue integral L(h).
  double integral() const;

 private:
  Kind kind_ = Kind::kGaussianBump;
  double width_ = 1.0;
};

struct LocalRow {
  std::size_t n = 0;
  double value = 0.0;        // sigma sqrt(2 pi n) mean h(S_n)
  double se = 0.0;
  double gap = 0.0;          // |value - L(h)|
};

struct LocalCltReport {
  std::string h;
  double width = 0.0;
  double integral = 0.0;
  double sigma2 = 0.0;
  std::vector<LocalRow> rows;
  double allowance = 0.0;    // |change over the last two n|
  bool consistent = false;   // final gap <= 3 se + allowance
};

/// Refuses (kHypothesis) unless `nonarithmetic` or `override_arithmetic`.
LocalCltReport local_clt_test(const SystemModel& model, const simulate::InitialLaw& init,
                              double sigma2, const TestFunction& h,
                              const std::vector<std::size_t>& n_grid, std::size_t paths,
                              std::uint64_t seed, bool nonarithmetic,
                              bool override_arithmetic = false);

/// KS distances of `reps` samples of `paths` standard normal draws and the
/// number exceeding 1.36 / sqrt(paths).
struct NullCalibration {
  std::size_t reps = 0;
  std::size_t paths = 0;
  double threshold = 0.0;
  std::size_t exceedances = 0;
  double max_ks = 0.0;
};
NullCalibration ks_null_calibration(std::size_t paths, std::size_t reps, std::uint64_t seed);

}  // namespace irlm::harness
