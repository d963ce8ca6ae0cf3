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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace irlm {

/// A Monte Carlo (or exact) estimate. `exact` estimates carry se = 0.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t count = 0;
  std::size_t excluded = 0;  // nonfinite samples dropped
  bool exact = false;
};

/// Sample mean and its standard error (sd / sqrt(n)).
Estimate mean_estimate(std::span<const double> samples);

/// Mean with batch-means standard error over `batches` contiguous blocks.
Estimate batch_means(std::span<const double> series, std::size_t batches = 20);

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Least-squares fit y = intercept + slope * x.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Average ranks (ties share the mean rank), 1-based.
std::vector<double> ranks(std::span<const double> v);

}  // namespace irlm
