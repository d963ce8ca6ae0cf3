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

#include "irlm/stats.hpp"

#include <algorithm>
#include <numeric>

#include "irlm/error.hpp"

namespace irlm {

Estimate mean_estimate(std::span<const double> samples) {
  Estimate e;
  double sum = 0.0;
  for (double v : samples) {
    if (std::isfinite(v)) {
      sum += v;
      ++e.count;
    } else {
      ++e.excluded;
    }
  }
  if (e.count == 0) return e;
  e.value = sum / static_cast<double>(e.count);
  if (e.count > 1) {
    double ss = 0.0;
    for (double v : samples)
      if (std::isfinite(v)) ss += (v - e.value) * (v - e.value);
    e.se = std::sqrt(ss / static_cast<double>(e.count - 1) / static_cast<double>(e.count));
  }
  return e;
}

Estimate batch_means(std::span<const double> series, std::size_t batches) {
  if (series.empty()) return {};
  batches = std::max<std::size_t>(1, std::min(batches, series.size()));
  const std::size_t len = series.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto block = series.subspan(b * len, len);
    means.push_back(std::accumulate(block.begin(), block.end(), 0.0) /
                    static_cast<double>(len));
  }
  Estimate e = mean_estimate(means);
  e.count = len * batches;
  return e;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(ErrorKind::kParameter, "line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::kParameter, "line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace irlm
