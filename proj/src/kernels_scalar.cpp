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

#include "irlm/kernels.hpp"

namespace irlm::kernels::scalar {

namespace {
constexpr std::size_t kLanes = 4;

inline double combine(const double (&acc)[kLanes]) {
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}
}  // namespace

void cmatvec(const SplitComplexMatrixView& a, const double* xre,
             const double* xim, double* yre, double* yim) {
  const std::size_t cols = a.cols;
  const std::size_t body = cols - cols % kLanes;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* are = a.re.data() + r * cols;
    const double* aim = a.im.data() + r * cols;
    double acc_re[kLanes] = {0.0, 0.0, 0.0, 0.0};
    double acc_im[kLanes] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < body; c += kLanes) {
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double p_rr = are[c + l] * xre[c + l];
        const double p_ii = aim[c + l] * xim[c + l];
        const double p_ri = are[c + l] * xim[c + l];
        const double p_ir = aim[c + l] * xre[c + l];
        acc_re[l] = (acc_re[l] + p_rr) - p_ii;
        acc_im[l] = (acc_im[l] + p_ri) + p_ir;
      }
    }
    double sre = combine(acc_re);
    double sim = combine(acc_im);
    for (std::size_t c = body; c < cols; ++c) {
      sre = (sre + are[c] * xre[c]) - aim[c] * xim[c];
      sim = (sim + are[c] * xim[c]) + aim[c] * xre[c];
    }
    yre[r] = sre;
    yim[r] = sim;
  }
}

void affine_observe_step(std::size_t n, double* x, double* s, const double* a,
                         const double* b, const double* label,
                         const LinearObservableCoeffs& k) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xo = x[i];
    const double xn = a[i] * xo + b[i];
    const double xi =
        (((k.c0 + k.c_prev * xo) + k.c_next * xn) + k.c_label * label[i]) -
        k.shift;
    s[i] = s[i] + xi;
    x[i] = xn;
  }
}

double sum(std::size_t n, const double* v) {
  double acc[kLanes] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += v[i + l];
  double total = combine(acc);
  for (std::size_t i = body; i < n; ++i) total += v[i];
  return total;
}

double sum_squares(std::size_t n, const double* v) {
  double acc[kLanes] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += v[i + l] * v[i + l];
  double total = combine(acc);
  for (std::size_t i = body; i < n; ++i) total += v[i] * v[i];
  return total;
}

}  // namespace irlm::kernels::scalar
