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

// Compiled with -mavx2 (no -mfma). Nothing in this file may be called
// before the dispatcher has confirmed AVX2 support.

#include "irlm/kernels.hpp"

#if defined(IRLM_BUILD_AVX2)
#include <immintrin.h>
#endif

namespace irlm::kernels::avx2 {

#if defined(IRLM_BUILD_AVX2)

namespace {
inline double combine(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}
}  // namespace

void cmatvec(const SplitComplexMatrixView& a, const double* xre,
             const double* xim, double* yre, double* yim) {
  const std::size_t cols = a.cols;
  const std::size_t body = cols - cols % 4;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* are = a.re.data() + r * cols;
    const double* aim = a.im.data() + r * cols;
    __m256d acc_re = _mm256_setzero_pd();
    __m256d acc_im = _mm256_setzero_pd();
    for (std::size_t c = 0; c < body; c += 4) {
      const __m256d ar = _mm256_loadu_pd(are + c);
      const __m256d ai = _mm256_loadu_pd(aim + c);
      const __m256d vr = _mm256_loadu_pd(xre + c);
      const __m256d vi = _mm256_loadu_pd(xim + c);
      acc_re = _mm256_sub_pd(_mm256_add_pd(acc_re, _mm256_mul_pd(ar, vr)),
                             _mm256_mul_pd(ai, vi));
      acc_im = _mm256_add_pd(_mm256_add_pd(acc_im, _mm256_mul_pd(ar, vi)),
                             _mm256_mul_pd(ai, vr));
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
  const __m256d c0 = _mm256_set1_pd(k.c0);
  const __m256d cp = _mm256_set1_pd(k.c_prev);
  const __m256d cn = _mm256_set1_pd(k.c_next);
  const __m256d cl = _mm256_set1_pd(k.c_label);
  const __m256d sh = _mm256_set1_pd(k.shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xo = _mm256_loadu_pd(x + i);
    const __m256d xn = _mm256_add_pd(
        _mm256_mul_pd(_mm256_loadu_pd(a + i), xo), _mm256_loadu_pd(b + i));
    __m256d xi = _mm256_add_pd(c0, _mm256_mul_pd(cp, xo));
    xi = _mm256_add_pd(xi, _mm256_mul_pd(cn, xn));
    xi = _mm256_add_pd(xi, _mm256_mul_pd(cl, _mm256_loadu_pd(label + i)));
    xi = _mm256_sub_pd(xi, sh);
    _mm256_storeu_pd(s + i, _mm256_add_pd(_mm256_loadu_pd(s + i), xi));
    _mm256_storeu_pd(x + i, xn);
  }
  scalar::affine_observe_step(n - i, x + i, s + i, a + i, b + i, label + i, k);
}

double sum(std::size_t n, const double* v) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4)
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(v + i));
  double total = combine(acc);
  for (std::size_t i = body; i < n; ++i) total += v[i];
  return total;
}

double sum_squares(std::size_t n, const double* v) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d x = _mm256_loadu_pd(v + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(x, x));
  }
  double total = combine(acc);
  for (std::size_t i = body; i < n; ++i) total += v[i] * v[i];
  return total;
}

#else  // no AVX2 translation unit on this target: forward to scalar

void cmatvec(const SplitComplexMatrixView& a, const double* xre,
             const double* xim, double* yre, double* yim) {
  scalar::cmatvec(a, xre, xim, yre, yim);
}
void affine_observe_step(std::size_t n, double* x, double* s, const double* a,
                         const double* b, const double* label,
                         const LinearObservableCoeffs& k) {
  scalar::affine_observe_step(n, x, s, a, b, label, k);
}
double sum(std::size_t n, const double* v) { return scalar::sum(n, v); }
double sum_squares(std::size_t n, const double* v) {
  return scalar::sum_squares(n, v);
}

#endif

}  // namespace irlm::kernels::avx2
