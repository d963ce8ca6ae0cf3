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

// Data-parallel inner loops used by the spectral and simulation modules.
//
// Every kernel has a scalar reference implementation and an AVX2 variant.
// The variant is picked once at startup from the CPU feature bits (or the
// IRLM_SIMD environment variable) and can be overridden for testing. The
// scalar kernels accumulate in the same four-lane order as the vector ones
// and no kernel uses fused multiply-add, so both paths return identical
// bits.

#include <cstddef>
#include <span>

namespace irlm::kernels {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);

/// The instruction set the dispatcher currently routes to.
Isa active_isa();

/// Route all kernels to `isa`. Throws irlm::Error if the CPU lacks it.
void force_isa(Isa isa);

/// Restore the automatically detected choice.
void reset_isa();

/// Dense row-major complex matrix with split real/imaginary storage.
struct SplitComplexMatrixView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const double> re;
  std::span<const double> im;
};

/// y = A x for split-complex A, x, y. `yre`/`yim` must not alias the input.
void cmatvec(const SplitComplexMatrixView& a, std::span<const double> xre,
             std::span<const double> xim, std::span<double> yre,
             std::span<double> yim);

/// Coefficients of an observable that is affine in (x, g x, u(g)):
/// xi = c0 + c_prev * x + c_next * (g x) + c_label * u(g) - shift.
struct LinearObservableCoeffs {
  double c0 = 0.0;
  double c_prev = 0.0;
  double c_next = 0.0;
  double c_label = 0.0;
  double shift = 0.0;
};

/// One lockstep step of scalar affine chains, one lane per path:
///   x_new = a * x + b,  s += xi(x, x_new, label),  x = x_new.
void affine_observe_step(std::span<double> x, std::span<double> s,
                         std::span<const double> a, std::span<const double> b,
                         std::span<const double> label,
                         const LinearObservableCoeffs& coeffs);

double sum(std::span<const double> v);
double sum_squares(std::span<const double> v);

namespace scalar {
void cmatvec(const SplitComplexMatrixView& a, const double* xre,
             const double* xim, double* yre, double* yim);
void affine_observe_step(std::size_t n, double* x, double* s, const double* a,
                         const double* b, const double* label,
                         const LinearObservableCoeffs& coeffs);
double sum(std::size_t n, const double* v);
double sum_squares(std::size_t n, const double* v);
}  // namespace scalar

namespace avx2 {
void cmatvec(const SplitComplexMatrixView& a, const double* xre,
             const double* xim, double* yre, double* yim);
void affine_observe_step(std::size_t n, double* x, double* s, const double* a,
                         const double* b, const double* label,
                         const LinearObservableCoeffs& coeffs);
double sum(std::size_t n, const double* v);
double sum_squares(std::size_t n, const double* v);
}  // namespace avx2

}  // namespace irlm::kernels
