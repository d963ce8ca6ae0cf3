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

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "irlm/error.hpp"

namespace irlm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kEvaluation: return "evaluation";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kAmbiguousDominance: return "ambiguous-dominance";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kHypothesis: return "hypothesis";
    case ErrorKind::kDependency: return "dependency";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

namespace kernels {

namespace {

bool cpu_has_avx2() {
#if defined(IRLM_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect() {
  const char* env = std::getenv("IRLM_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::kScalar;
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa) {
  return isa == Isa::kScalar || cpu_has_avx2();
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (!isa_supported(isa))
    throw Error(ErrorKind::kUnsupported,
                std::string("instruction set not available: ") + isa_name(isa));
  current().store(isa, std::memory_order_relaxed);
}

void reset_isa() { current().store(detect(), std::memory_order_relaxed); }

void cmatvec(const SplitComplexMatrixView& a, std::span<const double> xre,
             std::span<const double> xim, std::span<double> yre,
             std::span<double> yim) {
  if (xre.size() < a.cols || xim.size() < a.cols || yre.size() < a.rows ||
      yim.size() < a.rows || a.re.size() < a.rows * a.cols ||
      a.im.size() < a.rows * a.cols)
    throw Error(ErrorKind::kParameter, "cmatvec: dimension mismatch");
  if (active_isa() == Isa::kAvx2)
    avx2::cmatvec(a, xre.data(), xim.data(), yre.data(), yim.data());
  else
    scalar::cmatvec(a, xre.data(), xim.data(), yre.data(), yim.data());
}

void affine_observe_step(std::span<double> x, std::span<double> s,
                         std::span<const double> a, std::span<const double> b,
                         std::span<const double> label,
                         const LinearObservableCoeffs& coeffs) {
  const std::size_t n = x.size();
  if (s.size() != n || a.size() != n || b.size() != n || label.size() != n)
    throw Error(ErrorKind::kParameter, "affine_observe_step: lane mismatch");
  if (active_isa() == Isa::kAvx2)
    avx2::affine_observe_step(n, x.data(), s.data(), a.data(), b.data(),
                              label.data(), coeffs);
  else
    scalar::affine_observe_step(n, x.data(), s.data(), a.data(), b.data(),
                                label.data(), coeffs);
}

double sum(std::span<const double> v) {
  return active_isa() == Isa::kAvx2 ? avx2::sum(v.size(), v.data())
                                    : scalar::sum(v.size(), v.data());
}

double sum_squares(std::span<const double> v) {
  return active_isa() == Isa::kAvx2 ? avx2::sum_squares(v.size(), v.data())
                                    : scalar::sum_squares(v.size(), v.data());
}

}  // namespace kernels
}  // namespace irlm
