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

#include <stdexcept>
#include <string>

namespace irlm {

/// Failure categories. The CLI maps them onto exit codes.
enum class ErrorKind {
  kInvalidInput,        // a point or map outside the model's domain
  kParameter,           // an argument outside its admissible range
  kEvaluation,          // an observable returned NaN or overflowed
  kDegenerate,          // zero image norm, sigma^2 = 0 where > 0 is needed
  kNumerical,           // non-convergence or an internal consistency failure
  kAmbiguousDominance,  // two leading eigenvalues of (nearly) equal modulus
  kUnsupported,         // route not available for this model
  kHypothesis,          // a moment/contraction hypothesis does not hold
  kDependency,          // a required upstream result is missing
  kConfig,              // configuration document is invalid
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace irlm
