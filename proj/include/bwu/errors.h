// Copyright 2026 The Blockwise Unlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BWU_ERRORS_H_
#define BWU_ERRORS_H_

#include <stdexcept>
#include <string>

namespace bwu {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the domain of the operation (q <= 1, k > d, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// The (epsilon, delta) budget leaves no Renyi budget at the chosen order.
class InfeasibleBudget : public Error {
 public:
  using Error::Error;
};

// The requested noise variance cannot be certified for any step count.
class InfeasibleNoise : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered, or an internal numerical invariant broke.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed file or stream (bad magic, truncated payload, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace bwu

#endif  // BWU_ERRORS_H_
