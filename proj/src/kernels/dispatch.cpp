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

#include <atomic>
#include <cmath>
#include <string>

#include "bwu/errors.h"
#include "bwu/kernels.h"

namespace bwu::kernels {
namespace {

bool CpuHasAvx2() {
#if defined(BWU_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend DetectBackend() {
  return CpuHasAvx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& Current() {
  static std::atomic<Backend> backend{DetectBackend()};
  return backend;
}

const KernelTable& Table() {
#if defined(BWU_HAVE_AVX2)
  if (Current().load(std::memory_order_relaxed) == Backend::kAvx2) {
    return avx2_table();
  }
#endif
  return scalar_table();
}

void CheckSameSize(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DomainError(std::string(what) + ": size mismatch (" +
                      std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool backend_supported(Backend backend) {
  return backend == Backend::kScalar || CpuHasAvx2();
}

Backend active_backend() { return Current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw DomainError("kernel backend '" + std::string(backend_name(backend)) +
                      "' is not available on this build/CPU");
  }
  Current().store(backend, std::memory_order_relaxed);
}

double dot(std::span<const double> x, std::span<const double> y) {
  CheckSameSize(x.size(), y.size(), "dot");
  return Table().dot(x.data(), y.data(), x.size());
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  CheckSameSize(x.size(), y.size(), "axpy");
  Table().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) {
  Table().scale(alpha, x.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  CheckSameSize(a.size(), rows * cols, "gemv matrix");
  CheckSameSize(x.size(), cols, "gemv x");
  CheckSameSize(y.size(), rows, "gemv y");
  Table().gemv(a.data(), rows, cols, x.data(), y.data());
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  CheckSameSize(a.size(), rows * cols, "gemv_t matrix");
  CheckSameSize(x.size(), rows, "gemv_t x");
  CheckSameSize(y.size(), cols, "gemv_t y");
  Table().gemv_t(a.data(), rows, cols, x.data(), y.data());
}

void ger(double alpha, std::span<const double> x, std::span<const double> y,
         std::span<double> a, std::size_t rows, std::size_t cols) {
  CheckSameSize(a.size(), rows * cols, "ger matrix");
  CheckSameSize(x.size(), rows, "ger x");
  CheckSameSize(y.size(), cols, "ger y");
  Table().ger(alpha, x.data(), y.data(), a.data(), rows, cols);
}

}  // namespace bwu::kernels
