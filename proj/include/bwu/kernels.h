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

// Dense double-precision kernels used by the model and subspace code.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is picked once at startup from CPUID and can
// be overridden with set_backend() (tests force each backend in turn). Within
// one backend results are bit-reproducible; across backends they agree to
// rounding because summation order differs.

#ifndef BWU_KERNELS_H_
#define BWU_KERNELS_H_

#include <cstddef>
#include <span>
#include <string_view>

namespace bwu::kernels {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend backend);
bool backend_supported(Backend backend);

// Backend currently used by the dispatching entry points below.
Backend active_backend();
// Throws DomainError if the backend is not compiled in or not supported by
// the CPU.
void set_backend(Backend backend);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// x *= alpha
void scale(double alpha, std::span<double> x);
// y = A x, A is rows x cols row-major.
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
// y += A^T x, A is rows x cols row-major.
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);
// A += alpha * x y^T, A is rows x cols row-major.
void ger(double alpha, std::span<const double> x, std::span<const double> y,
         std::span<double> a, std::size_t rows, std::size_t cols);

// Raw per-backend implementations. Shapes are not checked here; the
// dispatching wrappers above do that.
struct KernelTable {
  double (*dot)(const double* x, const double* y, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y);
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y);
  void (*ger)(double alpha, const double* x, const double* y, double* a,
              std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_table();
#if defined(BWU_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

}  // namespace bwu::kernels

#endif  // BWU_KERNELS_H_
