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

#include "bwu/kernels.h"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bwu/errors.h"

namespace bwu::kernels {
namespace {

std::vector<double> RandomVector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

double NaiveDot(const std::vector<double>& x, const std::vector<double>& y) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>(s);
}

// Sizes straddle the 4- and 16-wide unrolled loops and their tails.
const std::size_t kSizes[] = {0, 1, 3, 4, 5, 15, 16, 17, 31, 64, 100, 1027};

class BackendTest : public ::testing::TestWithParam<Backend> {
 protected:
  void SetUp() override {
    if (!backend_supported(GetParam())) {
      GTEST_SKIP() << backend_name(GetParam()) << " not available";
    }
    previous_ = active_backend();
    set_backend(GetParam());
  }
  void TearDown() override {
    if (backend_supported(GetParam())) set_backend(previous_);
  }

 private:
  Backend previous_ = Backend::kScalar;
};

TEST_P(BackendTest, DotAndNormMatchExtendedPrecision) {
  std::mt19937_64 rng(1);
  for (std::size_t n : kSizes) {
    const auto x = RandomVector(rng, n);
    const auto y = RandomVector(rng, n);
    EXPECT_NEAR(dot(x, y), NaiveDot(x, y), 1e-12 * (1.0 + n));
    EXPECT_NEAR(norm2(x), std::sqrt(NaiveDot(x, x)), 1e-12 * (1.0 + n));
  }
}

TEST_P(BackendTest, AxpyAndScaleAreExactPerElement) {
  std::mt19937_64 rng(2);
  for (std::size_t n : kSizes) {
    const auto x = RandomVector(rng, n);
    auto y = RandomVector(rng, n);
    auto expected = y;
    for (std::size_t i = 0; i < n; ++i) expected[i] += 0.37 * x[i];
    axpy(0.37, x, y);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(y[i], expected[i], 1e-15 * (1.0 + std::abs(expected[i])));
    }
    auto z = x;
    scale(-2.5, z);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(z[i], -2.5 * x[i]);
  }
}

TEST_P(BackendTest, MatrixKernelsMatchLoops) {
  std::mt19937_64 rng(3);
  for (std::size_t rows : {1, 3, 8, 17}) {
    for (std::size_t cols : {1, 4, 5, 33}) {
      const auto a = RandomVector(rng, rows * cols);
      const auto x = RandomVector(rng, cols);
      const auto r = RandomVector(rng, rows);

      std::vector<double> y(rows);
      gemv(a, rows, cols, x, y);
      for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += a[i * cols + j] * x[j];
        EXPECT_NEAR(y[i], s, 1e-12);
      }

      std::vector<double> yt(cols, 1.0);
      gemv_t(a, rows, cols, r, yt);
      for (std::size_t j = 0; j < cols; ++j) {
        double s = 1.0;
        for (std::size_t i = 0; i < rows; ++i) s += a[i * cols + j] * r[i];
        EXPECT_NEAR(yt[j], s, 1e-12);
      }

      auto b = a;
      ger(0.5, r, x, b, rows, cols);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
          EXPECT_NEAR(b[i * cols + j], a[i * cols + j] + 0.5 * r[i] * x[j],
                      1e-14);
        }
      }
    }
  }
}

TEST_P(BackendTest, ShapeMismatchThrows) {
  std::vector<double> x(3), y(4), a(12);
  EXPECT_THROW(dot(x, y), DomainError);
  EXPECT_THROW(axpy(1.0, x, y), DomainError);
  EXPECT_THROW(gemv(a, 3, 4, x, y), DomainError);
}

INSTANTIATE_TEST_SUITE_P(AllBackends, BackendTest,
                         ::testing::Values(Backend::kScalar, Backend::kAvx2),
                         [](const auto& info) {
                           return std::string(backend_name(info.param));
                         });

TEST(BackendEquivalence, Avx2AgreesWithScalar) {
  if (!backend_supported(Backend::kAvx2)) GTEST_SKIP();
#if defined(BWU_HAVE_AVX2)
  const KernelTable& s = scalar_table();
  const KernelTable& v = avx2_table();
  std::mt19937_64 rng(4);
  for (std::size_t n : kSizes) {
    const auto x = RandomVector(rng, n);
    const auto y = RandomVector(rng, n);
    EXPECT_NEAR(s.dot(x.data(), y.data(), n), v.dot(x.data(), y.data(), n),
                1e-13 * (1.0 + n));
    auto ys = y;
    auto yv = y;
    s.axpy(1.25, x.data(), ys.data(), n);
    v.axpy(1.25, x.data(), yv.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ys[i], yv[i], 1e-15 * 8);
  }
  const std::size_t rows = 37, cols = 29;
  const auto a = RandomVector(rng, rows * cols);
  const auto x = RandomVector(rng, cols);
  std::vector<double> ys(rows), yv(rows);
  s.gemv(a.data(), rows, cols, x.data(), ys.data());
  v.gemv(a.data(), rows, cols, x.data(), yv.data());
  for (std::size_t i = 0; i < rows; ++i) EXPECT_NEAR(ys[i], yv[i], 1e-12);
#endif
}

TEST(BackendSelection, BitReproducibleWithinBackend) {
  std::mt19937_64 rng(5);
  const auto x = RandomVector(rng, 1000);
  const auto y = RandomVector(rng, 1000);
  EXPECT_EQ(dot(x, y), dot(x, y));
  EXPECT_TRUE(backend_supported(Backend::kScalar));
}

}  // namespace
}  // namespace bwu::kernels
