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

#include "bwu/subspace.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "bwu/errors.h"
#include "bwu/rng.h"
#include "bwu/serialize.h"

namespace bwu::subspace {
namespace {

std::vector<double> Gaussian(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

double SquaredNorm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double MaxAbsDiff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

// Explicit d x d matrix A = [A_1 ... A_k], column j = reconstruct(e_j).
std::vector<std::vector<double>> ExplicitColumns(const BlockBasis& basis) {
  std::vector<std::vector<double>> cols;
  for (int i = 0; i < basis.num_blocks(); ++i) {
    for (std::size_t j = 0; j < basis.sizes()[i]; ++j) {
      std::vector<std::vector<double>> coeffs(basis.num_blocks());
      for (int b = 0; b < basis.num_blocks(); ++b) {
        coeffs[b].assign(basis.sizes()[b], 0.0);
      }
      coeffs[i][j] = 1.0;
      cols.push_back(basis.reconstruct(coeffs));
    }
  }
  return cols;
}

double GramError(const std::vector<std::vector<double>>& cols) {
  double worst = 0.0;
  for (std::size_t a = 0; a < cols.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < cols[a].size(); ++r) {
        s += cols[a][r] * cols[b][r];
      }
      worst = std::max(worst, std::abs(s - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

const Strategy kAllStrategies[] = {Strategy::kRandomOrthonormal,
                                   Strategy::kPermutation,
                                   Strategy::kLayerCyclic, Strategy::kHeadBody};

// A few layers totalling d parameters.
std::vector<LayerShape> LayersForDim(std::size_t d) {
  switch (d) {
    case 8:
      return contiguous_layers({{2, 2}, {2, 2}});
    case 64:
      return contiguous_layers({{4, 8}, {4, 4}, {2, 8}});
    case 4096:
      return contiguous_layers({{32, 64}, {32, 32}, {16, 64}});
    default:
      return contiguous_layers({{d, 1}});
  }
}

TEST(BuildBasis, TwoByOneRandomOrthonormal) {
  const BlockBasis b =
      build_basis(Strategy::kRandomOrthonormal, contiguous_layers({{2, 1}}), 2, 7);
  EXPECT_EQ(b.dim(), 2u);
  EXPECT_EQ(b.sizes(), (std::vector<std::size_t>{1, 1}));
  EXPECT_LE(GramError(ExplicitColumns(b)), 1e-12);
  EXPECT_FALSE(b.is_index_basis());
}

TEST(BuildBasis, IdentityPermutationIsContiguousSlices) {
  const BlockBasis b = build_basis(Strategy::kPermutation,
                                   contiguous_layers({{4, 1}}), 2, 0,
                                   BasisOptions{.shuffle = false});
  EXPECT_TRUE(b.is_index_basis());
  EXPECT_EQ(b.block_indices(0), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(b.block_indices(1), (std::vector<std::size_t>{2, 3}));
  const std::vector<double> w = {1.0, 2.0, 3.0, 4.0};
  const auto parts = b.decompose(w);
  EXPECT_EQ(parts[0], (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(parts[1], (std::vector<double>{3.0, 4.0}));
}

TEST(BuildBasis, LayerCyclicFiveLayers) {
  const auto layers =
      contiguous_layers({{2, 1}, {3, 1}, {1, 2}, {2, 2}, {1, 1}});
  const BlockBasis b = build_basis(Strategy::kLayerCyclic, layers, 2, 0);
  std::vector<std::size_t> expect0, expect1;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t j = 0; j < layers[l].size(); ++j) {
      (l % 2 == 0 ? expect0 : expect1).push_back(offset + j);
    }
    offset += layers[l].size();
  }
  auto got0 = b.block_indices(0);
  auto got1 = b.block_indices(1);
  std::sort(got0.begin(), got0.end());
  std::sort(got1.begin(), got1.end());
  EXPECT_EQ(got0, expect0);
  EXPECT_EQ(got1, expect1);
}

TEST(BuildBasis, HeadBodyPutsLastLayerInBlockZero) {
  const auto layers = contiguous_layers({{3, 2}, {2, 4}, {4, 3}});
  const BlockBasis b = build_basis(Strategy::kHeadBody, layers, 2, 0);
  EXPECT_EQ(b.sizes()[0], 12u);
  EXPECT_EQ(b.sizes()[1], 14u);
  EXPECT_THROW(build_basis(Strategy::kHeadBody, layers, 3, 0), DomainError);
  EXPECT_THROW(build_basis(Strategy::kHeadBody, contiguous_layers({{3, 2}}), 2, 0),
               DomainError);
}

TEST(BuildBasis, Errors) {
  const auto layers = contiguous_layers({{2, 2}});
  EXPECT_THROW(build_basis(Strategy::kRandomOrthonormal, layers, 5, 0),
               DomainError);
  EXPECT_THROW(build_basis(Strategy::kPermutation, layers, 0, 0), DomainError);
  EXPECT_THROW(build_basis(Strategy::kLayerCyclic, layers, 2, 0), DomainError);
  EXPECT_THROW(parse_strategy("spiral"), DomainError);
  for (Strategy s : kAllStrategies) {
    EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  }
}

TEST(BuildBasis, BalancedSizesAndPartition) {
  for (Strategy s : {Strategy::kRandomOrthonormal, Strategy::kPermutation}) {
    for (int k : {1, 2, 3, 5, 7, 13}) {
      const auto layers = contiguous_layers({{5, 3}, {3, 6}, {2, 7}});
      const BlockBasis b = build_basis(s, layers, k, 99);
      const auto [lo, hi] = std::minmax_element(b.sizes().begin(), b.sizes().end());
      EXPECT_LE(*hi - *lo, 1u);
      EXPECT_EQ(std::accumulate(b.sizes().begin(), b.sizes().end(), 0u), b.dim());
      // Larger blocks come first.
      EXPECT_TRUE(std::is_sorted(b.sizes().rbegin(), b.sizes().rend()));
    }
  }
  const BlockBasis p = build_basis(Strategy::kPermutation,
                                   contiguous_layers({{5, 3}, {3, 6}}), 4, 3);
  std::set<std::size_t> seen;
  for (int i = 0; i < 4; ++i) {
    for (std::size_t j : p.block_indices(i)) EXPECT_TRUE(seen.insert(j).second);
  }
  EXPECT_EQ(seen.size(), p.dim());
}

TEST(BuildBasis, DeterministicInSeed) {
  const auto layers = LayersForDim(64);
  const BlockBasis a = build_basis(Strategy::kRandomOrthonormal, layers, 4, 5);
  const BlockBasis b = build_basis(Strategy::kRandomOrthonormal, layers, 4, 5);
  const BlockBasis c = build_basis(Strategy::kRandomOrthonormal, layers, 4, 6);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_NE(to_json(a).dump(), to_json(c).dump());
}

TEST(BuildBasis, ExplicitGramMatrixIsIdentity) {
  for (Strategy s : kAllStrategies) {
    for (std::size_t d : {8u, 64u}) {
      const BlockBasis b = build_basis(s, LayersForDim(d), 2, 17);
      EXPECT_LE(GramError(ExplicitColumns(b)), 1e-10)
          << strategy_name(s) << " d=" << d;
      EXPECT_LE(b.orthogonality_error(), 1e-10);
    }
  }
}

TEST(Decompose, ZeroAndRoundTrip) {
  const BlockBasis b =
      build_basis(Strategy::kRandomOrthonormal, LayersForDim(64), 4, 42);
  for (const auto& part : b.decompose(std::vector<double>(64, 0.0))) {
    for (double v : part) EXPECT_EQ(v, 0.0);
  }
  const auto w = Gaussian(64, 42);
  EXPECT_LE(MaxAbsDiff(b.reconstruct(b.decompose(w)), w), 1e-10);
  EXPECT_THROW(b.decompose(std::vector<double>(63)), DomainError);
}

TEST(Decompose, RoundTripAndNormPreservationAtAllSizes) {
  for (std::size_t d : {8u, 64u, 4096u}) {
    for (Strategy s : kAllStrategies) {
      const int reps = d == 4096 ? 5 : 25;
      for (int r = 0; r < reps; ++r) {
        const int layers = static_cast<int>(LayersForDim(d).size());
        const int k = s == Strategy::kHeadBody ? 2 : 1 + r % std::min(3, layers);
        const BlockBasis b = build_basis(s, LayersForDim(d), k, 1000 + r);
        const auto w = Gaussian(d, 2000 + r);
        const auto parts = b.decompose(w);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
          sum += SquaredNorm(parts[i]);
          EXPECT_EQ(b.block_coordinates(w, i), parts[i]);
        }
        double wmax = 0.0;
        for (double v : w) wmax = std::max(wmax, std::abs(v));
        EXPECT_LE(MaxAbsDiff(b.reconstruct(parts), w), 1e-10 * (1.0 + wmax));
        EXPECT_LE(std::abs(sum - SquaredNorm(w)), 1e-8 * SquaredNorm(w));
      }
    }
  }
}

TEST(Reconstruct, UnitCoefficientsGiveNormK) {
  const BlockBasis b =
      build_basis(Strategy::kRandomOrthonormal, LayersForDim(64), 4, 1);
  std::vector<std::vector<double>> parts(4);
  for (int i = 0; i < 4; ++i) {
    parts[i].assign(b.sizes()[i], 0.0);
    parts[i][i % parts[i].size()] = 1.0;
  }
  EXPECT_NEAR(SquaredNorm(b.reconstruct(parts)), 4.0, 1e-12);
}

TEST(AddToBlock, MatchesReconstructOfSingleBlock) {
  const BlockBasis b =
      build_basis(Strategy::kRandomOrthonormal, LayersForDim(64), 3, 8);
  auto w = Gaussian(64, 1);
  const auto w0 = w;
  const auto coeffs = Gaussian(b.sizes()[1], 2);
  b.add_to_block(1, coeffs, w, -0.5);
  std::vector<std::vector<double>> parts(3);
  for (int i = 0; i < 3; ++i) parts[i].assign(b.sizes()[i], 0.0);
  parts[1] = coeffs;
  const auto delta = b.reconstruct(parts);
  for (std::size_t j = 0; j < w.size(); ++j) {
    EXPECT_NEAR(w[j], w0[j] - 0.5 * delta[j], 1e-12);
  }
}

TEST(Gap, PythagorasAndSingleBlockDifference) {
  for (std::size_t d : {8u, 64u, 4096u}) {
    const BlockBasis b =
        build_basis(Strategy::kRandomOrthonormal, LayersForDim(d), 4, 3);
    const auto w = Gaussian(d, 4);
    const auto wp = Gaussian(d, 5);
    const GapVector g = gap(w, wp, b);
    double direct = 0.0;
    for (std::size_t j = 0; j < d; ++j) direct += (w[j] - wp[j]) * (w[j] - wp[j]);
    EXPECT_LE(std::abs(g.squared_norm() - direct), 1e-8 * direct);
    for (double z : g.z) EXPECT_GE(z, 0.0);
    for (double z : gap(w, w, b).z) EXPECT_EQ(z, 0.0);
  }
  const BlockBasis b =
      build_basis(Strategy::kRandomOrthonormal, LayersForDim(64), 4, 3);
  const auto w = Gaussian(64, 6);
  auto wp = w;
  const auto coeffs = Gaussian(b.sizes()[2], 7);
  b.add_to_block(2, coeffs, wp);
  const GapVector g = gap(w, wp, b);
  for (int i = 0; i < 4; ++i) {
    if (i == 2) {
      EXPECT_NEAR(g.z[i], std::sqrt(SquaredNorm(coeffs)), 1e-10);
    } else {
      EXPECT_LE(g.z[i], 1e-10);
    }
  }
  EXPECT_THROW(gap(w, std::vector<double>(3), b), DomainError);
}

TEST(BlockNoise, ZeroVarianceAndSpan) {
  const BlockBasis b =
      build_basis(Strategy::kRandomOrthonormal, LayersForDim(64), 4, 9);
  Rng rng(1);
  for (double v : sample_block_noise(b, 1, 0.0, rng)) EXPECT_EQ(v, 0.0);
  const auto n = sample_block_noise(b, 1, 2.0, rng);
  const auto parts = b.decompose(n);
  const double mag = std::sqrt(SquaredNorm(n));
  for (int i = 0; i < 4; ++i) {
    if (i == 1) continue;
    EXPECT_LE(std::sqrt(SquaredNorm(parts[i])), 1e-10 * mag);
  }
  EXPECT_THROW(sample_block_noise(b, 4, 1.0, rng), DomainError);
  EXPECT_THROW(sample_block_noise(b, 0, -1.0, rng), DomainError);
}

TEST(BlockNoise, ExpectedSquaredNorm) {
  const BlockBasis b =
      build_basis(Strategy::kRandomOrthonormal, LayersForDim(64), 4, 10);
  Rng rng(2);
  const int n = 4000;
  double mean = 0.0;
  for (int s = 0; s < n; ++s) mean += SquaredNorm(sample_block_noise(b, 3, 0.5, rng));
  mean /= n;
  const double r = static_cast<double>(b.sizes()[3]);
  // chi-square: sd of the mean is sigma2 * sqrt(2 r / n).
  EXPECT_NEAR(mean, 0.5 * r, 4.0 * 0.5 * std::sqrt(2.0 * r / n));
}

TEST(BlockNoise, SummedCovarianceIsIsotropic) {
  for (Strategy s : {Strategy::kRandomOrthonormal, Strategy::kPermutation}) {
    const BlockBasis b = build_basis(s, LayersForDim(8), 4, 11);
    Rng rng(12);
    const int n = 20000;
    const double sigma2 = 1.3;
    std::vector<double> cov(64, 0.0);
    for (int t = 0; t < n; ++t) {
      std::vector<double> total(8, 0.0);
      for (int i = 0; i < 4; ++i) {
        const auto z = sample_block_noise(b, i, sigma2, rng);
        for (int j = 0; j < 8; ++j) total[j] += z[j];
      }
      for (int a = 0; a < 8; ++a) {
        for (int c = 0; c < 8; ++c) cov[a * 8 + c] += total[a] * total[c];
      }
    }
    for (int a = 0; a < 8; ++a) {
      for (int c = 0; c < 8; ++c) {
        const double est = cov[a * 8 + c] / n;
        EXPECT_NEAR(est, a == c ? sigma2 : 0.0,
                    5.0 * sigma2 / std::sqrt(static_cast<double>(n)) * 3.0)
            << strategy_name(s);
      }
    }
  }
}

TEST(BlockNoise, SingleBlockCoordinateIsGaussian) {
  const BlockBasis b =
      build_basis(Strategy::kRandomOrthonormal, LayersForDim(8), 1, 13);
  Rng rng(14);
  const int n = 5000;
  std::vector<double> xs(n);
  for (int t = 0; t < n; ++t) xs[t] = sample_block_noise(b, 0, 4.0, rng)[3];
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (int t = 0; t < n; ++t) {
    const double cdf = 0.5 * std::erfc(-xs[t] / (2.0 * std::sqrt(2.0)));
    ks = std::max({ks, std::abs(cdf - t / static_cast<double>(n)),
                   std::abs(cdf - (t + 1) / static_cast<double>(n))});
  }
  // Asymptotic critical value at alpha = 0.01.
  EXPECT_LT(ks, 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST(Serialization, BasisJsonRoundTrip) {
  for (Strategy s : kAllStrategies) {
    const BlockBasis b = build_basis(s, LayersForDim(64), 2, 21);
    const BlockBasis c = basis_from_json(to_json(b));
    EXPECT_EQ(to_json(c).dump(), to_json(b).dump());
    const auto w = Gaussian(64, 22);
    EXPECT_EQ(b.decompose(w), c.decompose(w));
  }
  auto j = to_json(build_basis(Strategy::kPermutation, LayersForDim(8), 2, 1));
  j["version"] = 99;
  EXPECT_THROW(basis_from_json(j), FormatError);
}

}  // namespace
}  // namespace bwu::subspace
