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

#include "bwu/divergence.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bwu/accounting.h"
#include "bwu/errors.h"
#include "bwu/subspace.h"
#include "test_util.h"

namespace bwu::divergence {
namespace {

// Numeric D_q between N(a, s2) and N(0, s2) on a grid of +-12 sd around both.
double NumericShift(double q, double a, double s2) {
  const double sd = std::sqrt(s2);
  const double lo = std::min(0.0, q * a) - 12.0 * sd;
  const double hi = std::max(a, q * a) + 12.0 * sd;
  return numeric_renyi(gaussian_density(a, s2, lo, hi),
                       gaussian_density(0.0, s2, lo, hi), q);
}

TEST(GaussianShift, ClosedFormExamples) {
  EXPECT_EQ(renyi_gaussian_shift(2.0, 0.0, 1.0), 0.0);
  EXPECT_EQ(renyi_gaussian_shift(2.0, 1.0, 1.0), 1.0);
  EXPECT_NEAR(renyi_gaussian_shift(3.0, 0.5, 0.25), 1.5, 1e-15);
  EXPECT_THROW(renyi_gaussian_shift(2.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(renyi_gaussian_shift(1.0, 1.0, 1.0), DomainError);
}

TEST(GaussianShift, ScalesAsShiftSquaredOverVariance) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const double q = testing::Uniform(rng, 1.1, 20.0);
    const double a = testing::Uniform(rng, -3.0, 3.0);
    const double s2 = testing::LogUniform(rng, 1e-3, 10.0);
    const double c = testing::Uniform(rng, 0.1, 5.0);
    const double base = renyi_gaussian_shift(q, a, s2);
    EXPECT_NEAR(renyi_gaussian_shift(q, c * a, s2), c * c * base, 1e-12 * (1 + base * c * c));
    EXPECT_NEAR(renyi_gaussian_shift(q, a, c * s2), base / c, 1e-12 * (1 + base / c));
  }
}

TEST(NumericRenyi, MatchesClosedFormOnGaussianPairs) {
  EXPECT_NEAR(NumericShift(3.0, 0.5, 0.25), 1.5, 1e-4);
  std::mt19937_64 rng(2);
  // Shifts are drawn so that the divergence lies in [0, 5]. Far larger values
  // push the tilted integrand into the range where a tabulated N(0, s2)
  // underflows to zero.
  for (int i = 0; i < 20; ++i) {
    const double q = testing::Uniform(rng, 1.2, 10.0);
    const double s2 = testing::LogUniform(rng, 0.05, 4.0);
    const double target = testing::Uniform(rng, 0.0, 5.0);
    const double a = (i % 2 ? -1.0 : 1.0) * std::sqrt(2.0 * s2 * target / q);
    EXPECT_NEAR(NumericShift(q, a, s2), renyi_gaussian_shift(q, a, s2), 1e-4)
        << "q=" << q << " a=" << a << " s2=" << s2;
  }
}

TEST(NumericRenyi, IdenticalDensitiesGiveZero) {
  const Density1D g = gaussian_density(0.3, 0.7, -10.0, 10.0);
  EXPECT_NEAR(numeric_renyi(g, g, 2.5), 0.0, 1e-8);
}

TEST(NumericRenyi, DisjointSupportIsInfinite) {
  const std::size_t n = 2048;
  std::vector<double> left(n, 0.0), right(n, 0.0);
  for (std::size_t i = 0; i < n / 2; ++i) left[i] = 1.0;
  for (std::size_t i = n / 2; i < n; ++i) right[i] = 1.0;
  const Density1D mu(0.0, 1.0, left, true);
  const Density1D nu(0.0, 1.0, right, true);
  EXPECT_EQ(numeric_renyi(mu, nu, 2.0), std::numeric_limits<double>::infinity());
}

TEST(NumericRenyi, NondecreasingInOrder) {
  const Density1D mu = gaussian_density(0.8, 1.0, -15.0, 15.0);
  const Density1D nu = gaussian_density(0.0, 1.0, -15.0, 15.0);
  double prev = 0.0;
  for (double q = 1.1; q <= 8.0; q += 0.3) {
    const double d = numeric_renyi(mu, nu, q);
    EXPECT_GE(d, prev - 1e-12);
    prev = d;
  }
}

TEST(Density1D, Validation) {
  EXPECT_THROW(Density1D(0.0, 1.0, std::vector<double>(100, 1.0)), DomainError);
  EXPECT_THROW(Density1D(0.0, 1.0, std::vector<double>(2048, 2.0)), DomainError);
  const Density1D ok(0.0, 1.0, std::vector<double>(2048, 2.0), true);
  EXPECT_NEAR(ok.mass(), 1.0, 1e-12);
  std::vector<double> neg(2048, 1.0);
  neg[5] = -1.0;
  EXPECT_THROW(Density1D(0.0, 1.0, neg, true), DomainError);
  const Density1D a = gaussian_density(0.0, 1.0, -5.0, 5.0, 2048);
  const Density1D b = gaussian_density(0.0, 1.0, -6.0, 6.0, 2048);
  EXPECT_THROW(numeric_renyi(a, b, 2.0), DomainError);
}

TEST(NoiseEquivalence, ZeroVariancePasses) {
  const auto basis = subspace::build_basis(subspace::Strategy::kRandomOrthonormal,
                                           subspace::contiguous_layers({{4, 2}}), 4, 1);
  Rng rng(1);
  const NoiseEquivalenceReport r = check_block_noise_equivalence(basis, 0.0, 100, rng);
  EXPECT_EQ(r.max_cov_deviation, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(NoiseEquivalence, BothBasesPassAtDimensionEight) {
  for (auto s : {subspace::Strategy::kRandomOrthonormal,
                 subspace::Strategy::kPermutation}) {
    const auto basis =
        subspace::build_basis(s, subspace::contiguous_layers({{4, 2}}), 4, 3);
    Rng rng(4);
    const NoiseEquivalenceReport r =
        check_block_noise_equivalence(basis, 1.0, 20000, rng);
    EXPECT_EQ(r.dim, 8u);
    EXPECT_NEAR(r.cov_threshold, 3.0 * std::sqrt(2.0 / 20000.0), 1e-15);
    EXPECT_LE(r.max_cov_deviation, r.cov_threshold);
    EXPECT_LE(r.ks_max, r.ks_critical);
    EXPECT_TRUE(r.pass) << subspace::strategy_name(s);
  }
}

accounting::BlockDynamics SmallClip() {
  accounting::BlockDynamics d;
  d.gamma = 0.1;
  d.lambda = 1.0;
  d.c0 = 1.0;
  d.c1 = 2.0;
  d.q = 2.0;
  d.eps_renyi = 1.0;
  return d;
}

TEST(Trajectories, IdenticalStartsAndNoDriftGiveZero) {
  TrajectorySpec s;
  s.dyn = SmallClip();
  s.sigma2 = 1.0;
  s.steps = 5;
  s.initial_gap = 0.0;
  s.adversarial_drift = false;
  const TrajectoryReport r = check_budget_bound_on_trajectories(s);
  EXPECT_EQ(r.mean_gap, 0.0);
  EXPECT_NEAR(r.numeric_divergence, 0.0, 1e-8);
  EXPECT_TRUE(r.pass);
}

TEST(Trajectories, WorstCaseAtMinimalNoise) {
  TrajectorySpec s;
  s.dyn = SmallClip();
  s.sigma2 = accounting::min_noise(s.dyn).sigma2;
  s.steps = 7;
  const TrajectoryReport at_min = check_budget_bound_on_trajectories(s);
  // T = 7 sits just past the single certified real step count 6.58: the exact
  // divergence is 1.0008, inside the lab tolerance of 1e-3.
  EXPECT_NEAR(at_min.closed_form, accounting::renyi_cost(s.sigma2, 7, s.dyn), 1e-9);
  EXPECT_NEAR(at_min.numeric_divergence, at_min.closed_form, 1e-4);
  EXPECT_GT(at_min.numeric_divergence, 1.0);
  EXPECT_TRUE(at_min.pass);

  s.sigma2 *= 2.0;
  const TrajectoryReport doubled = check_budget_bound_on_trajectories(s);
  EXPECT_LT(doubled.numeric_divergence, at_min.numeric_divergence);
  EXPECT_LE(doubled.numeric_divergence, 1.0);
}

TEST(Trajectories, CertifiedPlansNeverViolate) {
  std::mt19937_64 rng(7);
  int checked = 0;
  for (int i = 0; i < 60; ++i) {
    const accounting::BlockDynamics d = i % 3 == 2
                                            ? testing::RandomDynamics(rng, 1.0, 3.0)
                                            : testing::RandomDynamics(rng, 0.05, 0.95);
    const double s2 = accounting::min_noise(d).sigma2 * testing::LogUniform(rng, 1.01, 20.0);
    int steps = 0;
    try {
      steps = accounting::certified_steps_for_noise(s2, d);
    } catch (const InfeasibleNoise&) {
      steps = std::max(1, static_cast<int>(rng() % 20));
      const double fixed = accounting::noise_for_steps(steps, d);
      TrajectorySpec s{d, fixed, steps, std::nullopt, true};
      EXPECT_TRUE(check_budget_bound_on_trajectories(s).pass) << "case " << i;
      ++checked;
      continue;
    }
    TrajectorySpec s{d, s2, steps, std::nullopt, true};
    const TrajectoryReport r = check_budget_bound_on_trajectories(s);
    EXPECT_TRUE(r.pass) << "case " << i << " numeric " << r.numeric_divergence
                        << " certified " << r.certified;
    ++checked;
  }
  EXPECT_GE(checked, 50);
}

}  // namespace
}  // namespace bwu::divergence
