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

#include "bwu/accounting.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bwu/errors.h"
#include "test_util.h"

namespace bwu::accounting {
namespace {

using ::bwu::testing::GridOptimizeQ;
using ::bwu::testing::LoopNoiseForSteps;
using ::bwu::testing::LoopRenyiCost;
using ::bwu::testing::OracleLargestRoot;
using ::bwu::testing::OracleMinNoise;
using ::bwu::testing::RandomDynamics;
using ::bwu::testing::RelErr;

BlockDynamics Dyn(double gamma, double lambda, double c0, double c1, double q,
                  double eps_r) {
  BlockDynamics d;
  d.gamma = gamma;
  d.lambda = lambda;
  d.c0 = c0;
  d.c1 = c1;
  d.q = q;
  d.eps_renyi = eps_r;
  return d;
}

// gamma=0.1, lambda=1, C0=1, C1=2, q=2, eps_r=1.
BlockDynamics SmallClip() { return Dyn(0.1, 1.0, 1.0, 2.0, 2.0, 1.0); }

TEST(RdpConversion, TableValues) {
  EXPECT_NEAR(rdp_to_dp(0.510, 24.50, 1e-5), 1.000, 1e-3);
  EXPECT_NEAR(rdp_to_dp(2.725, 6.06, 1e-5), 5.000, 2e-3);
  EXPECT_NEAR(dp_to_rdp(3.0, 9.10, 1e-5), 1.579, 2e-3);
  EXPECT_NEAR(dp_to_rdp(10.0, 2.77, 1e-3), 6.101, 5e-3);
  EXPECT_NEAR(dp_to_rdp(1.0, 24.50, 1e-5), 0.510, 1e-3);
  EXPECT_NEAR(dp_to_rdp(5.0, 6.06, 1e-5), 2.725, 2e-3);
}

TEST(RdpConversion, DeltaOneIsIdentity) {
  EXPECT_DOUBLE_EQ(rdp_to_dp(0.7, 3.3, 1.0), 0.7);
  EXPECT_DOUBLE_EQ(dp_to_rdp(1.0, 2.0, 1.0), 1.0);
}

TEST(RdpConversion, RoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const double q = testing::Uniform(rng, 1.5, 60.0);
    const double delta = testing::LogUniform(rng, 1e-9, 0.5);
    const double er = testing::LogUniform(rng, 1e-3, 10.0);
    EXPECT_NEAR(dp_to_rdp(rdp_to_dp(er, q, delta), q, delta), er, 1e-12);
  }
}

TEST(RdpConversion, Errors) {
  EXPECT_THROW(rdp_to_dp(0.5, 1.0, 1e-5), DomainError);
  EXPECT_THROW(rdp_to_dp(0.5, 2.0, 0.0), DomainError);
  EXPECT_THROW(rdp_to_dp(0.5, 2.0, 1.5), DomainError);
  EXPECT_THROW(dp_to_rdp(1.0, 2.0, 1e-5), InfeasibleBudget);
  EXPECT_THROW(dp_to_rdp(1.0, 0.5, 1e-5), DomainError);
}

TEST(OptimizeQ, TableValues) {
  EXPECT_NEAR(optimize_q(1.0, 1e-5), 24.50, 0.1);
  EXPECT_NEAR(optimize_q(5.0, 1e-5), 6.06, 0.05);
  EXPECT_NEAR(optimize_q(3.0, 1e-5), 9.10, 0.1);
  EXPECT_NEAR(optimize_q(10.0, 1e-3), 2.77, 0.05);
}

TEST(OptimizeQ, MatchesGridSearch) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const double eps = testing::LogUniform(rng, 0.3, 20.0);
    const double delta = testing::LogUniform(rng, 1e-10, 1e-2);
    const double q = optimize_q(eps, delta);
    const double grid = GridOptimizeQ(eps, delta);
    if (q > 500.0) continue;  // optimum outside the searched range
    EXPECT_NEAR(q, grid, 0.05) << "eps=" << eps << " delta=" << delta;
  }
}

TEST(OptimizeQ, Errors) {
  EXPECT_THROW(optimize_q(1.0, 1.0), DomainError);
  EXPECT_THROW(optimize_q(0.0, 1e-5), DomainError);
}

TEST(MinNoise, ClipDominantExample) {
  const MinNoiseResult r = min_noise(SmallClip());
  EXPECT_NEAR(r.sigma2, 2.28, 1e-12);
  EXPECT_EQ(r.regime, Regime::kClipDominant);
  EXPECT_TRUE(r.attained);
  EXPECT_LT(RelErr(r.sigma2, OracleMinNoise(SmallClip())), 1e-9);
}

TEST(MinNoise, DecayDominantExample) {
  const BlockDynamics d = Dyn(0.1, 2.0, 2.0, 2.0, 2.0, 1.0);
  const MinNoiseResult r = min_noise(d);
  EXPECT_NEAR(r.sigma2, 1.44, 1e-12);
  EXPECT_EQ(r.regime, Regime::kDecayDominant);
  EXPECT_FALSE(r.attained);
  // At the bound the largest root is x = 0, i.e. T is infinite.
  EXPECT_LT(OracleLargestRoot(r.sigma2, d).value_or(0.0), 1e-12);
  EXPECT_FALSE(OracleLargestRoot(0.999 * r.sigma2, d).has_value());
  EXPECT_TRUE(OracleLargestRoot(1.001 * r.sigma2, d).has_value());
  EXPECT_THROW(steps_for_noise(r.sigma2, d), InfeasibleNoise);
}

TEST(MinNoise, ContinuousAtRegimeBoundary) {
  BlockDynamics below = SmallClip();
  below.c0 = below.c1 / below.lambda * (1.0 - 1e-12);
  BlockDynamics at = below;
  at.c0 = at.c1 / at.lambda;
  EXPECT_LT(RelErr(min_noise(below).sigma2, min_noise(at).sigma2), 1e-9);
  EXPECT_EQ(min_noise(at).regime, Regime::kDecayDominant);
}

TEST(MinNoise, MatchesDiscriminantBisection) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const BlockDynamics d = i % 2 == 0 ? RandomDynamics(rng, 0.02, 0.98)
                                       : RandomDynamics(rng, 1.0, 5.0);
    const MinNoiseResult r = min_noise(d);
    EXPECT_LT(RelErr(r.sigma2, OracleMinNoise(d)), 1e-9) << "case " << i;
  }
}

TEST(MinNoise, NoRootBelowThreshold) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 100; ++i) {
    const BlockDynamics d = RandomDynamics(rng, 0.02, 0.98);
    const double s = 0.999 * min_noise(d).sigma2;
    const testing::Quadratic f = testing::CertificateQuadratic(s, d);
    for (int j = 1; j <= 10000; ++j) {
      ASSERT_GT(f(j / 10000.0), 0.0) << "case " << i;
    }
    EXPECT_THROW(largest_root(s, d), InfeasibleNoise);
    EXPECT_THROW(steps_for_noise(s, d), InfeasibleNoise);
  }
}

TEST(MinNoise, Errors) {
  BlockDynamics d = SmallClip();
  d.gamma = 1.0;
  EXPECT_THROW(min_noise(d), DomainError);
  d = SmallClip();
  d.q = 1.0;
  EXPECT_THROW(min_noise(d), DomainError);
}

TEST(StepsForNoise, AtMinNoise) {
  const BlockDynamics d = SmallClip();
  const double s = min_noise(d).sigma2;
  // A double root: rounding in sigma2 moves it by O(sqrt(ulp)).
  EXPECT_NEAR(largest_root(s, d), 0.5, 1e-7);
  EXPECT_NEAR(real_steps_for_noise(s, d), std::log(0.5) / std::log(0.9), 1e-6);
  EXPECT_EQ(steps_for_noise(s, d), 7);
  // The certified window at sigma2_min is the single real point 6.579.
  EXPECT_FALSE(is_certified(s, 7, d));
  EXPECT_THROW(certified_steps_for_noise(s, d), InfeasibleNoise);
}

TEST(StepsForNoise, AuxMatchesOracleRoot) {
  const BlockDynamics d = SmallClip();
  const double s = 3.0;
  const QuadraticAux aux = quadratic_aux(s, d);
  EXPECT_NEAR(aux.zeta, 1.0 / (1.0 - 0.81), 1e-12);
  EXPECT_NEAR(aux.cb, std::sqrt(2.0 * 1.0 * s / 2.0), 1e-12);
  EXPECT_NEAR(aux.z, 0.5, 1e-15);
  EXPECT_NEAR(aux.beta1, aux.beta0 * (0.5 - 1.0), 1e-12);
  EXPECT_NEAR(aux.x, *OracleLargestRoot(s, d), 1e-12);
}

TEST(StepsForNoise, HugeNoiseGivesOneStep) {
  const BlockDynamics d = SmallClip();
  const double s = 1e9 * min_noise(d).sigma2;
  EXPECT_GT(largest_root(s, d), 0.999);
  EXPECT_EQ(steps_for_noise(s, d), 1);
  EXPECT_TRUE(is_certified(s, 1, d));
}

TEST(StepsForNoise, RootMatchesOracleOnRandomSpecs) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 100; ++i) {
    const BlockDynamics d = RandomDynamics(rng, 0.02, 3.0);
    const double s = min_noise(d).sigma2 * testing::LogUniform(rng, 1.01, 100.0);
    const auto oracle = OracleLargestRoot(s, d);
    ASSERT_TRUE(oracle.has_value());
    EXPECT_LT(RelErr(largest_root(s, d), *oracle), 1e-9);
  }
}

TEST(StepsForNoise, RealStepsAtMinNoiseOnRandomSpecs) {
  std::mt19937_64 rng(24);
  for (int i = 0; i < 100; ++i) {
    const BlockDynamics d = RandomDynamics(rng, 0.02, 0.98);
    const double expected = std::log(1.0 - d.decay_ratio()) /
                            std::log(1.0 - d.gamma * d.lambda);
    EXPECT_LT(RelErr(real_steps_for_noise(min_noise(d).sigma2, d), expected),
              1e-6);
  }
}

TEST(NoiseForSteps, MatchesLoopSummation) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const BlockDynamics d = RandomDynamics(rng, 0.02, 3.0);
    for (int t : {1, 2, 3, 7, 40}) {
      EXPECT_LT(RelErr(noise_for_steps(t, d), LoopNoiseForSteps(t, d)), 1e-9)
          << "case " << i << " T=" << t;
      EXPECT_LT(RelErr(renyi_cost(1.7, t, d), LoopRenyiCost(1.7, t, d)), 1e-9);
    }
  }
}

TEST(NoiseForSteps, ContractionAtRootRecoversMinNoise) {
  const BlockDynamics d = SmallClip();
  const double s_min = min_noise(d).sigma2;
  const double x = largest_root(s_min, d);
  EXPECT_LT(RelErr(noise_for_contraction(x, d), s_min), 1e-9);
}

TEST(NoiseForSteps, RoundTripAndMonotoneOnFeasibleBranch) {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 100; ++i) {
    const BlockDynamics d = RandomDynamics(rng, 0.02, 3.0);
    const double rl = std::log(1.0 - d.gamma * d.lambda);
    const double t_star = d.decay_ratio() < 1.0
                              ? std::log(1.0 - d.decay_ratio()) / rl
                              : std::numeric_limits<double>::infinity();
    double prev = std::numeric_limits<double>::infinity();
    // Past x = 1e-6 the decay-dominant noise is the bound to within rounding.
    for (int t = 1; t <= 60 && std::exp(t * rl) >= 1e-6; ++t) {
      const double s = noise_for_steps(t, d);
      EXPECT_LE(steps_for_noise(s, d), t) << "case " << i << " T=" << t;
      EXPECT_TRUE(is_certified(s, t, d));
      if (t <= t_star) {
        EXPECT_LE(s, prev) << "case " << i << " T=" << t;
      }
      prev = s;
    }
  }
}

TEST(NoiseForSteps, TendsToLinearLimit) {
  const BlockDynamics d = Dyn(0.1, 2.0, 2.0, 2.0, 2.0, 1.0);
  // x -> 0: s = -c/b with the quadratic at x = 0, i.e. the decay bound.
  EXPECT_LT(RelErr(noise_for_steps(2000, d), min_noise(d).sigma2), 1e-9);
}

TEST(NoiseForSteps, ZeroDecayExtension) {
  BlockDynamics d = SmallClip();
  d.lambda = 0.0;
  for (int t : {1, 5, 20}) {
    EXPECT_LT(RelErr(noise_for_steps(t, d), LoopNoiseForSteps(t, d)), 1e-12);
  }
}

TEST(SplitBudget, MnistTable) {
  const double er = dp_to_rdp(1.0, optimize_q(1.0, 1e-5), 1e-5);
  const double c1[] = {70.71, 50.00, 37.80, 31.62, 27.74};
  const double epk[] = {0.255, 0.128, 0.073, 0.051, 0.039};
  const int ks[] = {2, 4, 7, 10, 13};
  for (int i = 0; i < 5; ++i) {
    const BudgetSplit s = split_budget(er, 24.5, 1e-5, ks[i], 0.005, 100.0);
    ASSERT_EQ(static_cast<int>(s.c1_per_block.size()), ks[i]);
    EXPECT_NEAR(s.c1_per_block[0], c1[i], 0.01);
    EXPECT_NEAR(s.eps_renyi_per_block[0], epk[i], 1e-3);
  }
}

TEST(SplitBudget, CifarTable) {
  const BudgetSplit s2 = split_budget(2.725, 6.06, 1e-5, 2, 0.005, 55.0);
  const BudgetSplit s4 = split_budget(2.725, 6.06, 1e-5, 4, 0.005, 55.0);
  EXPECT_NEAR(s2.c1_per_block[1], 38.891, 0.01);
  EXPECT_NEAR(s4.c1_per_block[3], 27.500, 0.01);
  EXPECT_NEAR(s4.eps_renyi_per_block[0], 0.681, 1e-3);
}

TEST(SplitBudget, CompositionReproducesEpsilon) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 100; ++i) {
    const double eps = testing::LogUniform(rng, 0.3, 20.0);
    const double delta = testing::LogUniform(rng, 1e-9, 1e-2);
    const double q = optimize_q(eps, delta);
    const int k = 1 + static_cast<int>(rng() % 16);
    const BudgetSplit s =
        split_budget(dp_to_rdp(eps, q, delta), q, delta, k, 1.0, 3.0);
    double sum = 0.0;
    for (double e : s.eps_renyi_per_block) sum += e;
    EXPECT_NEAR(rdp_to_dp(sum, q, delta), eps, 1e-12);
    EXPECT_NEAR(s.total_epsilon, eps, 1e-12);
  }
}

TEST(SplitBudget, IdentityAtOneBlock) {
  const BudgetSplit s = split_budget(0.5, 3.0, 1e-5, 1, 0.2, 7.0);
  EXPECT_EQ(s.eps_renyi_per_block[0], 0.5);
  EXPECT_EQ(s.c0_per_block[0], 0.2);
  EXPECT_EQ(s.c1_per_block[0], 7.0);
  EXPECT_THROW(split_budget(0.5, 3.0, 1e-5, 0, 0.2, 7.0), DomainError);
}

TEST(SplitBudget, UnscaledC0) {
  const BudgetSplit s = split_budget(0.5, 3.0, 1e-5, 4, 0.2, 8.0, false);
  EXPECT_EQ(s.c0_per_block[2], 0.2);
  EXPECT_EQ(s.c1_per_block[2], 4.0);
}

BudgetSpec MnistSpec() {
  BudgetSpec s;
  s.epsilon = 1.0;
  s.delta = 1e-5;
  s.gamma = 1e-4;
  s.lambda = 10.0;
  s.c1 = 100.0;
  s.c0 = 0.01 / 2.0;
  return s;
}

TEST(MakePlan, MnistFixedSteps) {
  const NoisePlan p = make_plan(MnistSpec(), 2, PlanMode::FixedSteps(2));
  EXPECT_NEAR(p.q_used, 24.5, 0.1);
  EXPECT_NEAR(p.eps_renyi_per_block[0], 0.255, 1e-3);
  EXPECT_EQ(p.steps_per_block, 2);
  EXPECT_EQ(p.total_noisy_steps(), 4);
  EXPECT_GE(p.sigma2, p.sigma2_min);
  EXPECT_NEAR(p.reconstructed_epsilon(), 1.0, 1e-9);
  EXPECT_LE(p.certified_renyi_per_block,
            p.eps_renyi_per_block[0] * (1.0 + 1e-9));
}

TEST(MakePlan, MnistNoiseComparison) {
  // The published variance for this configuration is 0.0980; the mapping of
  // its inputs is ambiguous, so the value is recorded rather than asserted.
  const NoisePlan p = make_plan(MnistSpec(), 2, PlanMode::FixedSteps(2));
  ::testing::Test::RecordProperty("sigma2_k2_T2", std::to_string(p.sigma2));
  EXPECT_GT(p.sigma2, 0.0);
}

TEST(MakePlan, CifarClasswiseOrder) {
  BudgetSpec s = MnistSpec();
  s.epsilon = 10.0;
  s.delta = 1e-3;
  s.gamma = 1e-3;
  s.lambda = 3.0;
  s.c1 = 55.0;
  s.c0 = 0.025;
  const NoisePlan p = make_plan(s, 1, PlanMode::FixedSteps(2));
  EXPECT_NEAR(p.q_used, 2.77, 0.05);
  EXPECT_NEAR(p.eps_renyi_total, 6.101, 5e-3);
}

TEST(MakePlan, MinNoiseSingleBlockIsBaseline) {
  const BudgetSpec s = MnistSpec();
  const NoisePlan p = make_plan(s, 1, PlanMode::MinNoise());
  const BlockDynamics d = p.block_dynamics(0);
  EXPECT_EQ(d.c0, s.c0);
  EXPECT_EQ(d.c1, s.c1);
  EXPECT_DOUBLE_EQ(p.sigma2_min, min_noise(d).sigma2);
  EXPECT_TRUE(is_certified(p.sigma2, p.steps_per_block, d));
  EXPECT_EQ(p.sigma2, p.sigma2_global);
}

TEST(MakePlan, DeterministicAndCertifiedPerBlock) {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 50; ++i) {
    BudgetSpec s;
    s.epsilon = testing::LogUniform(rng, 0.3, 10.0);
    s.delta = 1e-5;
    s.gamma = testing::LogUniform(rng, 1e-4, 1e-1);
    s.lambda = testing::Uniform(rng, 0.1, 0.9) / s.gamma;
    s.c1 = testing::LogUniform(rng, 1.0, 100.0);
    s.c0 = testing::Uniform(rng, 0.02, 0.98) * s.c1 / s.lambda;
    const int k = 1 + static_cast<int>(rng() % 8);
    const PlanMode mode = i % 2 ? PlanMode::MinNoise() : PlanMode::FixedSteps(3);
    const NoisePlan a = make_plan(s, k, mode);
    const NoisePlan b = make_plan(s, k, mode);
    EXPECT_EQ(a.sigma2, b.sigma2);
    EXPECT_EQ(a.steps_per_block, b.steps_per_block);
    for (int blk = 0; blk < k; ++blk) {
      const BlockDynamics d = a.block_dynamics(blk);
      EXPECT_TRUE(is_certified(a.sigma2, a.steps_per_block, d));
      EXPECT_GE(a.sigma2, min_noise(d).sigma2 * (1.0 - 1e-12));
    }
    EXPECT_NEAR(a.reconstructed_epsilon(), s.epsilon, 1e-9);
  }
}

TEST(MakePlan, InfeasibleBudgetPropagates) {
  BudgetSpec s = MnistSpec();
  s.q = 1.5;
  EXPECT_THROW(make_plan(s, 2, PlanMode::MinNoise()), InfeasibleBudget);
  EXPECT_THROW(make_plan(MnistSpec(), 0, PlanMode::MinNoise()), DomainError);
}

}  // namespace
}  // namespace bwu::accounting
