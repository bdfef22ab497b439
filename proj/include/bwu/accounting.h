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

// Closed-form privacy accounting for noisy fine-tuning.
//
// A noisy fine-tuning run with step size gamma, weight decay lambda, gradient
// clipping radius c1 and initial-distance radius c0 is certified at Renyi
// order q when the drift between two coupled trajectories is hidden by the
// accumulated Gaussian noise. With x = (1 - gamma*lambda)^T this reduces to
//
//   (beta1^2 + zeta) x^2 + 2 beta0 beta1 x + (beta0^2 - zeta) <= 0,
//
// whose largest root x_max gives the minimal step count, and whose
// discriminant gives the minimal noise variance. Block-wise unlearning splits
// the Renyi budget evenly over k blocks and scales both radii by 1/sqrt(k).
//
// All logarithms are natural.

#ifndef BWU_ACCOUNTING_H_
#define BWU_ACCOUNTING_H_

#include <optional>
#include <string_view>
#include <vector>

namespace bwu::accounting {

enum class Regime { kClipDominant, kDecayDominant };

std::string_view regime_name(Regime regime);

// Total (epsilon, delta) budget plus the dynamics constants of the run.
struct BudgetSpec {
  double epsilon = 1.0;
  double delta = 1e-5;
  double gamma = 1e-4;
  double lambda = 0.0;
  double c1 = 1.0;
  // Delta(rho)/2 in the proximity formulation, the model clipping radius in
  // the worst-case formulation.
  double c0 = 1.0;
  // Renyi order; empty means "pick the order minimising the noise".
  std::optional<double> q;

  // Throws DomainError unless epsilon > 0, 0 < delta < 1, gamma > 0,
  // lambda >= 0, gamma*lambda < 1, c0 > 0, c1 > 0 and q > 1 (if given).
  void validate() const;
};

// Inputs to the single-block certificate.
struct BlockDynamics {
  double gamma = 0.0;
  double lambda = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double q = 2.0;
  double eps_renyi = 1.0;

  void validate() const;
  // lambda * c0 / c1.
  double decay_ratio() const { return lambda * c0 / c1; }
};

struct MinNoiseResult {
  double sigma2 = 0.0;
  Regime regime = Regime::kClipDominant;
  // False in the decay-dominant regime, where sigma2 is an infimum and any
  // finite step count needs strictly more noise.
  bool attained = true;
};

// Intermediate scalars of the step-count derivation, reported for debugging
// and golden tests. x is the largest root (NaN if there is none).
struct QuadraticAux {
  double zeta = 0.0;
  double beta0 = 0.0;
  double beta1 = 0.0;
  double cb = 0.0;
  double z = 0.0;
  double x = 0.0;
  double discriminant = 0.0;
};

// eps = eps_renyi + ln(1/delta)/(q - 1).
double rdp_to_dp(double eps_renyi, double q, double delta);
// eps_renyi = eps - ln(1/delta)/(q - 1); InfeasibleBudget if not positive.
double dp_to_rdp(double epsilon, double q, double delta);
// Order minimising q / eps_renyi(q):
//   q* = ((eps + L) + sqrt(L (eps + L))) / eps,  L = ln(1/delta).
double optimize_q(double epsilon, double delta);

MinNoiseResult min_noise(const BlockDynamics& dyn);

// Requires lambda > 0.
QuadraticAux quadratic_aux(double sigma2, const BlockDynamics& dyn);

// Largest x in (0, 1] at which sigma2 certifies the run. InfeasibleNoise if
// none exists.
double largest_root(double sigma2, const BlockDynamics& dyn);

// Real-valued minimal step count T(sigma2) = ln(x_max) / ln(1 - gamma*lambda).
double real_steps_for_noise(double sigma2, const BlockDynamics& dyn);

// ceil(T(sigma2)), at least 1. Values within 1e-9 (relative) above an integer
// round down to it so that exact round trips through noise_for_steps() are
// stable, and when the integer just below is certified directly (the root is
// ill-conditioned near sigma2_min) that integer is returned. The ceiling can
// land just outside the certified window of real step
// counts (always so at exactly sigma2_min); see certified_steps_for_noise().
int steps_for_noise(double sigma2, const BlockDynamics& dyn);

// renyi_cost(sigma2, steps) <= eps_renyi up to 1e-9 relative.
bool is_certified(double sigma2, int steps, const BlockDynamics& dyn);

// steps_for_noise(), but InfeasibleNoise unless that step count is certified.
int certified_steps_for_noise(double sigma2, const BlockDynamics& dyn);

// Smallest sigma2 certifying exactly T steps, i.e. the positive root of the
// quadratic in s = 1/sigma2 at x = (1 - gamma*lambda)^T.
double noise_for_steps(int steps, const BlockDynamics& dyn);
// The same inversion at a real contraction x = (1 - gamma*lambda)^T in (0, 1);
// requires lambda > 0.
double noise_for_contraction(double x, const BlockDynamics& dyn);

// Renyi divergence certified after `steps` steps at noise sigma2:
//   q * drift^2 / (2 sigma2 sum_t rho^(2(T-1-t))),
// drift = 2 c0 rho^T + 2 gamma c1 sum_t rho^(T-1-t),  rho = 1 - gamma*lambda.
double renyi_cost(double sigma2, int steps, const BlockDynamics& dyn);

struct BudgetSplit {
  std::vector<double> eps_renyi_per_block;
  std::vector<double> c0_per_block;
  std::vector<double> c1_per_block;
  // sum of per-block Renyi budgets + ln(1/delta)/(q - 1).
  double total_epsilon = 0.0;
};

BudgetSplit split_budget(double eps_renyi_total, double q, double delta,
                         int k, double c0, double c1,
                         bool scale_c0_per_block = true);

struct PlanMode {
  enum class Kind { kMinNoise, kFixedSteps };
  Kind kind = Kind::kMinNoise;
  int steps = 0;

  static PlanMode MinNoise() { return {Kind::kMinNoise, 0}; }
  static PlanMode FixedSteps(int t) { return {Kind::kFixedSteps, t}; }
};

struct PlanOptions {
  bool scale_c0_per_block = true;
};

struct NoisePlan {
  BudgetSpec budget;
  PlanMode mode;
  int k = 1;
  bool scale_c0_per_block = true;

  double q_used = 0.0;
  double eps_renyi_total = 0.0;
  std::vector<double> eps_renyi_per_block;
  std::vector<double> c0_per_block;
  std::vector<double> c1_per_block;

  Regime regime = Regime::kClipDominant;
  // Theorem-level lower bound for the per-block parameters.
  double sigma2_min = 0.0;
  bool sigma2_min_attained = true;
  // Noise actually used: the smallest variance certifying steps_per_block.
  double sigma2 = 0.0;
  int steps_per_block = 1;
  // Same noise computed from the undivided budget and radii (k = 1 inputs).
  double sigma2_global = 0.0;
  // Renyi divergence certified per block at (sigma2, steps_per_block).
  double certified_renyi_per_block = 0.0;
  std::optional<QuadraticAux> aux;

  int total_noisy_steps() const { return k * steps_per_block; }
  BlockDynamics block_dynamics(int block) const;
  // Sum of per-block Renyi budgets converted back to (epsilon, delta).
  double reconstructed_epsilon() const;
};

NoisePlan make_plan(const BudgetSpec& spec, int k, PlanMode mode,
                    PlanOptions options = {});

}  // namespace bwu::accounting

#endif  // BWU_ACCOUNTING_H_
