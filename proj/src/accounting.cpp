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
#include <limits>
#include <string>

#include "bwu/errors.h"

namespace bwu::accounting {
namespace {

constexpr double kRoundTripSlack = 1e-9;

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void Require(bool ok, const std::string& message) {
  if (!ok) throw DomainError(message);
}

// ln(1 - gamma*lambda), accurate for tiny gamma*lambda.
double LogContraction(const BlockDynamics& dyn) {
  return std::log1p(-dyn.gamma * dyn.lambda);
}

// 1 / (1 - (1 - gamma*lambda)^2).
double Zeta(const BlockDynamics& dyn) {
  const double gl = dyn.gamma * dyn.lambda;
  return 1.0 / (gl * (2.0 - gl));
}

struct TrajectorySums {
  double drift = 0.0;       // 2 c0 rho^T + 2 gamma c1 sum_t rho^(T-1-t)
  double noise_gain = 0.0;  // sum_t rho^(2(T-1-t))
};

TrajectorySums Sums(int steps, const BlockDynamics& dyn) {
  const double t = static_cast<double>(steps);
  TrajectorySums s;
  if (dyn.lambda == 0.0) {
    s.drift = 2.0 * dyn.c0 + 2.0 * dyn.gamma * dyn.c1 * t;
    s.noise_gain = t;
    return s;
  }
  const double log_rho = LogContraction(dyn);
  const double x = std::exp(t * log_rho);
  const double one_minus_x = -std::expm1(t * log_rho);
  const double one_minus_x2 = -std::expm1(2.0 * t * log_rho);
  s.drift = 2.0 * dyn.c0 * x + 2.0 * dyn.c1 * one_minus_x / dyn.lambda;
  s.noise_gain = one_minus_x2 * Zeta(dyn);
  return s;
}

int CeilSteps(double real_steps) {
  const double slack = kRoundTripSlack * std::max(1.0, real_steps);
  const double t = std::ceil(real_steps - slack);
  if (!(t < static_cast<double>(std::numeric_limits<int>::max()))) {
    throw InfeasibleNoise("step count overflows: T = " + Num(real_steps));
  }
  return std::max(1, static_cast<int>(t));
}

// Without weight decay the condition is 2 gamma c1 T - cb sqrt(T) + 2 c0 <= 0.
double RealStepsNoDecay(double sigma2, const BlockDynamics& dyn) {
  const double cb2 = 2.0 * dyn.eps_renyi * sigma2 / dyn.q;
  const double disc = cb2 - 16.0 * dyn.gamma * dyn.c1 * dyn.c0;
  if (disc < 0.0) {
    throw InfeasibleNoise("sigma2 = " + Num(sigma2) +
                          " is below the certified threshold");
  }
  const double root =
      (std::sqrt(cb2) - std::sqrt(disc)) / (4.0 * dyn.gamma * dyn.c1);
  return root * root;
}

}  // namespace

std::string_view regime_name(Regime regime) {
  return regime == Regime::kClipDominant ? "clip_dominant" : "decay_dominant";
}

void BudgetSpec::validate() const {
  Require(epsilon > 0.0, "epsilon must be positive, got " + Num(epsilon));
  Require(delta > 0.0 && delta < 1.0,
          "delta must lie in (0, 1), got " + Num(delta));
  Require(gamma > 0.0, "gamma must be positive, got " + Num(gamma));
  Require(lambda >= 0.0, "lambda must be non-negative, got " + Num(lambda));
  Require(gamma * lambda < 1.0,
          "gamma*lambda must be < 1, got " + Num(gamma * lambda));
  Require(c0 > 0.0, "c0 must be positive, got " + Num(c0));
  Require(c1 > 0.0, "c1 must be positive, got " + Num(c1));
  if (q.has_value()) Require(*q > 1.0, "q must exceed 1, got " + Num(*q));
}

void BlockDynamics::validate() const {
  Require(gamma > 0.0, "gamma must be positive, got " + Num(gamma));
  Require(lambda >= 0.0, "lambda must be non-negative, got " + Num(lambda));
  Require(gamma * lambda < 1.0,
          "gamma*lambda must be < 1, got " + Num(gamma * lambda));
  Require(c0 > 0.0 && c1 > 0.0, "clipping radii must be positive");
  Require(q > 1.0, "q must exceed 1, got " + Num(q));
  Require(eps_renyi > 0.0,
          "Renyi budget must be positive, got " + Num(eps_renyi));
}

double rdp_to_dp(double eps_renyi, double q, double delta) {
  Require(q > 1.0, "q must exceed 1, got " + Num(q));
  Require(delta > 0.0 && delta <= 1.0,
          "delta must lie in (0, 1], got " + Num(delta));
  Require(eps_renyi >= 0.0,
          "Renyi budget must be non-negative, got " + Num(eps_renyi));
  return eps_renyi + std::log(1.0 / delta) / (q - 1.0);
}

double dp_to_rdp(double epsilon, double q, double delta) {
  Require(q > 1.0, "q must exceed 1, got " + Num(q));
  Require(delta > 0.0 && delta <= 1.0,
          "delta must lie in (0, 1], got " + Num(delta));
  const double eps_renyi = epsilon - std::log(1.0 / delta) / (q - 1.0);
  if (!(eps_renyi > 0.0)) {
    throw InfeasibleBudget("order q = " + Num(q) +
                           " leaves no Renyi budget for (epsilon, delta) = (" +
                           Num(epsilon) + ", " + Num(delta) + ")");
  }
  return eps_renyi;
}

double optimize_q(double epsilon, double delta) {
  Require(epsilon > 0.0, "epsilon must be positive, got " + Num(epsilon));
  Require(delta > 0.0 && delta < 1.0,
          "delta must lie in (0, 1) to optimise q, got " + Num(delta));
  const double l = std::log(1.0 / delta);
  return ((epsilon + l) + std::sqrt(l * (epsilon + l))) / epsilon;
}

MinNoiseResult min_noise(const BlockDynamics& dyn) {
  dyn.validate();
  const double prefactor =
      dyn.gamma * (2.0 - dyn.gamma * dyn.lambda) * 2.0 * dyn.q / dyn.eps_renyi;
  const double ratio = dyn.decay_ratio();
  MinNoiseResult out;
  if (ratio < 1.0) {
    out.regime = Regime::kClipDominant;
    out.sigma2 = prefactor * (2.0 - ratio) * dyn.c0 * dyn.c1;
    out.attained = true;
  } else {
    Require(dyn.lambda > 0.0, "decay-dominant bound requires lambda > 0");
    out.regime = Regime::kDecayDominant;
    out.sigma2 = prefactor * dyn.c1 * dyn.c1 / dyn.lambda;
    out.attained = false;
  }
  return out;
}

QuadraticAux quadratic_aux(double sigma2, const BlockDynamics& dyn) {
  dyn.validate();
  Require(dyn.lambda > 0.0, "quadratic form requires lambda > 0");
  Require(sigma2 > 0.0, "sigma2 must be positive, got " + Num(sigma2));
  QuadraticAux aux;
  aux.zeta = Zeta(dyn);
  aux.cb = std::sqrt(2.0 * dyn.eps_renyi * sigma2 / dyn.q);
  aux.beta0 = 2.0 * dyn.c1 / (dyn.lambda * aux.cb);
  aux.beta1 = aux.beta0 * (dyn.decay_ratio() - 1.0);
  aux.z = 1.0 - dyn.decay_ratio();
  aux.discriminant = 4.0 * aux.zeta *
                     (aux.zeta + aux.beta1 * aux.beta1 - aux.beta0 * aux.beta0);

  // Exactly at the clip-dominant minimum the discriminant vanishes; let
  // rounding below zero through.
  double disc = aux.discriminant;
  if (disc < 0.0) {
    const MinNoiseResult mn = min_noise(dyn);
    if (mn.regime == Regime::kClipDominant && sigma2 >= mn.sigma2 * (1 - 1e-12)) {
      disc = 0.0;
    }
  }
  if (disc < 0.0) {
    aux.x = std::numeric_limits<double>::quiet_NaN();
    return aux;
  }
  const double a = aux.beta1 * aux.beta1 + aux.zeta;
  const double b = 2.0 * aux.beta0 * aux.beta1;
  const double c = aux.beta0 * aux.beta0 - aux.zeta;
  const double sq = std::sqrt(disc);
  // Avoid cancellation in -b + sqrt(disc) when b > 0.
  aux.x = b <= 0.0 ? (-b + sq) / (2.0 * a) : (2.0 * c) / (-b - sq);
  return aux;
}

double largest_root(double sigma2, const BlockDynamics& dyn) {
  const QuadraticAux aux = quadratic_aux(sigma2, dyn);
  if (std::isnan(aux.x)) {
    throw InfeasibleNoise("sigma2 = " + Num(sigma2) +
                          " is below the certified threshold (negative "
                          "discriminant)");
  }
  const MinNoiseResult mn = min_noise(dyn);
  if (mn.regime == Regime::kDecayDominant &&
      sigma2 <= mn.sigma2 * (1.0 + 1e-12)) {
    throw InfeasibleNoise("sigma2 = " + Num(sigma2) +
                          " does not exceed the decay-dominant bound " +
                          Num(mn.sigma2) + "; T would be infinite");
  }
  if (!(aux.x > 0.0)) {
    throw InfeasibleNoise("no root in (0, 1] for sigma2 = " + Num(sigma2));
  }
  return std::min(aux.x, 1.0);
}

double real_steps_for_noise(double sigma2, const BlockDynamics& dyn) {
  dyn.validate();
  Require(sigma2 > 0.0, "sigma2 must be positive, got " + Num(sigma2));
  if (dyn.lambda == 0.0) return RealStepsNoDecay(sigma2, dyn);
  const double x = largest_root(sigma2, dyn);
  return std::log(x) / LogContraction(dyn);
}

int steps_for_noise(double sigma2, const BlockDynamics& dyn) {
  const int steps = CeilSteps(real_steps_for_noise(sigma2, dyn));
  // Near the double root x_max is ill-conditioned in sigma2 and the ceiling
  // can land one step high; the direct cost check is well conditioned.
  if (steps > 1 && is_certified(sigma2, steps - 1, dyn)) return steps - 1;
  return steps;
}

bool is_certified(double sigma2, int steps, const BlockDynamics& dyn) {
  return renyi_cost(sigma2, steps, dyn) <= dyn.eps_renyi * (1.0 + 1e-9);
}

int certified_steps_for_noise(double sigma2, const BlockDynamics& dyn) {
  const int steps = steps_for_noise(sigma2, dyn);
  // The certified window of real step counts can sit strictly between two
  // integers (always so at exactly sigma2_min); then no integer is certified.
  if (!is_certified(sigma2, steps, dyn)) {
    throw InfeasibleNoise("no integer step count is certified at sigma2 = " +
                          Num(sigma2) + " (T = " + std::to_string(steps) +
                          " costs " + Num(renyi_cost(sigma2, steps, dyn)) + ")");
  }
  return steps;
}

namespace {

// Positive root s = 1/sigma2 of a s^2 + b s + c = 0 at contraction x.
double NoiseFromContraction(double x, double one_minus_x2,
                            const BlockDynamics& dyn) {
  const double gl = dyn.gamma * dyn.lambda * (2.0 - dyn.gamma * dyn.lambda);
  const double z = 1.0 - dyn.decay_ratio();
  const double kk = 2.0 * dyn.q * dyn.c1 * dyn.c1 /
                    (dyn.eps_renyi * dyn.lambda * dyn.lambda);
  const double one_minus_xz = 1.0 - x * z;
  const double a = kk * kk * z * z * one_minus_xz * one_minus_xz;
  const double b =
      kk / gl * (1.0 - 2.0 * x * z + (2.0 * x * x - 1.0) * z * z);
  const double c = -one_minus_x2 / (gl * gl);

  if (a == 0.0) {
    // b s + c = 0 with s = 1/sigma2.
    if (!(b > 0.0)) throw NumericalError("degenerate noise equation");
    return -b / c;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    throw NumericalError("negative discriminant in noise_for_steps: " +
                         Num(disc));
  }
  const double sq = std::sqrt(disc);
  double sigma2 = 0.0;
  if (b <= 0.0) {
    sigma2 = 2.0 * a / (-b + sq);
  } else {
    sigma2 = (-b - sq) / (2.0 * c);
  }
  if (!std::isfinite(sigma2) || sigma2 <= 0.0) {
    throw NumericalError("noise_for_steps produced " + Num(sigma2));
  }
  return sigma2;
}

}  // namespace

double noise_for_steps(int steps, const BlockDynamics& dyn) {
  dyn.validate();
  Require(steps >= 1, "step count must be >= 1, got " + std::to_string(steps));
  if (dyn.lambda == 0.0) {
    const TrajectorySums s = Sums(steps, dyn);
    return dyn.q * s.drift * s.drift / (2.0 * dyn.eps_renyi * s.noise_gain);
  }
  const double t = static_cast<double>(steps);
  return NoiseFromContraction(std::exp(t * LogContraction(dyn)),
                              -std::expm1(2.0 * t * LogContraction(dyn)), dyn);
}

double noise_for_contraction(double x, const BlockDynamics& dyn) {
  dyn.validate();
  Require(dyn.lambda > 0.0, "noise_for_contraction needs lambda > 0");
  Require(x > 0.0 && x < 1.0, "contraction must lie in (0, 1), got " + Num(x));
  return NoiseFromContraction(x, (1.0 - x) * (1.0 + x), dyn);
}

double renyi_cost(double sigma2, int steps, const BlockDynamics& dyn) {
  dyn.validate();
  Require(sigma2 > 0.0, "sigma2 must be positive, got " + Num(sigma2));
  Require(steps >= 1, "step count must be >= 1, got " + std::to_string(steps));
  const TrajectorySums s = Sums(steps, dyn);
  return dyn.q * s.drift * s.drift / (2.0 * sigma2 * s.noise_gain);
}

BudgetSplit split_budget(double eps_renyi_total, double q, double delta,
                         int k, double c0, double c1,
                         bool scale_c0_per_block) {
  Require(k >= 1, "number of blocks must be >= 1, got " + std::to_string(k));
  Require(eps_renyi_total > 0.0, "Renyi budget must be positive");
  const double root_k = std::sqrt(static_cast<double>(k));
  BudgetSplit split;
  split.eps_renyi_per_block.assign(k, eps_renyi_total / k);
  split.c0_per_block.assign(k, scale_c0_per_block ? c0 / root_k : c0);
  split.c1_per_block.assign(k, c1 / root_k);
  double sum = 0.0;
  for (double e : split.eps_renyi_per_block) sum += e;
  split.total_epsilon = rdp_to_dp(sum, q, delta);
  return split;
}

BlockDynamics NoisePlan::block_dynamics(int block) const {
  Require(block >= 0 && block < k, "block index out of range");
  return BlockDynamics{budget.gamma,
                       budget.lambda,
                       c0_per_block[block],
                       c1_per_block[block],
                       q_used,
                       eps_renyi_per_block[block]};
}

double NoisePlan::reconstructed_epsilon() const {
  double sum = 0.0;
  for (double e : eps_renyi_per_block) sum += e;
  return rdp_to_dp(sum, q_used, budget.delta);
}

NoisePlan make_plan(const BudgetSpec& spec, int k, PlanMode mode,
                    PlanOptions options) {
  spec.validate();
  Require(k >= 1, "number of blocks must be >= 1, got " + std::to_string(k));
  if (mode.kind == PlanMode::Kind::kFixedSteps) {
    Require(mode.steps >= 1, "fixed step count must be >= 1");
  }

  NoisePlan plan;
  plan.budget = spec;
  plan.mode = mode;
  plan.k = k;
  plan.scale_c0_per_block = options.scale_c0_per_block;
  plan.q_used = spec.q.value_or(optimize_q(spec.epsilon, spec.delta));
  plan.eps_renyi_total = dp_to_rdp(spec.epsilon, plan.q_used, spec.delta);

  BudgetSplit split =
      split_budget(plan.eps_renyi_total, plan.q_used, spec.delta, k, spec.c0,
                   spec.c1, options.scale_c0_per_block);
  plan.eps_renyi_per_block = std::move(split.eps_renyi_per_block);
  plan.c0_per_block = std::move(split.c0_per_block);
  plan.c1_per_block = std::move(split.c1_per_block);

  // Blocks share identical parameters, so block 0 speaks for all of them.
  const BlockDynamics dyn = plan.block_dynamics(0);
  const MinNoiseResult mn = min_noise(dyn);
  plan.regime = mn.regime;
  plan.sigma2_min = mn.sigma2;
  plan.sigma2_min_attained = mn.attained;

  if (mode.kind == PlanMode::Kind::kMinNoise) {
    if (!mn.attained) {
      throw InfeasibleNoise(
          "minimal noise is not attained in the decay-dominant regime "
          "(lambda*c0/c1 = " +
          Num(dyn.decay_ratio()) + "); request a fixed step count instead");
    }
    plan.steps_per_block = steps_for_noise(mn.sigma2, dyn);
  } else {
    plan.steps_per_block = mode.steps;
  }
  // The smallest noise certifying the integer step count; never below the
  // theorem's bound.
  plan.sigma2 = noise_for_steps(plan.steps_per_block, dyn);

  const BlockDynamics global{spec.gamma,     spec.lambda,
                             spec.c0,        spec.c1,
                             plan.q_used,    plan.eps_renyi_total};
  plan.sigma2_global = noise_for_steps(plan.steps_per_block, global);

  plan.certified_renyi_per_block =
      renyi_cost(plan.sigma2, plan.steps_per_block, dyn);
  if (plan.certified_renyi_per_block >
      dyn.eps_renyi * (1.0 + 1e-9) + 1e-15) {
    throw NumericalError("plan exceeds its per-block Renyi budget: " +
                         Num(plan.certified_renyi_per_block) + " > " +
                         Num(dyn.eps_renyi));
  }
  if (spec.lambda > 0.0) plan.aux = quadratic_aux(plan.sigma2, dyn);
  return plan;
}

}  // namespace bwu::accounting
