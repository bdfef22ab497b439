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

// Numeric checks of the Renyi-divergence machinery.

#ifndef BWU_DIVERGENCE_H_
#define BWU_DIVERGENCE_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "bwu/accounting.h"
#include "bwu/rng.h"
#include "bwu/subspace.h"

namespace bwu::divergence {

// D_q(N(a, s2) || N(0, s2)) = q a^2 / (2 s2).
double renyi_gaussian_shift(double q, double a, double sigma2);

inline constexpr std::size_t kMinGridPoints = 1024;
inline constexpr std::size_t kDefaultGridPoints = 16384;

// Density tabulated on n equally spaced points over [lo, hi].
class Density1D {
 public:
  // Values must be finite and >= 0. With normalize = true they are rescaled
  // to unit trapezoid mass; otherwise the mass must already be 1 +- 1e-6.
  Density1D(double lo, double hi, std::vector<double> values,
            bool normalize = false);

  static Density1D from_function(double lo, double hi, std::size_t n,
                                 const std::function<double(double)>& f,
                                 bool normalize = false);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t size() const { return values_.size(); }
  double step() const;
  double x(std::size_t i) const;
  const std::vector<double>& values() const { return values_; }
  double mass() const;
  bool same_grid(const Density1D& other) const;

 private:
  double lo_;
  double hi_;
  std::vector<double> values_;
};

Density1D gaussian_density(double mean, double sigma2, double lo, double hi,
                           std::size_t n = kDefaultGridPoints);

// (1 / (q - 1)) log integral mu^q nu^(1-q), by the trapezoid rule in the log
// domain. +infinity when mu > 0 somewhere nu = 0.
double numeric_renyi(const Density1D& mu, const Density1D& nu, double q);

struct NoiseEquivalenceReport {
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  double sigma2 = 0.0;
  double max_cov_deviation = 0.0;  // max_ij |S_ij - sigma2 I_ij|
  double cov_threshold = 0.0;      // 3 sigma2 sqrt(2 / n)
  std::vector<double> ks;          // per-coordinate KS statistic
  double ks_max = 0.0;
  double ks_critical = 0.0;        // Bonferroni over coordinates at 1%
  bool pass = false;
};

// Draws n full sweeps of block noise sum_i A_i zeta_i and compares their
// empirical law with N(0, sigma2 I_d).
NoiseEquivalenceReport check_block_noise_equivalence(
    const subspace::BlockBasis& basis, double sigma2, std::size_t n_samples,
    Rng& rng);

struct TrajectorySpec {
  accounting::BlockDynamics dyn;
  double sigma2 = 0.0;
  int steps = 1;
  // Initial points are +-initial_gap / 2; absent means 2 * c0.
  std::optional<double> initial_gap;
  // Drive the two runs with gradients +c1 and -c1.
  bool adversarial_drift = true;
};

struct TrajectoryReport {
  double mean_gap = 0.0;
  double variance = 0.0;
  double numeric_divergence = 0.0;
  double closed_form = 0.0;
  double certified = 0.0;  // dyn.eps_renyi
  bool pass = false;
};

inline constexpr double kTrajectoryTolerance = 1e-3;

// Runs the coupled scalar recurrences x <- (1 - gamma lambda) x - gamma g + xi
// in law (both terminals are Gaussian with equal variance) and measures
// D_q between them by quadrature.
TrajectoryReport check_budget_bound_on_trajectories(const TrajectorySpec& spec);

}  // namespace bwu::divergence

#endif  // BWU_DIVERGENCE_H_
