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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "bwu/errors.h"

namespace bwu::divergence {
namespace {

double Trapezoid(const std::vector<double>& v, double h) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i == 0 || i + 1 == v.size()) ? 0.5 * v[i] : v[i];
  return s * h;
}

double NormalCdf(double x, double sd) {
  return 0.5 * std::erfc(-x / (sd * std::numbers::sqrt2));
}

}  // namespace

double renyi_gaussian_shift(double q, double a, double sigma2) {
  if (!(q > 1.0)) throw DomainError("Renyi order must be > 1");
  if (!(sigma2 > 0.0)) throw DomainError("variance must be > 0");
  return q * a * a / (2.0 * sigma2);
}

Density1D::Density1D(double lo, double hi, std::vector<double> values,
                     bool normalize)
    : lo_(lo), hi_(hi), values_(std::move(values)) {
  if (!(hi_ > lo_) || !std::isfinite(lo_) || !std::isfinite(hi_))
    throw DomainError("density grid needs finite lo < hi");
  if (values_.size() < kMinGridPoints)
    throw DomainError("density grid needs at least 1024 points");
  for (double v : values_)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DomainError("density values must be finite and >= 0");
  const double m = mass();
  if (normalize) {
    if (!(m > 0.0)) throw DomainError("density has zero mass");
    for (double& v : values_) v /= m;
  } else if (std::abs(m - 1.0) > 1e-6) {
    throw DomainError("density is not normalised");
  }
}

Density1D Density1D::from_function(double lo, double hi, std::size_t n,
                                   const std::function<double(double)>& f,
                                   bool normalize) {
  if (n < 2) throw DomainError("density grid needs at least 1024 points");
  std::vector<double> v(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = f(lo + h * static_cast<double>(i));
  return Density1D(lo, hi, std::move(v), normalize);
}

double Density1D::step() const {
  return (hi_ - lo_) / static_cast<double>(values_.size() - 1);
}

double Density1D::x(std::size_t i) const {
  return lo_ + step() * static_cast<double>(i);
}

double Density1D::mass() const { return Trapezoid(values_, step()); }

bool Density1D::same_grid(const Density1D& other) const {
  return lo_ == other.lo_ && hi_ == other.hi_ && size() == other.size();
}

Density1D gaussian_density(double mean, double sigma2, double lo, double hi,
                           std::size_t n) {
  if (!(sigma2 > 0.0)) throw DomainError("variance must be > 0");
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigma2);
  return Density1D::from_function(
      lo, hi, n,
      [&](double x) { return c * std::exp(-(x - mean) * (x - mean) / (2 * sigma2)); },
      true);
}

double numeric_renyi(const Density1D& mu, const Density1D& nu, double q) {
  if (!(q > 1.0)) throw DomainError("Renyi order must be > 1");
  if (!mu.same_grid(nu)) throw DomainError("densities must share a grid");
  const std::vector<double>& m = mu.values();
  const std::vector<double>& v = nu.values();
  std::vector<double> logs;
  logs.reserve(m.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.size(); ++i) {
    double l = -std::numeric_limits<double>::infinity();
    if (m[i] > 0.0) {
      if (v[i] <= 0.0) return std::numeric_limits<double>::infinity();
      l = q * std::log(m[i]) + (1.0 - q) * std::log(v[i]);
      if (i == 0 || i + 1 == m.size()) l += std::log(0.5);
    }
    logs.push_back(l);
    top = std::max(top, l);
  }
  if (!std::isfinite(top)) throw DomainError("mu has no mass on the grid");
  double s = 0.0;
  for (double l : logs) s += std::exp(l - top);
  const double log_integral = top + std::log(s) + std::log(mu.step());
  return log_integral / (q - 1.0);
}

NoiseEquivalenceReport check_block_noise_equivalence(
    const subspace::BlockBasis& basis, double sigma2, std::size_t n_samples,
    Rng& rng) {
  if (n_samples < 2) throw DomainError("need at least two samples");
  const std::size_t d = basis.dim();
  NoiseEquivalenceReport rep;
  rep.n_samples = n_samples;
  rep.dim = d;
  rep.sigma2 = sigma2;
  const double n = static_cast<double>(n_samples);
  rep.cov_threshold = 3.0 * sigma2 * std::sqrt(2.0 / n);
  const double alpha = 0.01 / static_cast<double>(d);
  rep.ks_critical = std::sqrt(-std::log(alpha / 2.0) / 2.0) / std::sqrt(n);

  std::vector<std::vector<double>> cols(d, std::vector<double>(n_samples));
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<double> xi(d, 0.0);
    for (int i = 0; i < basis.num_blocks(); ++i) {
      const std::vector<double> part =
          subspace::sample_block_noise(basis, i, sigma2, rng);
      for (std::size_t j = 0; j < d; ++j) xi[j] += part[j];
    }
    for (std::size_t a = 0; a < d; ++a) {
      cols[a][s] = xi[a];
      for (std::size_t b = a; b < d; ++b) cov[a * d + b] += xi[a] * xi[b];
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      const double target = a == b ? sigma2 : 0.0;
      rep.max_cov_deviation =
          std::max(rep.max_cov_deviation, std::abs(cov[a * d + b] / n - target));
    }
  }
  rep.ks.assign(d, 0.0);
  if (sigma2 > 0.0) {
    const double sd = std::sqrt(sigma2);
    for (std::size_t a = 0; a < d; ++a) {
      std::vector<double>& c = cols[a];
      std::sort(c.begin(), c.end());
      double ks = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const double f = NormalCdf(c[i], sd);
        ks = std::max({ks, static_cast<double>(i + 1) / n - f,
                       f - static_cast<double>(i) / n});
      }
      rep.ks[a] = ks;
    }
    rep.ks_max = *std::max_element(rep.ks.begin(), rep.ks.end());
    rep.pass = rep.max_cov_deviation <= rep.cov_threshold &&
               rep.ks_max <= rep.ks_critical;
  } else {
    rep.pass = rep.max_cov_deviation == 0.0;
  }
  return rep;
}

TrajectoryReport check_budget_bound_on_trajectories(const TrajectorySpec& spec) {
  spec.dyn.validate();
  if (spec.steps < 1) throw DomainError("steps must be >= 1");
  if (!(spec.sigma2 > 0.0)) throw DomainError("variance must be > 0");
  const double rho = 1.0 - spec.dyn.gamma * spec.dyn.lambda;
  const double gap0 = spec.initial_gap.value_or(2.0 * spec.dyn.c0);
  const double g = spec.adversarial_drift ? spec.dyn.c1 : 0.0;
  double m1 = gap0 / 2.0;
  double m2 = -gap0 / 2.0;
  double var = 0.0;
  for (int t = 0; t < spec.steps; ++t) {
    m1 = rho * m1 + spec.dyn.gamma * g;
    m2 = rho * m2 - spec.dyn.gamma * g;
    var = rho * rho * var + spec.sigma2;
  }
  TrajectoryReport rep;
  rep.mean_gap = m1 - m2;
  rep.variance = var;
  rep.closed_form = renyi_gaussian_shift(spec.dyn.q, rep.mean_gap, var);
  const double sd = std::sqrt(var);
  // The integrand mu^q nu^(1-q) is centred at q m1 + (1 - q) m2; cover it
  // as well as both densities.
  const double tilt = spec.dyn.q * m1 + (1.0 - spec.dyn.q) * m2;
  const double lo = std::min({m1, m2, tilt}) - 10.0 * sd;
  const double hi = std::max({m1, m2, tilt}) + 10.0 * sd;
  const Density1D mu = gaussian_density(m1, var, lo, hi);
  const Density1D nu = gaussian_density(m2, var, lo, hi);
  rep.numeric_divergence = numeric_renyi(mu, nu, spec.dyn.q);
  rep.certified = spec.dyn.eps_renyi;
  rep.pass = rep.numeric_divergence <= rep.certified + kTrajectoryTolerance;
  return rep;
}

}  // namespace bwu::divergence
