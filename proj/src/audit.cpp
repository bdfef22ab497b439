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

#include "bwu/audit.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "bwu/errors.h"
#include "bwu/kernels.h"
#include "bwu/rng.h"

namespace bwu::audit {
namespace {

constexpr int kNewtonIterations = 100;
constexpr double kRidge = 1e-6;

double Sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Solves the 3x3 system a x = b by Gaussian elimination with partial pivoting.
std::array<double, 3> Solve3(std::array<std::array<double, 3>, 3> a,
                             std::array<double, 3> b) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    if (a[c][c] == 0.0) throw NumericalError("singular attacker Hessian");
    for (int r = c + 1; r < 3; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int j = c; j < 3; ++j) a[r][j] -= f * a[c][j];
      b[r] -= f * b[c];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int j = r + 1; j < 3; ++j) s -= a[r][j] * x[j];
    x[r] = s / a[r][r];
  }
  return x;
}

std::vector<AttackFeatures> Subsample(std::vector<AttackFeatures> f,
                                      std::size_t n, Rng& rng) {
  std::shuffle(f.begin(), f.end(), rng);
  f.resize(std::min(n, f.size()));
  return f;
}

void CheckRho(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("rho must lie in (0, 1]");
}

}  // namespace

AuditReport compute_metrics(const model::MlpSpec& spec,
                            const model::ParamVector& params,
                            const Dataset& retain, const Dataset& forget,
                            const Dataset& test) {
  AuditReport r;
  if (!forget.empty())
    r.ua = 100.0 * (1.0 - model::accuracy(spec, params, forget));
  r.ra = 100.0 * model::accuracy(spec, params, retain);
  r.ta = 100.0 * model::accuracy(spec, params, test);
  return r;
}

AuditReport::Deltas deltas(const AuditReport& report,
                           const AuditReport& baseline) {
  auto diff = [](const std::optional<double>& a,
                 const std::optional<double>& b) -> std::optional<double> {
    if (a && b) return *a - *b;
    return std::nullopt;
  };
  AuditReport::Deltas d;
  d.ua = diff(report.ua, baseline.ua);
  d.ra = report.ra - baseline.ra;
  d.ta = report.ta - baseline.ta;
  d.mia_efficacy = diff(report.mia_efficacy, baseline.mia_efficacy);
  d.rte_minutes = diff(report.rte_minutes, baseline.rte_minutes);
  return d;
}

std::vector<AttackFeatures> attack_features(const model::MlpSpec& spec,
                                            const model::ParamVector& params,
                                            const Dataset& data) {
  const model::SampleScores s = model::sample_scores(spec, params, data);
  std::vector<AttackFeatures> out(data.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = {s.max_prob[i], s.loss[i]};
  return out;
}

LogisticAttacker LogisticAttacker::fit(
    const std::vector<AttackFeatures>& members,
    const std::vector<AttackFeatures>& non_members) {
  if (members.empty() || non_members.empty())
    throw DomainError("attacker needs both members and non-members");
  LogisticAttacker att;
  std::vector<std::array<double, 2>> x;
  std::vector<double> y;
  for (const auto& f : members) {
    x.push_back({f.max_prob, f.loss});
    y.push_back(1.0);
  }
  for (const auto& f : non_members) {
    x.push_back({f.max_prob, f.loss});
    y.push_back(0.0);
  }
  const double n = static_cast<double>(x.size());
  for (int j = 0; j < 2; ++j) {
    double m = 0.0;
    for (const auto& r : x) m += r[j];
    m /= n;
    double v = 0.0;
    for (const auto& r : x) v += (r[j] - m) * (r[j] - m);
    const double sd = std::sqrt(v / n);
    att.mean_[j] = m;
    att.scale_[j] = sd > 0.0 ? sd : 1.0;
  }
  for (auto& r : x)
    for (int j = 0; j < 2; ++j) r[j] = (r[j] - att.mean_[j]) / att.scale_[j];

  std::array<double, 3> w{0.0, 0.0, 0.0};
  for (int it = 0; it < kNewtonIterations; ++it) {
    std::array<double, 3> g{};
    std::array<std::array<double, 3>, 3> h{};
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::array<double, 3> z{1.0, x[i][0], x[i][1]};
      const double p = Sigmoid(w[0] + w[1] * z[1] + w[2] * z[2]);
      const double s = p * (1.0 - p);
      for (int a = 0; a < 3; ++a) {
        g[a] += (p - y[i]) * z[a];
        for (int b = 0; b < 3; ++b) h[a][b] += s * z[a] * z[b];
      }
    }
    for (int a = 0; a < 3; ++a) {
      g[a] += kRidge * n * w[a];
      h[a][a] += kRidge * n;
    }
    const std::array<double, 3> step = Solve3(h, g);
    double change = 0.0;
    for (int a = 0; a < 3; ++a) {
      w[a] -= step[a];
      change = std::max(change, std::abs(step[a]));
    }
    if (change < 1e-10) break;
  }
  att.w_.assign(w.begin(), w.end());
  return att;
}

double LogisticAttacker::score(const AttackFeatures& f) const {
  const double z1 = (f.max_prob - mean_[0]) / scale_[0];
  const double z2 = (f.loss - mean_[1]) / scale_[1];
  return Sigmoid(w_[0] + w_[1] * z1 + w_[2] * z2);
}

bool LogisticAttacker::is_member(const AttackFeatures& f) const {
  return score(f) > 0.5;
}

std::optional<double> mia_efficacy_with(const MembershipPredictor& attacker,
                                        const model::MlpSpec& spec,
                                        const model::ParamVector& params,
                                        const Dataset& forget) {
  if (forget.empty()) return std::nullopt;
  std::size_t tn = 0;
  for (const AttackFeatures& f : attack_features(spec, params, forget))
    tn += attacker.is_member(f) ? 0 : 1;
  return 100.0 * static_cast<double>(tn) / static_cast<double>(forget.size());
}

std::optional<double> mia_efficacy(const model::MlpSpec& spec,
                                   const model::ParamVector& params,
                                   const Dataset& retain, const Dataset& forget,
                                   const Dataset& heldout_test,
                                   const MiaConfig& config) {
  if (forget.empty()) return std::nullopt;
  if (retain.empty() || heldout_test.empty())
    throw DomainError("attacker needs retain and held-out samples");
  Rng rng = make_rng(config.seed, 6);
  const std::size_t n = std::min(retain.size(), heldout_test.size());
  const auto members = Subsample(attack_features(spec, params, retain), n, rng);
  const auto non_members =
      Subsample(attack_features(spec, params, heldout_test), n, rng);
  const LogisticAttacker att = LogisticAttacker::fit(members, non_members);
  return mia_efficacy_with(att, spec, params, forget);
}

double delta_quantile(std::vector<double> samples, double rho) {
  CheckRho(rho);
  if (samples.empty()) throw DomainError("no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  // The small slack keeps (1 - rho) n from rounding up past an exact integer.
  auto idx = static_cast<std::size_t>(std::ceil((1.0 - rho) * n - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, samples.size());
  return samples[idx - 1];
}

DeltaEstimate estimate_delta(const model::MlpSpec& spec, const Dataset& data,
                             const DeltaConfig& config) {
  if (config.n_runs < 2) throw DomainError("estimate_delta needs n_runs >= 2");
  CheckRho(config.rho);
  if (!(config.perturbation_frac >= 0.0 && config.perturbation_frac < 1.0))
    throw DomainError("perturbation_frac must lie in [0, 1)");
  const auto removed = static_cast<std::size_t>(
      std::floor(config.perturbation_frac * static_cast<double>(data.size())));

  DeltaEstimate est;
  est.rho = config.rho;
  est.n_runs = config.n_runs;
  for (int r = 0; r < config.n_runs; ++r) {
    const auto run = static_cast<std::uint64_t>(r);
    engine::Seeds seeds;
    seeds.data_order = derive_seed(config.seed, 3 * run);
    seeds.init = derive_seed(config.seed, 3 * run + 1);
    Rng pick = make_rng(config.seed, 3 * run + 2);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), pick);
    idx.resize(data.size() - removed);
    std::sort(idx.begin(), idx.end());
    const Dataset perturbed = data.subset(idx);

    const auto full = engine::train(spec, data, seeds, config.train);
    const auto pert = engine::train(spec, perturbed, seeds, config.train);
    std::vector<double> diff(full.final_params.data());
    kernels::axpy(-1.0, pert.final_params.values(), diff);
    est.samples.push_back(kernels::norm2(diff));
  }
  std::sort(est.samples.begin(), est.samples.end());
  est.delta_rho = delta_quantile(est.samples, config.rho);
  est.vacuous = config.n_runs < static_cast<int>(std::ceil(1.0 / config.rho - 1e-9));
  return est;
}

double stability_bound(double alpha, double gamma_sc, double lipschitz,
                       const std::vector<int>& lags, int steps) {
  if (!(alpha > 0.0) || !(gamma_sc >= 0.0) || !(lipschitz >= 0.0))
    throw DomainError("alpha > 0, gamma_sc >= 0 and L >= 0 are required");
  if (!(alpha * gamma_sc < 1.0)) throw DomainError("alpha * gamma_sc must be < 1");
  if (steps < 0) throw DomainError("steps must be >= 0");
  const double rho = 1.0 - alpha * gamma_sc;
  double sum = 0.0;
  for (int k : lags) {
    if (k < 0 || k >= steps) throw DomainError("lag outside [0, T)");
    sum += std::pow(rho, k);
  }
  return 2.0 * alpha * lipschitz * sum;
}

std::vector<double> simulate_stability(double alpha, double gamma_sc,
                                       double lipschitz,
                                       const std::vector<int>& differing,
                                       int steps) {
  if (!(alpha * gamma_sc < 1.0)) throw DomainError("alpha * gamma_sc must be < 1");
  std::vector<char> diff(static_cast<std::size_t>(std::max(steps, 0)), 0);
  for (int s : differing) {
    if (s < 0 || s >= steps) throw DomainError("iteration outside [0, T)");
    diff[s] = 1;
  }
  std::vector<double> delta(diff.size() + 1, 0.0);
  for (std::size_t t = 0; t < diff.size(); ++t)
    delta[t + 1] = (1.0 - alpha * gamma_sc) * delta[t] +
                   (diff[t] ? 2.0 * alpha * lipschitz : 0.0);
  return delta;
}

std::vector<int> lags_at(const std::vector<int>& differing, int t) {
  std::vector<int> lags;
  for (int s : differing)
    if (s < t) lags.push_back(t - 1 - s);
  return lags;
}

}  // namespace bwu::audit
