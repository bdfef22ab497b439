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

#ifndef BWU_AUDIT_H_
#define BWU_AUDIT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "bwu/dataset.h"
#include "bwu/engine.h"
#include "bwu/model.h"

namespace bwu::audit {

// Percentages in [0, 100]. Optional fields are absent when undefined (empty
// forget set, attack not run, timing not measured).
struct AuditReport {
  std::optional<double> ua;
  double ra = 0.0;
  double ta = 0.0;
  std::optional<double> mia_efficacy;
  std::optional<double> rte_minutes;

  // Signed differences (this - baseline); absent where either side is.
  struct Deltas {
    std::optional<double> ua;
    double ra = 0.0;
    double ta = 0.0;
    std::optional<double> mia_efficacy;
    std::optional<double> rte_minutes;
  };
  std::optional<Deltas> vs_retrain;
};

// UA = 100 (1 - acc(forget)), RA = 100 acc(retain), TA = 100 acc(test).
AuditReport compute_metrics(const model::MlpSpec& spec,
                            const model::ParamVector& params,
                            const Dataset& retain, const Dataset& forget,
                            const Dataset& test);

AuditReport::Deltas deltas(const AuditReport& report,
                           const AuditReport& baseline);

struct AttackFeatures {
  double max_prob = 0.0;
  double loss = 0.0;
};

std::vector<AttackFeatures> attack_features(const model::MlpSpec& spec,
                                            const model::ParamVector& params,
                                            const Dataset& data);

class MembershipPredictor {
 public:
  virtual ~MembershipPredictor() = default;
  virtual bool is_member(const AttackFeatures& f) const = 0;
};

class AlwaysNonMember final : public MembershipPredictor {
 public:
  bool is_member(const AttackFeatures&) const override { return false; }
};

// Logistic regression on standardised (max_prob, loss), fit by Newton
// iterations with a small ridge term; member iff score > 0.5.
class LogisticAttacker final : public MembershipPredictor {
 public:
  static LogisticAttacker fit(const std::vector<AttackFeatures>& members,
                              const std::vector<AttackFeatures>& non_members);

  double score(const AttackFeatures& f) const;
  bool is_member(const AttackFeatures& f) const override;
  const std::vector<double>& weights() const { return w_; }

 private:
  std::vector<double> mean_ = {0.0, 0.0};
  std::vector<double> scale_ = {1.0, 1.0};
  std::vector<double> w_ = {0.0, 0.0, 0.0};
};

struct MiaConfig {
  std::uint64_t seed = 0;
};

// 100 * (forget samples predicted non-member) / |forget|.
std::optional<double> mia_efficacy_with(const MembershipPredictor& attacker,
                                        const model::MlpSpec& spec,
                                        const model::ParamVector& params,
                                        const Dataset& forget);

// Trains the attacker on a balanced subsample of retain (members) and
// heldout_test (non-members), then scores the forget set.
std::optional<double> mia_efficacy(const model::MlpSpec& spec,
                                   const model::ParamVector& params,
                                   const Dataset& retain, const Dataset& forget,
                                   const Dataset& heldout_test,
                                   const MiaConfig& config = {});

struct DeltaEstimate {
  std::vector<double> samples;  // sorted ascending
  double rho = 0.1;
  double delta_rho = 0.0;
  int n_runs = 0;
  // n_runs < ceil(1 / rho): the quantile carries no (1 - rho) guarantee.
  bool vacuous = false;
};

// Order statistic at 1-based index max(1, ceil((1 - rho) n)) of the sorted
// samples. rho must lie in (0, 1].
double delta_quantile(std::vector<double> samples, double rho);

struct DeltaConfig {
  double perturbation_frac = 0.1;
  int n_runs = 20;
  double rho = 0.1;
  std::uint64_t seed = 0;
  engine::TrainConfig train;
};

// Each run trains on the full data and on the data with a random
// perturbation_frac of samples removed, both from the same seeds, and records
// the parameter distance.
DeltaEstimate estimate_delta(const model::MlpSpec& spec, const Dataset& data,
                             const DeltaConfig& config);

// 2 alpha L sum_{k in lags} (1 - alpha gamma_sc)^k, where lag k counts the
// iterations between a differing minibatch and the final iterate.
double stability_bound(double alpha, double gamma_sc, double lipschitz,
                       const std::vector<int>& lags, int steps);

// delta_0 = 0, delta_{t+1} = (1 - alpha gamma) delta_t (+ 2 alpha L when t is
// a differing iteration). Returns delta_0 .. delta_T.
std::vector<double> simulate_stability(double alpha, double gamma_sc,
                                       double lipschitz,
                                       const std::vector<int>& differing,
                                       int steps);

// Lags seen at time t by differing iterations s < t: t - 1 - s.
std::vector<int> lags_at(const std::vector<int>& differing, int t);

}  // namespace bwu::audit

#endif  // BWU_AUDIT_H_
