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

// Noisy fine-tuning, the block-wise unlearning schedule, training and the
// coupled retrain baseline.

#ifndef BWU_ENGINE_H_
#define BWU_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bwu/accounting.h"
#include "bwu/dataset.h"
#include "bwu/model.h"
#include "bwu/rng.h"
#include "bwu/subspace.h"

namespace bwu::engine {

struct Seeds {
  std::uint64_t data_order = 0;
  std::uint64_t noise = 0;
  std::uint64_t init = 0;
};

// Epoch-wise shuffled minibatches over one dataset. The last partial batch of
// an epoch is dropped; a dataset smaller than the batch size yields the whole
// dataset each time. Every id handed out is recorded. `data` must outlive the
// sampler.
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, std::size_t batch_size, std::uint64_t seed);

  Batch next();
  const std::vector<std::uint64_t>& touched_ids() const { return touched_; }

 private:
  void Reshuffle();

  const Dataset& data_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::vector<std::uint64_t> touched_;
};

enum class ClipMode {
  // Clip the active block's gradient coordinates.
  kBlock,
  // Clip the full gradient, then restrict it to the active block.
  kFull,
};

struct NoisyStep {
  double gamma = 0.0;
  double lambda = 0.0;
  double c1 = 1.0;
  double sigma2 = 0.0;
};

struct StepInfo {
  double loss = 0.0;
  double noise_norm = 0.0;
  double grad_norm_pre = 0.0;
  double grad_norm_post = 0.0;
};

// x <- x - gamma (clip(g, c1) + lambda x) + xi on all coordinates.
StepInfo nft_step(const model::MlpSpec& spec, model::ParamVector& params,
                  const Batch& batch, const NoisyStep& step, Rng& rng);

// The same update restricted to span(A_block): gradient, weight decay and
// noise all live in the block's coordinates; other blocks stay frozen.
StepInfo nft_step(const model::MlpSpec& spec, model::ParamVector& params,
                  const Batch& batch, const NoisyStep& step,
                  const subspace::BlockBasis& basis, int block, Rng& rng,
                  ClipMode clip_mode = ClipMode::kBlock);

enum class Phase { kUnlearnBlock, kFineTune, kTrain };

struct StepRow {
  std::int64_t step = 0;
  Phase phase = Phase::kTrain;
  int block = -1;
  double loss = 0.0;
  std::optional<double> test_acc;
  std::optional<double> retain_acc;
  std::optional<double> forget_acc;
  double noise_norm = 0.0;
  double grad_norm_pre = 0.0;
  double grad_norm_post = 0.0;
};

// "unlearn_block_<i>", "finetune" or "train".
std::string phase_label(const StepRow& row);

struct RunRecord {
  std::vector<StepRow> rows;
  model::ParamVector final_params;
  std::string checkpoint_path;
  // Sorted, deduplicated ids of every sample a gradient was computed on.
  std::vector<std::uint64_t> touched_ids;
  int noisy_steps = 0;

  std::string to_csv() const;
  void write_csv(const std::string& path) const;
};

inline constexpr const char* kCsvHeader =
    "step,phase,block,loss,test_acc,retain_acc,forget_acc,noise_norm,"
    "grad_norm_pre,grad_norm_post";

// Optional evaluation sets; null pointers (or empty sets) leave cells empty.
struct EvalSets {
  const Dataset* test = nullptr;
  const Dataset* retain = nullptr;
  const Dataset* forget = nullptr;
};

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

struct RunConfig {
  accounting::NoisePlan plan;
  std::size_t batch_size = 64;
  // Absent: fill the remaining step cap after the noisy phase.
  std::optional<int> fine_tune_steps;
  SgdConfig fine_tune;
  Seeds seeds;
  int total_step_cap = 1000;
  ClipMode clip_mode = ClipMode::kBlock;
  // Evaluate every n-th step; the last step is always evaluated.
  int eval_every = 1;

  void validate() const;
  int resolved_fine_tune_steps() const;
};

RunRecord run_blockwise(const model::MlpSpec& spec,
                        const model::ParamVector& params0,
                        const RunConfig& config,
                        const subspace::BlockBasis& basis,
                        const Dataset& retain, const EvalSets& eval = {});

// Single-block noisy fine-tuning: run_blockwise with k = 1 on an identity
// basis. Never applies model clipping.
RunRecord run_nft(const model::MlpSpec& spec, const model::ParamVector& params0,
                  const RunConfig& config, const Dataset& retain,
                  const EvalSets& eval = {});

subspace::BlockBasis identity_basis(const model::MlpSpec& spec);

struct TrainConfig {
  int steps = 500;
  std::size_t batch_size = 64;
  SgdConfig sgd;
  int eval_every = 0;  // 0: evaluate the final step only
};

// SGD with momentum from init_params(spec, seeds.init), batches from
// seeds.data_order.
RunRecord train(const model::MlpSpec& spec, const Dataset& data,
                const Seeds& seeds, const TrainConfig& config,
                const EvalSets& eval = {});

// Training on the retain set with the seeds of the full run.
RunRecord coupled_retrain(const model::MlpSpec& spec, const Dataset& retain,
                          const Seeds& shared_seeds, const TrainConfig& config,
                          const EvalSets& eval = {});

}  // namespace bwu::engine

#endif  // BWU_ENGINE_H_
