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

#include "bwu/engine.h"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "bwu/errors.h"
#include "bwu/kernels.h"

namespace bwu::engine {
namespace {

void Evaluate(const model::MlpSpec& spec, const model::ParamVector& params,
              const EvalSets& eval, StepRow& row) {
  auto acc = [&](const Dataset* d) -> std::optional<double> {
    if (d == nullptr || d->empty()) return std::nullopt;
    return model::accuracy(spec, params, *d);
  };
  row.test_acc = acc(eval.test);
  row.retain_acc = acc(eval.retain);
  row.forget_acc = acc(eval.forget);
}

bool ShouldEval(int every, std::int64_t step, std::int64_t last) {
  if (every <= 0) return step == last;
  return step == last || (step + 1) % every == 0;
}

void SgdStep(model::ParamVector& params, const model::ParamVector& grad,
             const SgdConfig& sgd, std::vector<double>& velocity) {
  std::span<double> x = params.values();
  std::span<const double> g = grad.values();
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double gj = g[j] + sgd.weight_decay * x[j];
    velocity[j] = sgd.momentum * velocity[j] + gj;
    x[j] -= sgd.lr * velocity[j];
  }
}

void CheckSgd(const SgdConfig& sgd) {
  if (!(sgd.lr > 0.0)) throw DomainError("learning rate must be > 0");
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0))
    throw DomainError("momentum must lie in [0, 1)");
  if (!(sgd.weight_decay >= 0.0)) throw DomainError("weight decay must be >= 0");
}

std::vector<std::uint64_t> SortedUnique(std::vector<std::uint64_t> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void AppendNumber(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void AppendOptional(std::string& out, const std::optional<double>& v) {
  if (v) AppendNumber(out, *v);
}

}  // namespace

BatchSampler::BatchSampler(const Dataset& data, std::size_t batch_size,
                           std::uint64_t seed)
    : data_(data), batch_size_(batch_size), rng_(make_rng(seed, 4)) {
  if (data.empty()) throw DomainError("cannot sample from an empty dataset");
  if (batch_size == 0) throw DomainError("batch size must be >= 1");
  order_.resize(data.size());
  Reshuffle();
}

void BatchSampler::Reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

Batch BatchSampler::next() {
  const std::size_t b = std::min(batch_size_, order_.size());
  if (cursor_ + b > order_.size()) Reshuffle();
  std::span<const std::size_t> idx(order_.data() + cursor_, b);
  cursor_ += b;
  Batch batch = data_.subset(idx);
  touched_.insert(touched_.end(), batch.ids.begin(), batch.ids.end());
  return batch;
}

StepInfo nft_step(const model::MlpSpec& spec, model::ParamVector& params,
                  const Batch& batch, const NoisyStep& step, Rng& rng) {
  const model::LossGrad lg = model::backward(spec, params, batch);
  StepInfo info;
  info.loss = lg.loss;
  info.grad_norm_pre = kernels::norm2(lg.gradient.values());
  const std::vector<double> g = model::clip(lg.gradient.values(), step.c1);
  info.grad_norm_post = kernels::norm2(g);
  std::span<double> x = params.values();
  std::vector<double> delta(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    delta[j] = -step.gamma * (g[j] + step.lambda * x[j]);
  if (step.sigma2 > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(step.sigma2));
    double n2 = 0.0;
    for (double& dj : delta) {
      const double xi = normal(rng);
      n2 += xi * xi;
      dj += xi;
    }
    info.noise_norm = std::sqrt(n2);
  }
  kernels::axpy(1.0, delta, x);
  model::check_finite(x, "parameters after noisy step");
  return info;
}

StepInfo nft_step(const model::MlpSpec& spec, model::ParamVector& params,
                  const Batch& batch, const NoisyStep& step,
                  const subspace::BlockBasis& basis, int block, Rng& rng,
                  ClipMode clip_mode) {
  if (basis.dim() != params.size())
    throw DomainError("basis dimension does not match the model");
  const model::LossGrad lg = model::backward(spec, params, batch);
  StepInfo info;
  info.loss = lg.loss;
  std::vector<double> gb;
  if (clip_mode == ClipMode::kBlock) {
    gb = basis.block_coordinates(lg.gradient.values(), block);
    info.grad_norm_pre = kernels::norm2(gb);
    gb = model::clip(gb, step.c1);
  } else {
    info.grad_norm_pre = kernels::norm2(lg.gradient.values());
    gb = basis.block_coordinates(model::clip(lg.gradient.values(), step.c1),
                                 block);
  }
  info.grad_norm_post = kernels::norm2(gb);
  const std::vector<double> xb = basis.block_coordinates(params.values(), block);
  std::vector<double> delta(gb.size());
  for (std::size_t j = 0; j < gb.size(); ++j)
    delta[j] = -step.gamma * (gb[j] + step.lambda * xb[j]);
  if (step.sigma2 > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(step.sigma2));
    double n2 = 0.0;
    for (double& dj : delta) {
      const double zeta = normal(rng);
      n2 += zeta * zeta;
      dj += zeta;
    }
    info.noise_norm = std::sqrt(n2);
  }
  basis.add_to_block(block, delta, params.values());
  model::check_finite(params.values(), "parameters after noisy step");
  return info;
}

std::string phase_label(const StepRow& row) {
  switch (row.phase) {
    case Phase::kUnlearnBlock:
      return "unlearn_block_" + std::to_string(row.block);
    case Phase::kFineTune:
      return "finetune";
    case Phase::kTrain:
      return "train";
  }
  return "unknown";
}

std::string RunRecord::to_csv() const {
  std::string out = kCsvHeader;
  out += '\n';
  for (const StepRow& r : rows) {
    out += std::to_string(r.step);
    out += ',';
    out += phase_label(r);
    out += ',';
    if (r.block >= 0) out += std::to_string(r.block);
    out += ',';
    AppendNumber(out, r.loss);
    out += ',';
    AppendOptional(out, r.test_acc);
    out += ',';
    AppendOptional(out, r.retain_acc);
    out += ',';
    AppendOptional(out, r.forget_acc);
    out += ',';
    AppendNumber(out, r.noise_norm);
    out += ',';
    AppendNumber(out, r.grad_norm_pre);
    out += ',';
    AppendNumber(out, r.grad_norm_post);
    out += '\n';
  }
  return out;
}

void RunRecord::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << to_csv();
}

void RunConfig::validate() const {
  if (plan.k < 1 || plan.steps_per_block < 1)
    throw DomainError("plan must have k >= 1 and T >= 1");
  if (plan.c1_per_block.size() != static_cast<std::size_t>(plan.k))
    throw DomainError("plan per-block radii do not match k");
  if (batch_size == 0) throw DomainError("batch size must be >= 1");
  if (eval_every < 1) throw DomainError("eval_every must be >= 1");
  if (total_step_cap < plan.total_noisy_steps())
    throw DomainError("step cap is smaller than k * T");
  if (fine_tune_steps &&
      (*fine_tune_steps < 0 ||
       *fine_tune_steps > total_step_cap - plan.total_noisy_steps()))
    throw DomainError("fine-tune steps exceed the remaining step cap");
  CheckSgd(fine_tune);
}

int RunConfig::resolved_fine_tune_steps() const {
  return fine_tune_steps.value_or(total_step_cap - plan.total_noisy_steps());
}

RunRecord run_blockwise(const model::MlpSpec& spec,
                        const model::ParamVector& params0,
                        const RunConfig& config,
                        const subspace::BlockBasis& basis,
                        const Dataset& retain, const EvalSets& eval) {
  config.validate();
  const accounting::NoisePlan& plan = config.plan;
  if (basis.num_blocks() != plan.k)
    throw DomainError("basis and plan disagree on the number of blocks");
  if (basis.dim() != spec.dim() || params0.size() != spec.dim())
    throw DomainError("basis or parameters do not match the architecture");

  RunRecord rec;
  rec.final_params = params0;
  model::ParamVector& x = rec.final_params;
  BatchSampler sampler(retain, config.batch_size, config.seeds.data_order);
  Rng noise_rng = make_rng(config.seeds.noise, 5);
  const int ft_steps = config.resolved_fine_tune_steps();
  const std::int64_t last = plan.total_noisy_steps() + ft_steps - 1;
  std::int64_t step = 0;

  for (int i = 0; i < plan.k; ++i) {
    NoisyStep ns;
    ns.gamma = plan.budget.gamma;
    ns.lambda = plan.budget.lambda;
    ns.c1 = plan.c1_per_block[i];
    ns.sigma2 = plan.sigma2;
    for (int t = 0; t < plan.steps_per_block; ++t, ++step) {
      const Batch batch = sampler.next();
      const StepInfo info =
          nft_step(spec, x, batch, ns, basis, i, noise_rng, config.clip_mode);
      StepRow row;
      row.step = step;
      row.phase = Phase::kUnlearnBlock;
      row.block = i;
      row.loss = info.loss;
      row.noise_norm = info.noise_norm;
      row.grad_norm_pre = info.grad_norm_pre;
      row.grad_norm_post = info.grad_norm_post;
      if (ShouldEval(config.eval_every, step, last)) Evaluate(spec, x, eval, row);
      rec.rows.push_back(row);
      ++rec.noisy_steps;
    }
  }

  std::vector<double> velocity(x.size(), 0.0);
  for (int t = 0; t < ft_steps; ++t, ++step) {
    const Batch batch = sampler.next();
    const model::LossGrad lg = model::backward(spec, x, batch);
    SgdStep(x, lg.gradient, config.fine_tune, velocity);
    model::check_finite(x.values(), "parameters after fine-tuning");
    StepRow row;
    row.step = step;
    row.phase = Phase::kFineTune;
    row.loss = lg.loss;
    row.grad_norm_pre = row.grad_norm_post = kernels::norm2(lg.gradient.values());
    if (ShouldEval(config.eval_every, step, last)) Evaluate(spec, x, eval, row);
    rec.rows.push_back(row);
  }
  rec.touched_ids = SortedUnique(sampler.touched_ids());
  return rec;
}

subspace::BlockBasis identity_basis(const model::MlpSpec& spec) {
  subspace::BasisOptions opts;
  opts.shuffle = false;
  return subspace::build_basis(subspace::Strategy::kPermutation,
                               spec.basis_layers(), 1, 0, opts);
}

RunRecord run_nft(const model::MlpSpec& spec, const model::ParamVector& params0,
                  const RunConfig& config, const Dataset& retain,
                  const EvalSets& eval) {
  if (config.plan.k != 1) throw DomainError("run_nft needs a single-block plan");
  return run_blockwise(spec, params0, config, identity_basis(spec), retain,
                       eval);
}

RunRecord train(const model::MlpSpec& spec, const Dataset& data,
                const Seeds& seeds, const TrainConfig& config,
                const EvalSets& eval) {
  CheckSgd(config.sgd);
  if (config.steps < 0) throw DomainError("training steps must be >= 0");
  RunRecord rec;
  rec.final_params = model::init_params(spec, seeds.init);
  model::ParamVector& x = rec.final_params;
  BatchSampler sampler(data, config.batch_size, seeds.data_order);
  std::vector<double> velocity(x.size(), 0.0);
  const std::int64_t last = config.steps - 1;
  for (std::int64_t step = 0; step < config.steps; ++step) {
    const Batch batch = sampler.next();
    const model::LossGrad lg = model::backward(spec, x, batch);
    SgdStep(x, lg.gradient, config.sgd, velocity);
    model::check_finite(x.values(), "parameters during training");
    StepRow row;
    row.step = step;
    row.phase = Phase::kTrain;
    row.loss = lg.loss;
    row.grad_norm_pre = row.grad_norm_post = kernels::norm2(lg.gradient.values());
    if (ShouldEval(config.eval_every, step, last))
      Evaluate(spec, x, eval, row);
    rec.rows.push_back(row);
  }
  rec.touched_ids = SortedUnique(sampler.touched_ids());
  return rec;
}

RunRecord coupled_retrain(const model::MlpSpec& spec, const Dataset& retain,
                          const Seeds& shared_seeds, const TrainConfig& config,
                          const EvalSets& eval) {
  return train(spec, retain, shared_seeds, config, eval);
}

}  // namespace bwu::engine
