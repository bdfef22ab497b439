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

// Command-line front end: planning, training, unlearning, audits and
// experiment runs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bwu/accounting.h"
#include "bwu/audit.h"
#include "bwu/checkpoint.h"
#include "bwu/dataset.h"
#include "bwu/divergence.h"
#include "bwu/engine.h"
#include "bwu/errors.h"
#include "bwu/harness.h"
#include "bwu/kernels.h"
#include "bwu/model.h"
#include "bwu/serialize.h"
#include "bwu/subspace.h"

namespace {

using nlohmann::json;

struct DataOptions {
  std::string kind = "blobs";
  bwu::BlobsSpec blobs;
  std::string images;
  std::string labels;
  std::size_t limit = 0;

  void add(CLI::App* app) {
    app->add_option("--data", kind, "blobs or mnist_idx")
        ->check(CLI::IsMember({"blobs", "mnist_idx"}));
    app->add_option("--blobs-n", blobs.n, "number of blob samples");
    app->add_option("--blobs-dim", blobs.dim, "blob feature dimension");
    app->add_option("--blobs-classes", blobs.num_classes, "number of classes");
    app->add_option("--blobs-separation", blobs.separation, "class mean radius");
    app->add_option("--data-seed", blobs.seed, "blob generator seed");
    app->add_option("--images", images, "IDX image file");
    app->add_option("--labels", labels, "IDX label file");
    app->add_option("--limit", limit, "keep only the first n IDX samples");
  }

  bwu::Dataset load() const {
    bwu::harness::DatasetSource src;
    src.kind = kind == "blobs" ? bwu::harness::DatasetSource::Kind::kBlobs
                               : bwu::harness::DatasetSource::Kind::kMnistIdx;
    src.blobs = blobs;
    src.images_path = images;
    src.labels_path = labels;
    src.limit = limit;
    return bwu::harness::load_source(src);
  }
};

struct SplitOptions {
  std::string deletion = "random_fraction";
  double fraction = 0.1;
  int class_id = 0;
  std::uint64_t seed = 0;
  double holdout = 0.2;
  std::string splits_file;

  void add(CLI::App* app) {
    app->add_option("--deletion", deletion, "random_fraction or classwise")
        ->check(CLI::IsMember({"random_fraction", "classwise"}));
    app->add_option("--fraction", fraction, "random deletion fraction");
    app->add_option("--class", class_id, "class to delete");
    app->add_option("--split-seed", seed, "split seed");
    app->add_option("--holdout", holdout, "held-out test fraction");
    app->add_option("--splits", splits_file,
                    "split JSON (overrides the deletion options)");
  }

  bwu::harness::ScenarioSplit get(const bwu::Dataset& data) const {
    if (!splits_file.empty()) {
      const json j = bwu::read_json_file(splits_file);
      bwu::harness::ScenarioSplit s;
      try {
        s.retain = j.at("retain").get<std::vector<std::size_t>>();
        s.forget = j.at("forget").get<std::vector<std::size_t>>();
        s.test = j.at("test").get<std::vector<std::size_t>>();
        s.seed = j.at("seed").get<std::uint64_t>();
      } catch (const json::exception& e) {
        throw bwu::FormatError(std::string("malformed splits file: ") + e.what());
      }
      return s;
    }
    const auto del = deletion == "classwise"
                         ? bwu::harness::Deletion::ClassWise(class_id)
                         : bwu::harness::Deletion::RandomFraction(fraction);
    return bwu::harness::make_split(data, del, seed, holdout);
  }
};

json SplitJson(const bwu::harness::ScenarioSplit& s) {
  return {{"version", bwu::kJsonFormatVersion},
          {"seed", s.seed},
          {"retain", s.retain},
          {"forget", s.forget},
          {"test", s.test}};
}

struct TrainOptions {
  std::string hidden = "64,64";
  bwu::engine::TrainConfig config;
  bwu::engine::Seeds seeds;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "comma-separated hidden widths");
    app->add_option("--steps", config.steps, "SGD steps");
    app->add_option("--batch", config.batch_size, "batch size");
    app->add_option("--lr", config.sgd.lr, "learning rate");
    app->add_option("--momentum", config.sgd.momentum, "momentum");
    app->add_option("--weight-decay", config.sgd.weight_decay, "weight decay");
    app->add_option("--init-seed", seeds.init, "initialisation seed");
    app->add_option("--order-seed", seeds.data_order, "batch order seed");
  }

  bwu::model::MlpSpec arch(const bwu::Dataset& data) const {
    bwu::model::MlpSpec spec;
    spec.widths.push_back(data.input_dim);
    std::stringstream ss(hidden);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) spec.widths.push_back(std::stoul(item));
    spec.widths.push_back(static_cast<std::size_t>(data.num_classes));
    spec.validate();
    return spec;
  }
};

// Recovers the MLP widths from a checkpoint's fcN.weight entries.
bwu::model::MlpSpec ArchFromParams(const bwu::model::ParamVector& p) {
  bwu::model::MlpSpec spec;
  for (const auto& e : p.layer_map()) {
    if (e.shape.size() != 2) continue;
    if (spec.widths.empty()) spec.widths.push_back(e.shape[1]);
    spec.widths.push_back(e.shape[0]);
  }
  spec.validate();
  if (!p.same_layout(bwu::model::zeros(spec)))
    throw bwu::FormatError("checkpoint is not an MLP of this library");
  return spec;
}

struct BudgetOptions {
  bwu::accounting::BudgetSpec spec;
  double discrepancy = 0.0;
  int blocks = 1;
  std::optional<int> fixed_steps;
  double q = 0.0;

  void add(CLI::App* app) {
    spec.epsilon = 1.0;
    spec.delta = 1e-5;
    spec.gamma = 1e-4;
    spec.lambda = 10.0;
    spec.c1 = 100.0;
    spec.c0 = 0.005;
    app->add_option("--epsilon", spec.epsilon, "DP epsilon");
    app->add_option("--delta", spec.delta, "DP delta");
    app->add_option("--gamma", spec.gamma, "learning rate of the noisy steps");
    app->add_option("--lambda", spec.lambda, "weight decay of the noisy steps");
    app->add_option("--c1", spec.c1, "gradient clipping radius");
    app->add_option("--c0", spec.c0, "initial distance radius");
    app->add_option("--discrepancy,--delta-rho", discrepancy,
                    "initial discrepancy; sets c0 to half of it");
    app->add_option("--q", q, "Renyi order (default: optimised)");
    app->add_option("--blocks,-k", blocks, "number of blocks");
    auto* steps = app->add_option("--fixed-steps,--steps", fixed_steps,
                                  "steps per block (default: minimal-noise plan)");
    app->add_flag("--min-noise", "minimal-noise plan (the default)")
        ->excludes(steps);
  }

  bwu::accounting::NoisePlan plan() const {
    bwu::accounting::BudgetSpec s = spec;
    if (discrepancy > 0.0) s.c0 = discrepancy / 2.0;
    if (q > 0.0) s.q = q;
    const auto mode = fixed_steps ? bwu::accounting::PlanMode::FixedSteps(*fixed_steps)
                                  : bwu::accounting::PlanMode::MinNoise();
    return bwu::accounting::make_plan(s, blocks, mode);
  }
};

void Emit(const json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    bwu::write_json_file(path, j);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified unlearning by block-wise noisy fine-tuning"};
  app.require_subcommand(1);
  std::string backend;
  app.add_option("--backend", backend, "kernel backend: scalar or avx2")
      ->check(CLI::IsMember({"scalar", "avx2"}));

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "compute the noise plan for a budget");
  BudgetOptions plan_budget;
  std::string plan_out;
  plan_budget.add(plan_cmd);
  plan_cmd->add_option("--out,-o", plan_out, "write JSON here instead of stdout");

  // train
  auto* train_cmd = app.add_subcommand("train", "train on retain + forget");
  DataOptions train_data;
  SplitOptions train_split;
  TrainOptions train_opts;
  std::string train_out, train_csv, train_splits_out;
  train_data.add(train_cmd);
  train_split.add(train_cmd);
  train_opts.add(train_cmd);
  train_cmd->add_option("--out,-o", train_out, "checkpoint path")->required();
  train_cmd->add_option("--csv", train_csv, "per-step CSV");
  train_cmd->add_option("--splits-out", train_splits_out, "write the split JSON");

  // retrain
  auto* retrain_cmd = app.add_subcommand("retrain", "coupled retrain on the retain set");
  DataOptions retrain_data;
  SplitOptions retrain_split;
  TrainOptions retrain_opts;
  std::string retrain_out, retrain_csv;
  retrain_data.add(retrain_cmd);
  retrain_split.add(retrain_cmd);
  retrain_opts.add(retrain_cmd);
  retrain_cmd->add_option("--out,-o", retrain_out, "checkpoint path")->required();
  retrain_cmd->add_option("--csv", retrain_csv, "per-step CSV");

  // unlearn
  auto* unlearn_cmd = app.add_subcommand("unlearn", "noisy fine-tuning from a checkpoint");
  DataOptions unlearn_data;
  SplitOptions unlearn_split;
  BudgetOptions unlearn_budget;
  std::string method = "blockwise", strategy = "random_orthonormal";
  std::string unlearn_ckpt, unlearn_out, unlearn_csv, unlearn_manifest;
  bwu::engine::RunConfig run_cfg;
  int ft_steps = -1;
  std::uint64_t basis_seed = 0;
  unlearn_data.add(unlearn_cmd);
  unlearn_split.add(unlearn_cmd);
  unlearn_budget.add(unlearn_cmd);
  unlearn_cmd->add_option("--method", method, "nft or blockwise")
      ->check(CLI::IsMember({"nft", "blockwise"}));
  unlearn_cmd->add_option("--strategy", strategy, "block construction");
  unlearn_cmd->add_option("--basis-seed", basis_seed, "basis seed");
  unlearn_cmd->add_option("--checkpoint", unlearn_ckpt, "trained model")->required();
  unlearn_cmd->add_option("--out,-o", unlearn_out, "unlearned checkpoint")->required();
  unlearn_cmd->add_option("--csv", unlearn_csv, "per-step CSV");
  unlearn_cmd->add_option("--manifest", unlearn_manifest, "run manifest JSON");
  unlearn_cmd->add_option("--batch", run_cfg.batch_size, "batch size");
  unlearn_cmd->add_option("--fine-tune-steps", ft_steps,
                          "fine-tune steps (default: fill the step cap)");
  unlearn_cmd->add_option("--fine-tune-lr", run_cfg.fine_tune.lr, "fine-tune lr");
  unlearn_cmd->add_option("--fine-tune-momentum", run_cfg.fine_tune.momentum,
                          "fine-tune momentum");
  unlearn_cmd->add_option("--fine-tune-weight-decay", run_cfg.fine_tune.weight_decay,
                          "fine-tune weight decay");
  unlearn_cmd->add_option("--step-cap", run_cfg.total_step_cap, "total step cap");
  unlearn_cmd->add_option("--eval-every", run_cfg.eval_every, "evaluation period");
  unlearn_cmd->add_option("--noise-seed", run_cfg.seeds.noise, "noise seed");
  unlearn_cmd->add_option("--order-seed", run_cfg.seeds.data_order, "batch order seed");

  // audit
  auto* audit_cmd = app.add_subcommand("audit", "UA/RA/TA and MIA efficacy");
  DataOptions audit_data;
  SplitOptions audit_split;
  std::string audit_ckpt, audit_baseline, audit_out;
  std::uint64_t audit_seed = 0;
  audit_data.add(audit_cmd);
  audit_split.add(audit_cmd);
  audit_cmd->add_option("--checkpoint", audit_ckpt, "model to audit")->required();
  audit_cmd->add_option("--baseline", audit_baseline, "retrained model for deltas");
  audit_cmd->add_option("--attack-seed", audit_seed, "attacker subsampling seed");
  audit_cmd->add_option("--out,-o", audit_out, "write JSON here instead of stdout");

  // calibrate-delta
  auto* cal_cmd = app.add_subcommand("calibrate-delta", "estimate the initial discrepancy");
  DataOptions cal_data;
  TrainOptions cal_train;
  bwu::audit::DeltaConfig cal_cfg;
  std::string cal_out;
  cal_data.add(cal_cmd);
  cal_train.add(cal_cmd);
  cal_cmd->add_option("--runs", cal_cfg.n_runs, "number of paired runs");
  cal_cmd->add_option("--rho", cal_cfg.rho, "failure probability");
  cal_cmd->add_option("--perturbation", cal_cfg.perturbation_frac,
                      "fraction of samples removed per run");
  cal_cmd->add_option("--seed", cal_cfg.seed, "calibration seed");
  cal_cmd->add_option("--out,-o", cal_out, "write JSON here instead of stdout");

  // divergence-check
  auto* div_cmd = app.add_subcommand("divergence-check", "numeric divergence checks");
  std::uint64_t div_seed = 0;
  int div_specs = 50;
  std::string div_out;
  div_cmd->add_option("--seed", div_seed, "seed");
  div_cmd->add_option("--specs", div_specs, "random trajectory specs");
  div_cmd->add_option("--out,-o", div_out, "write JSON here instead of stdout");

  // run
  auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
  std::string config_path;
  run_cmd->add_option("--config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!backend.empty())
      bwu::kernels::set_backend(backend == "avx2" ? bwu::kernels::Backend::kAvx2
                                                  : bwu::kernels::Backend::kScalar);

    if (*plan_cmd) {
      Emit(bwu::to_json(plan_budget.plan()), plan_out);
    } else if (*train_cmd || *retrain_cmd) {
      const bool full = train_cmd->parsed();
      const DataOptions& dopt = full ? train_data : retrain_data;
      const SplitOptions& sopt = full ? train_split : retrain_split;
      const TrainOptions& topt = full ? train_opts : retrain_opts;
      const bwu::Dataset data = dopt.load();
      const auto split = sopt.get(data);
      const bwu::Dataset set = data.subset(full ? split.train() : split.retain);
      const bwu::Dataset test = data.subset(split.test);
      const auto spec = topt.arch(data);
      const bwu::engine::EvalSets eval{&test, nullptr, nullptr};
      const auto rec = bwu::engine::train(spec, set, topt.seeds, topt.config, eval);
      bwu::save_checkpoint(full ? train_out : retrain_out, rec.final_params);
      const std::string& csv = full ? train_csv : retrain_csv;
      if (!csv.empty()) rec.write_csv(csv);
      if (full && !train_splits_out.empty())
        bwu::write_json_file(train_splits_out, SplitJson(split));
      std::printf("final loss %.6f, test accuracy %.4f\n", rec.rows.back().loss,
                  rec.rows.back().test_acc.value_or(0.0));
    } else if (*unlearn_cmd) {
      const bwu::Dataset data = unlearn_data.load();
      const auto split = unlearn_split.get(data);
      const bwu::Dataset retain = data.subset(split.retain);
      const bwu::Dataset forget = data.subset(split.forget);
      const bwu::Dataset test = data.subset(split.test);
      const auto params0 = bwu::load_checkpoint(unlearn_ckpt);
      const auto spec = ArchFromParams(params0);
      if (method == "nft") unlearn_budget.blocks = 1;
      run_cfg.plan = unlearn_budget.plan();
      if (ft_steps >= 0) run_cfg.fine_tune_steps = ft_steps;
      const bwu::engine::EvalSets eval{&test, &retain, &forget};
      bwu::engine::RunRecord rec;
      std::optional<bwu::subspace::BlockBasis> basis;
      if (method == "nft") {
        rec = bwu::engine::run_nft(spec, params0, run_cfg, retain, eval);
      } else {
        basis = bwu::subspace::build_basis(bwu::subspace::parse_strategy(strategy),
                                           spec.basis_layers(),
                                           unlearn_budget.blocks, basis_seed);
        rec = bwu::engine::run_blockwise(spec, params0, run_cfg, *basis, retain, eval);
      }
      bwu::save_checkpoint(unlearn_out, rec.final_params);
      if (!unlearn_csv.empty()) rec.write_csv(unlearn_csv);
      if (!unlearn_manifest.empty()) {
        json m = {{"version", bwu::kJsonFormatVersion},
                  {"method", method},
                  {"plan", bwu::to_json(run_cfg.plan)},
                  {"seeds",
                   {{"data_order", run_cfg.seeds.data_order},
                    {"noise", run_cfg.seeds.noise},
                    {"basis", basis_seed}}},
                  {"batch_size", run_cfg.batch_size},
                  {"fine_tune_steps", run_cfg.resolved_fine_tune_steps()},
                  {"fine_tune",
                   {{"lr", run_cfg.fine_tune.lr},
                    {"momentum", run_cfg.fine_tune.momentum},
                    {"weight_decay", run_cfg.fine_tune.weight_decay}}},
                  {"total_step_cap", run_cfg.total_step_cap},
                  {"input_checkpoint", unlearn_ckpt},
                  {"output_checkpoint", unlearn_out},
                  {"csv", unlearn_csv.empty() ? json(nullptr) : json(unlearn_csv)}};
        if (basis) m["basis"] = bwu::to_json(*basis);
        bwu::write_json_file(unlearn_manifest, m);
      }
      std::printf("noisy steps %d, sigma2 %.6g, final test accuracy %.4f\n",
                  rec.noisy_steps, run_cfg.plan.sigma2,
                  rec.rows.back().test_acc.value_or(0.0));
    } else if (*audit_cmd) {
      const bwu::Dataset data = audit_data.load();
      const auto split = audit_split.get(data);
      const bwu::Dataset retain = data.subset(split.retain);
      const bwu::Dataset forget = data.subset(split.forget);
      const bwu::Dataset test = data.subset(split.test);
      bwu::audit::MiaConfig mia;
      mia.seed = audit_seed;
      auto report_for = [&](const std::string& path) {
        const auto params = bwu::load_checkpoint(path);
        const auto spec = ArchFromParams(params);
        auto r = bwu::audit::compute_metrics(spec, params, retain, forget, test);
        r.mia_efficacy =
            bwu::audit::mia_efficacy(spec, params, retain, forget, test, mia);
        return r;
      };
      auto report = report_for(audit_ckpt);
      if (!audit_baseline.empty())
        report.vs_retrain = bwu::audit::deltas(report, report_for(audit_baseline));
      Emit(bwu::to_json(report), audit_out);
      auto fmt = [](const std::optional<double>& v) {
        char buf[32];
        if (!v) return std::string("-");
        std::snprintf(buf, sizeof(buf), "%.2f", *v);
        return std::string(buf);
      };
      std::fprintf(stderr, "%-8s %-8s %-8s %-8s\n%-8s %-8s %-8s %-8s\n", "UA", "RA",
                   "TA", "MIA", fmt(report.ua).c_str(), fmt(report.ra).c_str(),
                   fmt(report.ta).c_str(), fmt(report.mia_efficacy).c_str());
    } else if (*cal_cmd) {
      const bwu::Dataset data = cal_data.load();
      cal_cfg.train = cal_train.config;
      const auto est =
          bwu::audit::estimate_delta(cal_train.arch(data), data, cal_cfg);
      if (est.vacuous)
        std::fprintf(stderr,
                     "warning: %d runs are too few for rho = %g; the quantile "
                     "carries no guarantee\n",
                     est.n_runs, est.rho);
      Emit(bwu::to_json(est), cal_out);
    } else if (*div_cmd) {
      bwu::Rng rng = bwu::make_rng(div_seed);
      json out;
      out["gaussian"] = json::array();
      for (auto [q, a, s2] : {std::tuple{2.0, 1.0, 1.0}, std::tuple{3.0, 0.5, 0.25}}) {
        const double closed = bwu::divergence::renyi_gaussian_shift(q, a, s2);
        const double sd = std::sqrt(s2);
        const double lo = -10 * sd + std::min(0.0, (1 - q) * a);
        const double hi = a + 10 * sd + std::max(0.0, q * a);
        const double num = bwu::divergence::numeric_renyi(
            bwu::divergence::gaussian_density(a, s2, lo, hi),
            bwu::divergence::gaussian_density(0.0, s2, lo, hi), q);
        out["gaussian"].push_back({{"q", q}, {"a", a}, {"sigma2", s2},
                                   {"closed_form", closed}, {"numeric", num},
                                   {"pass", std::abs(num - closed) <= 1e-4}});
      }
      out["noise_equivalence"] = json::array();
      const auto layers = bwu::subspace::contiguous_layers({{8, 1}});
      for (auto strat : {bwu::subspace::Strategy::kRandomOrthonormal,
                         bwu::subspace::Strategy::kPermutation}) {
        const auto basis = bwu::subspace::build_basis(strat, layers, 4, div_seed);
        auto rep = bwu::to_json(
            bwu::divergence::check_block_noise_equivalence(basis, 1.0, 20000, rng));
        rep["strategy"] = bwu::subspace::strategy_name(strat);
        out["noise_equivalence"].push_back(rep);
      }
      int violations = 0;
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int i = 0; i < div_specs; ++i) {
        bwu::accounting::BlockDynamics dyn;
        dyn.gamma = 0.01 + 0.2 * u(rng);
        dyn.lambda = 0.1 + 2.0 * u(rng);
        dyn.c0 = 0.1 + 2.0 * u(rng);
        dyn.c1 = 0.1 + 5.0 * u(rng);
        dyn.q = 1.5 + 20.0 * u(rng);
        dyn.eps_renyi = 0.1 + 3.0 * u(rng);
        const double s2 = bwu::accounting::min_noise(dyn).sigma2 * (1.0 + 2.0 * u(rng));
        bwu::divergence::TrajectorySpec ts;
        ts.dyn = dyn;
        ts.sigma2 = s2;
        try {
          ts.steps = bwu::accounting::certified_steps_for_noise(s2, dyn);
        } catch (const bwu::InfeasibleNoise&) {
          continue;
        }
        if (!bwu::divergence::check_budget_bound_on_trajectories(ts).pass) ++violations;
      }
      out["trajectory"] = {{"specs", div_specs}, {"violations", violations}};
      Emit(out, div_out);
    } else if (*run_cmd) {
      const auto config = bwu::harness::load_config(config_path);
      const auto result = bwu::harness::run_experiment(config);
      std::cout << result.table();
      int failed = 0;
      for (const auto& c : result.cells) failed += c.ok ? 0 : 1;
      if (failed > 0) {
        std::fprintf(stderr, "%d cell(s) failed; see summary.json\n", failed);
        return 1;
      }
    }
  } catch (const bwu::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
