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

#include "bwu/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "bwu/errors.h"
#include "bwu/rng.h"
#include "bwu/serialize.h"

namespace bwu::harness {
namespace {

using nlohmann::json;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double ToDouble(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty())
    throw FormatError("config key " + key + ": not a number: " + v);
  return d;
}

std::uint64_t ToUnsigned(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  std::uint64_t u = 0;
  try {
    u = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-')
    throw FormatError("config key " + key + ": not an unsigned integer: " + v);
  return u;
}

int ToInt(const std::string& key, const std::string& v) {
  const double d = ToDouble(key, v);
  if (d != std::floor(d) || std::abs(d) > 2e9)
    throw FormatError("config key " + key + ": not an integer: " + v);
  return static_cast<int>(d);
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw FormatError("config key " + key + ": not a boolean: " + v);
}

std::string FormatG(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string CellTag(Method m, const std::optional<Budget>& b, int k, int seed) {
  std::string tag = method_name(m);
  if (b) tag += "_eps" + FormatG(b->epsilon) + "_delta" + FormatG(b->delta);
  if (m != Method::kRetrain) tag += "_k" + std::to_string(k);
  if (seed >= 0) tag += "_seed" + std::to_string(seed);
  return tag;
}

json OptionalMeanStd(const std::optional<MeanStd>& m) {
  if (!m) return nullptr;
  return {{"mean", m->mean}, {"std", m->std}, {"n", m->n}};
}

json ConfigJson(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  if (c.dataset.kind == DatasetSource::Kind::kBlobs) {
    j["dataset"] = {{"kind", "blobs"},
                    {"n", c.dataset.blobs.n},
                    {"dim", c.dataset.blobs.dim},
                    {"classes", c.dataset.blobs.num_classes},
                    {"separation", c.dataset.blobs.separation},
                    {"seed", c.dataset.blobs.seed}};
  } else {
    j["dataset"] = {{"kind", "mnist_idx"},
                    {"images", c.dataset.images_path},
                    {"labels", c.dataset.labels_path},
                    {"limit", c.dataset.limit}};
  }
  j["holdout_fraction"] = c.holdout_fraction;
  if (c.deletion.kind == Deletion::Kind::kRandomFraction)
    j["deletion"] = {{"kind", "random_fraction"}, {"fraction", c.deletion.fraction}};
  else
    j["deletion"] = {{"kind", "classwise"}, {"class", c.deletion.class_id}};
  j["split_seed"] = c.split_seed;
  json budgets = json::array();
  for (const Budget& b : c.budgets)
    budgets.push_back({{"epsilon", b.epsilon}, {"delta", b.delta}});
  j["budgets"] = budgets;
  j["k_values"] = c.k_values;
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(method_name(m));
  j["methods"] = methods;
  j["n_seeds"] = c.n_seeds;
  j["base_seed"] = c.base_seed;
  j["hidden"] = c.hidden;
  j["train"] = {{"steps", c.train.steps},
                {"batch_size", c.train.batch_size},
                {"lr", c.train.sgd.lr},
                {"momentum", c.train.sgd.momentum},
                {"weight_decay", c.train.sgd.weight_decay}};
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["c1"] = c.c1;
  j["discrepancy"] = c.discrepancy;
  j["q"] = c.q ? json(*c.q) : json(nullptr);
  j["mode"] = c.mode.kind == accounting::PlanMode::Kind::kMinNoise
                  ? json("min_noise")
                  : json("fixed_steps");
  j["steps"] = c.mode.steps;
  j["strategy"] = subspace::strategy_name(c.strategy);
  j["batch_size"] = c.batch_size;
  j["fine_tune_steps"] = c.fine_tune_steps ? json(*c.fine_tune_steps) : json(nullptr);
  j["fine_tune"] = {{"lr", c.fine_tune.lr},
                    {"momentum", c.fine_tune.momentum},
                    {"weight_decay", c.fine_tune.weight_decay}};
  j["total_step_cap"] = c.total_step_cap;
  j["clip_mode"] = c.clip_mode == engine::ClipMode::kBlock ? "block" : "full";
  j["eval_every"] = c.eval_every;
  j["run_mia"] = c.run_mia;
  return j;
}

json BudgetJson(const std::optional<Budget>& b) {
  if (!b) return nullptr;
  return {{"epsilon", b->epsilon}, {"delta", b->delta}};
}

json MetricsJson(const audit::AuditReport& r) {
  json j = to_json(r);
  j.erase("rte_minutes");
  if (j.contains("vs_retrain")) j["vs_retrain"].erase("rte_minutes");
  return j;
}

}  // namespace

std::vector<std::size_t> ScenarioSplit::train() const {
  std::vector<std::size_t> out;
  out.reserve(retain.size() + forget.size());
  std::merge(retain.begin(), retain.end(), forget.begin(), forget.end(),
             std::back_inserter(out));
  return out;
}

ScenarioSplit make_split(const Dataset& data, const Deletion& deletion,
                         std::uint64_t seed, double holdout_fraction) {
  data.validate();
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    throw DomainError("holdout_fraction must lie in [0, 1)");
  const std::size_t n = data.size();
  Rng rng = make_rng(seed, 7);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_test = static_cast<std::size_t>(
      std::floor(holdout_fraction * static_cast<double>(n)));

  ScenarioSplit split;
  split.seed = seed;
  split.test.assign(perm.begin(), perm.begin() + n_test);
  std::vector<std::size_t> train(perm.begin() + n_test, perm.end());
  std::sort(split.test.begin(), split.test.end());

  if (deletion.kind == Deletion::Kind::kRandomFraction) {
    if (!(deletion.fraction > 0.0 && deletion.fraction < 1.0))
      throw DomainError("deletion fraction must lie in (0, 1)");
    const auto n_forget = static_cast<std::size_t>(
        std::floor(deletion.fraction * static_cast<double>(train.size())));
    split.forget.assign(train.begin(), train.begin() + n_forget);
    split.retain.assign(train.begin() + n_forget, train.end());
  } else {
    if (deletion.class_id < 0 || deletion.class_id >= data.num_classes)
      throw DomainError("deletion class out of range");
    for (std::size_t i : train)
      (data.labels[i] == deletion.class_id ? split.forget : split.retain)
          .push_back(i);
    if (split.forget.empty())
      throw DomainError("deletion class has no training samples");
  }
  std::sort(split.forget.begin(), split.forget.end());
  std::sort(split.retain.begin(), split.retain.end());
  return split;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kNft:
      return "nft";
    case Method::kBlockwise:
      return "blockwise";
    case Method::kRetrain:
      return "retrain";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "nft") return Method::kNft;
  if (name == "blockwise") return Method::kBlockwise;
  if (name == "retrain") return Method::kRetrain;
  throw DomainError("unknown method: " + name);
}

Dataset load_source(const DatasetSource& source) {
  if (source.kind == DatasetSource::Kind::kBlobs)
    return make_blobs(source.blobs);
  return load_idx(source.images_path, source.labels_path, source.limit);
}

void ExperimentConfig::validate() const {
  if (n_seeds < 1) throw DomainError("n_seeds must be >= 1");
  if (methods.empty()) throw DomainError("no methods configured");
  if (budgets.empty()) throw DomainError("no budgets configured");
  for (int k : k_values)
    if (k < 1) throw DomainError("k values must be >= 1");
  if (k_values.empty()) throw DomainError("no k values configured");
  if (hidden.empty()) throw DomainError("network needs a hidden layer");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw DomainError("holdout_fraction must lie in (0, 1)");
  if (deletion.kind == Deletion::Kind::kRandomFraction &&
      !(deletion.fraction > 0.0 && deletion.fraction < 1.0))
    throw DomainError("deletion fraction must lie in (0, 1)");
  if (!(discrepancy > 0.0)) throw DomainError("discrepancy must be > 0");
  if (eval_every < 1) throw DomainError("eval_every must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = Trim(line.substr(0, eq));
    const std::string v = Trim(line.substr(eq + 1));
    if (key == "name") {
      c.name = v;
    } else if (key == "dataset") {
      if (v == "blobs") c.dataset.kind = DatasetSource::Kind::kBlobs;
      else if (v == "mnist_idx") c.dataset.kind = DatasetSource::Kind::kMnistIdx;
      else throw FormatError("unknown dataset kind " + v);
    } else if (key == "blobs.n") {
      c.dataset.blobs.n = ToUnsigned(key, v);
    } else if (key == "blobs.dim") {
      c.dataset.blobs.dim = ToUnsigned(key, v);
    } else if (key == "blobs.classes") {
      c.dataset.blobs.num_classes = ToInt(key, v);
    } else if (key == "blobs.separation") {
      c.dataset.blobs.separation = ToDouble(key, v);
    } else if (key == "blobs.seed") {
      c.dataset.blobs.seed = ToUnsigned(key, v);
    } else if (key == "mnist.images") {
      c.dataset.images_path = v;
    } else if (key == "mnist.labels") {
      c.dataset.labels_path = v;
    } else if (key == "mnist.limit") {
      c.dataset.limit = ToUnsigned(key, v);
    } else if (key == "holdout_fraction") {
      c.holdout_fraction = ToDouble(key, v);
    } else if (key == "deletion") {
      if (v == "random_fraction") c.deletion.kind = Deletion::Kind::kRandomFraction;
      else if (v == "classwise") c.deletion.kind = Deletion::Kind::kClassWise;
      else throw FormatError("unknown deletion kind " + v);
    } else if (key == "deletion.fraction") {
      c.deletion.fraction = ToDouble(key, v);
    } else if (key == "deletion.class") {
      c.deletion.class_id = ToInt(key, v);
    } else if (key == "split_seed") {
      c.split_seed = ToUnsigned(key, v);
    } else if (key == "budgets") {
      c.budgets.clear();
      for (const std::string& item : SplitList(v)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
          throw FormatError("budgets entries look like epsilon:delta");
        c.budgets.push_back({ToDouble(key, Trim(item.substr(0, colon))),
                             ToDouble(key, Trim(item.substr(colon + 1)))});
      }
    } else if (key == "k_values") {
      c.k_values.clear();
      for (const std::string& item : SplitList(v)) c.k_values.push_back(ToInt(key, item));
    } else if (key == "methods") {
      c.methods.clear();
      for (const std::string& item : SplitList(v)) c.methods.push_back(parse_method(item));
    } else if (key == "n_seeds") {
      c.n_seeds = ToInt(key, v);
    } else if (key == "base_seed") {
      c.base_seed = ToUnsigned(key, v);
    } else if (key == "output_dir") {
      c.output_dir = v;
    } else if (key == "hidden") {
      c.hidden.clear();
      for (const std::string& item : SplitList(v)) c.hidden.push_back(ToUnsigned(key, item));
    } else if (key == "train.steps") {
      c.train.steps = ToInt(key, v);
    } else if (key == "train.batch_size") {
      c.train.batch_size = ToUnsigned(key, v);
    } else if (key == "train.lr") {
      c.train.sgd.lr = ToDouble(key, v);
    } else if (key == "train.momentum") {
      c.train.sgd.momentum = ToDouble(key, v);
    } else if (key == "train.weight_decay") {
      c.train.sgd.weight_decay = ToDouble(key, v);
    } else if (key == "gamma") {
      c.gamma = ToDouble(key, v);
    } else if (key == "lambda") {
      c.lambda = ToDouble(key, v);
    } else if (key == "c1") {
      c.c1 = ToDouble(key, v);
    } else if (key == "discrepancy") {
      c.discrepancy = ToDouble(key, v);
    } else if (key == "q") {
      if (v == "auto") c.q.reset();
      else c.q = ToDouble(key, v);
    } else if (key == "mode") {
      if (v == "min_noise") c.mode = accounting::PlanMode::MinNoise();
      else if (v == "fixed_steps") c.mode.kind = accounting::PlanMode::Kind::kFixedSteps;
      else throw FormatError("unknown mode " + v);
    } else if (key == "steps") {
      c.mode.steps = ToInt(key, v);
    } else if (key == "strategy") {
      c.strategy = subspace::parse_strategy(v);
    } else if (key == "batch_size") {
      c.batch_size = ToUnsigned(key, v);
    } else if (key == "fine_tune_steps") {
      if (v == "fill") c.fine_tune_steps.reset();
      else c.fine_tune_steps = ToInt(key, v);
    } else if (key == "fine_tune.lr") {
      c.fine_tune.lr = ToDouble(key, v);
    } else if (key == "fine_tune.momentum") {
      c.fine_tune.momentum = ToDouble(key, v);
    } else if (key == "fine_tune.weight_decay") {
      c.fine_tune.weight_decay = ToDouble(key, v);
    } else if (key == "total_step_cap") {
      c.total_step_cap = ToInt(key, v);
    } else if (key == "clip_mode") {
      if (v == "block") c.clip_mode = engine::ClipMode::kBlock;
      else if (v == "full") c.clip_mode = engine::ClipMode::kFull;
      else throw FormatError("unknown clip_mode " + v);
    } else if (key == "eval_every") {
      c.eval_every = ToInt(key, v);
    } else if (key == "run_mia") {
      c.run_mia = ToBool(key, v);
    } else if (key == "write_files") {
      c.write_files = ToBool(key, v);
    } else {
      throw FormatError("unknown config key " + key);
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolve_output_dir(const ExperimentConfig& config) {
  const char* env = std::getenv("BWU_OUTPUT_DIR");
  if (env != nullptr && *env != '\0') return env;
  return config.output_dir;
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  m.n = static_cast<int>(v.size());
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  using Clock = std::chrono::steady_clock;
  config.validate();
  ExperimentResult result;
  result.config = config;
  result.output_dir = resolve_output_dir(config);
  if (config.write_files)
    std::filesystem::create_directories(result.output_dir);
  const std::filesystem::path out_dir(result.output_dir);

  const Dataset data = load_source(config.dataset);
  model::MlpSpec arch;
  arch.widths.push_back(data.input_dim);
  arch.widths.insert(arch.widths.end(), config.hidden.begin(), config.hidden.end());
  arch.widths.push_back(static_cast<std::size_t>(data.num_classes));
  arch.validate();

  auto minutes_since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count() / 60.0;
  };

  std::map<std::string, json> plans;
  for (int s = 0; s < config.n_seeds; ++s) {
    const auto su = static_cast<std::uint64_t>(s);
    const std::uint64_t seed_s = derive_seed(config.base_seed, su);
    const ScenarioSplit split = make_split(
        data, config.deletion, derive_seed(config.split_seed, su),
        config.holdout_fraction);
    const Dataset train_set = data.subset(split.train());
    const Dataset retain = data.subset(split.retain);
    const Dataset forget = data.subset(split.forget);
    const Dataset test = data.subset(split.test);
    std::vector<std::uint64_t> retain_ids = retain.ids;
    std::sort(retain_ids.begin(), retain_ids.end());
    engine::Seeds seeds;
    seeds.data_order = derive_seed(seed_s, 1);
    seeds.noise = derive_seed(seed_s, 2);
    seeds.init = derive_seed(seed_s, 3);
    const engine::EvalSets eval{&test, &retain, &forget};
    audit::MiaConfig mia;
    mia.seed = derive_seed(seed_s, 4);

    auto finish = [&](CellResult& cell, const model::ParamVector& params) {
      cell.report = audit::compute_metrics(arch, params, retain, forget, test);
      if (config.run_mia)
        cell.report.mia_efficacy =
            audit::mia_efficacy(arch, params, retain, forget, test, mia);
    };

    const engine::RunRecord full = engine::train(arch, train_set, seeds, config.train);
    audit::AuditReport original =
        audit::compute_metrics(arch, full.final_params, retain, forget, test);
    if (config.run_mia)
      original.mia_efficacy =
          audit::mia_efficacy(arch, full.final_params, retain, forget, test, mia);
    result.original.push_back(original);

    CellResult baseline;
    baseline.method = Method::kRetrain;
    baseline.seed_index = s;
    try {
      const auto t0 = Clock::now();
      baseline.record =
          engine::coupled_retrain(arch, retain, seeds, config.train, eval);
      baseline.rte_minutes = minutes_since(t0);
      finish(baseline, baseline.record.final_params);
      baseline.report.rte_minutes = baseline.rte_minutes;
      baseline.ok = true;
    } catch (const Error& e) {
      baseline.error = e.what();
    }

    auto emit = [&](CellResult cell) {
      if (cell.ok) {
        if (baseline.ok && cell.method != Method::kRetrain)
          cell.report.vs_retrain = audit::deltas(cell.report, baseline.report);
        if (config.write_files) {
          cell.csv_file = CellTag(cell.method, cell.budget, cell.k, s) + ".csv";
          cell.record.write_csv((out_dir / cell.csv_file).string());
        }
      }
      result.cells.push_back(std::move(cell));
    };

    for (Method m : config.methods) {
      if (m == Method::kRetrain) {
        CellResult cell = baseline;
        if (cell.ok) cell.report.vs_retrain = audit::deltas(cell.report, cell.report);
        emit(std::move(cell));
        continue;
      }
      const std::vector<int> ks =
          m == Method::kNft ? std::vector<int>{1} : config.k_values;
      for (const Budget& b : config.budgets) {
        for (int k : ks) {
          CellResult cell;
          cell.method = m;
          cell.budget = b;
          cell.k = k;
          cell.seed_index = s;
          try {
            accounting::BudgetSpec spec;
            spec.epsilon = b.epsilon;
            spec.delta = b.delta;
            spec.gamma = config.gamma;
            spec.lambda = config.lambda;
            spec.c1 = config.c1;
            spec.c0 = config.discrepancy / 2.0;
            spec.q = config.q;
            engine::RunConfig rc;
            rc.plan = accounting::make_plan(spec, k, config.mode);
            rc.batch_size = config.batch_size;
            rc.fine_tune_steps = config.fine_tune_steps;
            rc.fine_tune = config.fine_tune;
            rc.seeds = seeds;
            rc.total_step_cap = config.total_step_cap;
            rc.clip_mode = config.clip_mode;
            rc.eval_every = config.eval_every;
            plans.emplace(CellTag(m, b, k, -1), to_json(rc.plan));
            cell.sigma2 = rc.plan.sigma2;
            cell.steps_per_block = rc.plan.steps_per_block;

            const auto t0 = Clock::now();
            if (m == Method::kNft) {
              cell.record = engine::run_nft(arch, full.final_params, rc, retain, eval);
            } else {
              const subspace::BlockBasis basis = subspace::build_basis(
                  config.strategy, arch.basis_layers(), k,
                  derive_seed(seed_s, 100 + static_cast<std::uint64_t>(k)));
              cell.record = engine::run_blockwise(arch, full.final_params, rc,
                                                  basis, retain, eval);
            }
            cell.rte_minutes = minutes_since(t0);
            cell.noisy_steps = cell.record.noisy_steps;
            for (const engine::StepRow& row : cell.record.rows) {
              if (row.phase != engine::Phase::kUnlearnBlock || !row.test_acc) continue;
              cell.min_test_acc_during_unlearning =
                  std::min(cell.min_test_acc_during_unlearning.value_or(1.0),
                           *row.test_acc);
            }
            // Forget-set isolation: only retain ids may ever be touched.
            if (!std::includes(retain_ids.begin(), retain_ids.end(),
                               cell.record.touched_ids.begin(),
                               cell.record.touched_ids.end()))
              throw Error("a forget-set sample reached a gradient computation");
            finish(cell, cell.record.final_params);
            cell.report.rte_minutes = cell.rte_minutes;
            cell.ok = true;
          } catch (const Error& e) {
            cell.ok = false;
            cell.error = e.what();
          }
          emit(std::move(cell));
        }
      }
    }
  }

  // Aggregate in first-appearance order of (method, budget, k).
  for (const CellResult& c : result.cells) {
    auto same = [&](const Aggregate& a) {
      const bool budgets_equal =
          a.budget.has_value() == c.budget.has_value() &&
          (!a.budget || (a.budget->epsilon == c.budget->epsilon &&
                         a.budget->delta == c.budget->delta));
      return a.method == c.method && a.k == c.k && budgets_equal;
    };
    auto it = std::find_if(result.aggregates.begin(), result.aggregates.end(), same);
    if (it == result.aggregates.end()) {
      Aggregate a;
      a.method = c.method;
      a.budget = c.budget;
      a.k = c.k;
      result.aggregates.push_back(a);
      it = result.aggregates.end() - 1;
    }
    if (!c.ok) {
      ++it->n_failed;
      continue;
    }
    ++it->n_ok;
  }
  for (Aggregate& a : result.aggregates) {
    std::vector<double> ua, ra, ta, mia, rte;
    for (const CellResult& c : result.cells) {
      if (!c.ok || c.method != a.method || c.k != a.k ||
          c.budget.has_value() != a.budget.has_value())
        continue;
      if (a.budget && (c.budget->epsilon != a.budget->epsilon ||
                       c.budget->delta != a.budget->delta))
        continue;
      if (c.report.ua) ua.push_back(*c.report.ua);
      ra.push_back(c.report.ra);
      ta.push_back(c.report.ta);
      if (c.report.mia_efficacy) mia.push_back(*c.report.mia_efficacy);
      rte.push_back(c.rte_minutes);
    }
    if (!ua.empty()) a.ua = mean_std(ua);
    if (!ra.empty()) a.ra = mean_std(ra);
    if (!ta.empty()) a.ta = mean_std(ta);
    if (!mia.empty()) a.mia = mean_std(mia);
    if (!rte.empty()) a.rte = mean_std(rte);
  }

  if (config.write_files) {
    for (const auto& [tag, plan] : plans)
      write_json_file((out_dir / ("plan_" + tag + ".json")).string(), plan);
    std::ofstream(out_dir / "summary.json", std::ios::binary) << result.summary_json();
    std::ofstream(out_dir / "timing.json", std::ios::binary) << result.timing_json();
    std::ofstream(out_dir / "table.txt", std::ios::binary) << result.table();
  }
  return result;
}

std::string ExperimentResult::summary_json() const {
  json j;
  j["version"] = kJsonFormatVersion;
  j["config"] = ConfigJson(config);
  json original_j = json::array();
  for (const audit::AuditReport& r : original) original_j.push_back(MetricsJson(r));
  j["original"] = original_j;
  json cells_j = json::array();
  for (const CellResult& c : cells) {
    json cj = {{"method", method_name(c.method)},
               {"budget", BudgetJson(c.budget)},
               {"k", c.k},
               {"seed", c.seed_index},
               {"status", c.ok ? "ok" : "error"}};
    if (!c.ok) {
      cj["error"] = c.error;
    } else {
      cj["metrics"] = MetricsJson(c.report);
      cj["sigma2"] = c.sigma2;
      cj["steps_per_block"] = c.steps_per_block;
      cj["noisy_steps"] = c.noisy_steps;
      cj["min_test_acc_during_unlearning"] =
          c.min_test_acc_during_unlearning ? json(*c.min_test_acc_during_unlearning)
                                           : json(nullptr);
      cj["csv"] = c.csv_file.empty() ? json(nullptr) : json(c.csv_file);
    }
    cells_j.push_back(std::move(cj));
  }
  j["cells"] = cells_j;
  json agg_j = json::array();
  for (const Aggregate& a : aggregates) {
    agg_j.push_back({{"method", method_name(a.method)},
                     {"budget", BudgetJson(a.budget)},
                     {"k", a.k},
                     {"n_ok", a.n_ok},
                     {"n_failed", a.n_failed},
                     {"ua", OptionalMeanStd(a.ua)},
                     {"ra", OptionalMeanStd(a.ra)},
                     {"ta", OptionalMeanStd(a.ta)},
                     {"mia", OptionalMeanStd(a.mia)}});
  }
  j["aggregates"] = agg_j;
  return j.dump(2) + "\n";
}

std::string ExperimentResult::timing_json() const {
  json cells_j = json::array();
  for (const CellResult& c : cells)
    cells_j.push_back({{"method", method_name(c.method)},
                       {"budget", BudgetJson(c.budget)},
                       {"k", c.k},
                       {"seed", c.seed_index},
                       {"rte_minutes", c.rte_minutes}});
  json agg_j = json::array();
  for (const Aggregate& a : aggregates)
    agg_j.push_back({{"method", method_name(a.method)},
                     {"budget", BudgetJson(a.budget)},
                     {"k", a.k},
                     {"rte_minutes", OptionalMeanStd(a.rte)}});
  return json{{"cells", cells_j}, {"aggregates", agg_j}}.dump(2) + "\n";
}

std::string ExperimentResult::table() const {
  auto cell = [](const std::optional<MeanStd>& m, int precision) {
    if (!m) return std::string("-");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f +- %.*f", precision, m->mean,
                  precision, m->std);
    return std::string(buf);
  };
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-8s %-4s %-16s %-16s %-16s %-16s %-16s\n",
                "method", "eps", "k", "UA", "RA", "TA", "MIA", "RTE(min)");
  out += line;
  std::vector<double> ua, ra, ta, mia;
  for (const audit::AuditReport& r : original) {
    if (r.ua) ua.push_back(*r.ua);
    ra.push_back(r.ra);
    ta.push_back(r.ta);
    if (r.mia_efficacy) mia.push_back(*r.mia_efficacy);
  }
  auto opt = [](const std::vector<double>& v) -> std::optional<MeanStd> {
    if (v.empty()) return std::nullopt;
    return mean_std(v);
  };
  std::snprintf(line, sizeof(line), "%-10s %-8s %-4s %-16s %-16s %-16s %-16s %-16s\n",
                "original", "-", "-", cell(opt(ua), 2).c_str(),
                cell(opt(ra), 2).c_str(), cell(opt(ta), 2).c_str(),
                cell(opt(mia), 2).c_str(), "-");
  out += line;
  for (const Aggregate& a : aggregates) {
    const std::string eps = a.budget ? FormatG(a.budget->epsilon) : "-";
    const std::string k = a.method == Method::kRetrain ? "-" : std::to_string(a.k);
    std::snprintf(line, sizeof(line), "%-10s %-8s %-4s %-16s %-16s %-16s %-16s %-16s\n",
                  method_name(a.method).c_str(), eps.c_str(), k.c_str(),
                  cell(a.ua, 2).c_str(), cell(a.ra, 2).c_str(),
                  cell(a.ta, 2).c_str(), cell(a.mia, 2).c_str(),
                  cell(a.rte, 3).c_str());
    out += line;
  }
  return out;
}

}  // namespace bwu::harness
