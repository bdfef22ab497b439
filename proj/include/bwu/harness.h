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

// Experiment orchestration: configuration, deletion scenarios, per-cell runs
// and report emission.

#ifndef BWU_HARNESS_H_
#define BWU_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bwu/accounting.h"
#include "bwu/audit.h"
#include "bwu/dataset.h"
#include "bwu/engine.h"
#include "bwu/subspace.h"

namespace bwu::harness {

struct Deletion {
  enum class Kind { kRandomFraction, kClassWise };
  Kind kind = Kind::kRandomFraction;
  double fraction = 0.1;
  int class_id = 0;

  static Deletion RandomFraction(double p) {
    return {Kind::kRandomFraction, p, 0};
  }
  static Deletion ClassWise(int c) { return {Kind::kClassWise, 0.0, c}; }
};

// Index sets into the source dataset, each sorted ascending.
struct ScenarioSplit {
  std::vector<std::size_t> retain;
  std::vector<std::size_t> forget;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  // retain and forget merged, in dataset order.
  std::vector<std::size_t> train() const;
};

// A holdout_fraction share of the data (floored) becomes the held-out test
// set; the deletion then acts on the remaining training samples.
// RandomFraction removes floor(p * |train|) of them; ClassWise removes every
// training sample of the class.
ScenarioSplit make_split(const Dataset& data, const Deletion& deletion,
                         std::uint64_t seed, double holdout_fraction = 0.0);

enum class Method { kNft, kBlockwise, kRetrain };
std::string method_name(Method m);
Method parse_method(const std::string& name);

struct DatasetSource {
  enum class Kind { kBlobs, kMnistIdx };
  Kind kind = Kind::kBlobs;
  BlobsSpec blobs;
  std::string images_path;
  std::string labels_path;
  std::size_t limit = 0;
};

Dataset load_source(const DatasetSource& source);

struct Budget {
  double epsilon = 1.0;
  double delta = 1e-5;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSource dataset;
  double holdout_fraction = 0.2;
  Deletion deletion;
  std::uint64_t split_seed = 0;
  std::vector<Budget> budgets = {{1.0, 1e-5}};
  std::vector<int> k_values = {1};
  std::vector<Method> methods = {Method::kBlockwise};
  int n_seeds = 5;
  std::uint64_t base_seed = 0;
  std::string output_dir = "bwu_out";

  std::vector<std::size_t> hidden = {64, 64};
  engine::TrainConfig train;

  // Unlearning dynamics. c0 = discrepancy / 2.
  double gamma = 1e-4;
  double lambda = 10.0;
  double c1 = 100.0;
  double discrepancy = 0.01;
  std::optional<double> q;
  accounting::PlanMode mode = accounting::PlanMode::MinNoise();
  subspace::Strategy strategy = subspace::Strategy::kRandomOrthonormal;
  std::size_t batch_size = 64;
  std::optional<int> fine_tune_steps;
  engine::SgdConfig fine_tune;
  int total_step_cap = 1000;
  engine::ClipMode clip_mode = engine::ClipMode::kBlock;
  int eval_every = 1;
  bool run_mia = true;
  bool write_files = true;

  void validate() const;
};

// Key = value lines; '#' starts a comment; lists are comma separated.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// BWU_OUTPUT_DIR, when set and non-empty, replaces config.output_dir.
std::string resolve_output_dir(const ExperimentConfig& config);

// One (method, budget, k, seed) cell.
struct CellResult {
  Method method = Method::kBlockwise;
  std::optional<Budget> budget;
  int k = 0;
  int seed_index = 0;
  bool ok = false;
  std::string error;
  audit::AuditReport report;
  double rte_minutes = 0.0;
  int noisy_steps = 0;
  double sigma2 = 0.0;
  int steps_per_block = 0;
  std::optional<double> min_test_acc_during_unlearning;
  std::string csv_file;
  engine::RunRecord record;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  int n = 0;
};
MeanStd mean_std(const std::vector<double>& v);

struct Aggregate {
  Method method = Method::kBlockwise;
  std::optional<Budget> budget;
  int k = 0;
  int n_ok = 0;
  int n_failed = 0;
  std::optional<MeanStd> ua;
  std::optional<MeanStd> ra;
  std::optional<MeanStd> ta;
  std::optional<MeanStd> mia;
  std::optional<MeanStd> rte;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string output_dir;
  std::vector<CellResult> cells;
  // Original (pre-unlearning) model metrics per seed.
  std::vector<audit::AuditReport> original;
  std::vector<Aggregate> aggregates;

  std::string summary_json() const;  // excludes timing
  std::string timing_json() const;
  std::string table() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace bwu::harness

#endif  // BWU_HARNESS_H_
