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

#include "bwu/serialize.h"

#include <fstream>
#include <optional>

#include "bwu/errors.h"

namespace bwu {
namespace {

using nlohmann::json;

json Optional(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string_view RotationName(subspace::Rotation r) {
  switch (r) {
    case subspace::Rotation::kDense:
      return "dense";
    case subspace::Rotation::kPermutation:
      return "permutation";
    case subspace::Rotation::kIdentity:
      return "identity";
  }
  return "unknown";
}

subspace::Rotation ParseRotation(const std::string& s) {
  if (s == "dense") return subspace::Rotation::kDense;
  if (s == "permutation") return subspace::Rotation::kPermutation;
  if (s == "identity") return subspace::Rotation::kIdentity;
  throw FormatError("unknown rotation " + s);
}

}  // namespace

json to_json(const accounting::NoisePlan& plan) {
  json j;
  j["version"] = kJsonFormatVersion;
  j["budget"] = {{"epsilon", plan.budget.epsilon},
                 {"delta", plan.budget.delta},
                 {"gamma", plan.budget.gamma},
                 {"lambda", plan.budget.lambda},
                 {"c0", plan.budget.c0},
                 {"c1", plan.budget.c1},
                 {"q", plan.budget.q ? json(*plan.budget.q) : json(nullptr)}};
  j["mode"] = plan.mode.kind == accounting::PlanMode::Kind::kMinNoise
                  ? json("min_noise")
                  : json("fixed_steps");
  j["k"] = plan.k;
  j["scale_c0_per_block"] = plan.scale_c0_per_block;
  j["q"] = plan.q_used;
  j["eps_renyi_total"] = plan.eps_renyi_total;
  j["eps_renyi_per_block"] = plan.eps_renyi_per_block;
  j["c0_per_block"] = plan.c0_per_block;
  j["c1_per_block"] = plan.c1_per_block;
  j["regime"] = accounting::regime_name(plan.regime);
  j["sigma2_min"] = plan.sigma2_min;
  j["sigma2_min_attained"] = plan.sigma2_min_attained;
  j["sigma2"] = plan.sigma2;
  j["steps_per_block"] = plan.steps_per_block;
  j["total_noisy_steps"] = plan.total_noisy_steps();
  j["sigma2_global"] = plan.sigma2_global;
  j["certified_renyi_per_block"] = plan.certified_renyi_per_block;
  j["reconstructed_epsilon"] = plan.reconstructed_epsilon();
  if (plan.aux) {
    j["quadratic"] = {{"zeta", plan.aux->zeta},   {"beta0", plan.aux->beta0},
                      {"beta1", plan.aux->beta1}, {"cb", plan.aux->cb},
                      {"z", plan.aux->z},         {"x", plan.aux->x},
                      {"discriminant", plan.aux->discriminant}};
  }
  return j;
}

json to_json(const subspace::BlockBasis& basis) {
  json j;
  j["format"] = "bwu-basis";
  j["version"] = kJsonFormatVersion;
  j["strategy"] = subspace::strategy_name(basis.strategy());
  j["seed"] = basis.seed();
  j["k"] = basis.num_blocks();
  j["dim"] = basis.dim();
  j["sizes"] = basis.sizes();
  json layers = json::array();
  for (const subspace::LayerFrame& f : basis.layers()) {
    json segs = json::array();
    for (const subspace::Segment& s : f.shape.segments)
      segs.push_back({{"offset", s.offset}, {"cols", s.cols}});
    json l = {{"name", f.shape.name},
              {"rows", f.shape.rows},
              {"segments", segs},
              {"rotation", RotationName(f.rotation)},
              {"chunk_begin", f.chunk_begin}};
    if (f.rotation == subspace::Rotation::kDense) l["q"] = f.q;
    if (f.rotation == subspace::Rotation::kPermutation) l["perm"] = f.perm;
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

subspace::BlockBasis basis_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "bwu-basis")
      throw FormatError("not a basis document");
    if (j.at("version").get<int>() != kJsonFormatVersion)
      throw FormatError("unsupported basis version");
    std::vector<subspace::LayerFrame> frames;
    for (const json& l : j.at("layers")) {
      subspace::LayerFrame f;
      f.shape.name = l.at("name").get<std::string>();
      f.shape.rows = l.at("rows").get<std::size_t>();
      for (const json& s : l.at("segments"))
        f.shape.segments.push_back(
            {s.at("offset").get<std::size_t>(), s.at("cols").get<std::size_t>()});
      f.rotation = ParseRotation(l.at("rotation").get<std::string>());
      f.chunk_begin = l.at("chunk_begin").get<std::vector<std::size_t>>();
      if (f.rotation == subspace::Rotation::kDense)
        f.q = l.at("q").get<std::vector<double>>();
      if (f.rotation == subspace::Rotation::kPermutation)
        f.perm = l.at("perm").get<std::vector<std::size_t>>();
      frames.push_back(std::move(f));
    }
    subspace::BlockBasis basis(
        subspace::parse_strategy(j.at("strategy").get<std::string>()),
        j.at("seed").get<std::uint64_t>(), j.at("k").get<int>(),
        std::move(frames));
    if (basis.dim() != j.at("dim").get<std::size_t>() ||
        basis.sizes() != j.at("sizes").get<std::vector<std::size_t>>())
      throw FormatError("basis header disagrees with its layers");
    return basis;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed basis JSON: ") + e.what());
  }
}

json to_json(const audit::AuditReport& r) {
  json j = {{"ua", Optional(r.ua)},
            {"ra", r.ra},
            {"ta", r.ta},
            {"mia_efficacy", Optional(r.mia_efficacy)},
            {"rte_minutes", Optional(r.rte_minutes)}};
  if (r.vs_retrain) {
    j["vs_retrain"] = {{"ua", Optional(r.vs_retrain->ua)},
                       {"ra", r.vs_retrain->ra},
                       {"ta", r.vs_retrain->ta},
                       {"mia_efficacy", Optional(r.vs_retrain->mia_efficacy)},
                       {"rte_minutes", Optional(r.vs_retrain->rte_minutes)}};
  }
  return j;
}

json to_json(const audit::DeltaEstimate& e) {
  return {{"samples", e.samples},   {"rho", e.rho},
          {"delta_rho", e.delta_rho}, {"n_runs", e.n_runs},
          {"vacuous", e.vacuous}};
}

json to_json(const divergence::NoiseEquivalenceReport& r) {
  return {{"n_samples", r.n_samples},
          {"dim", r.dim},
          {"sigma2", r.sigma2},
          {"max_cov_deviation", r.max_cov_deviation},
          {"cov_threshold", r.cov_threshold},
          {"ks", r.ks},
          {"ks_max", r.ks_max},
          {"ks_critical", r.ks_critical},
          {"pass", r.pass}};
}

json to_json(const divergence::TrajectoryReport& r) {
  return {{"mean_gap", r.mean_gap},
          {"variance", r.variance},
          {"numeric_divergence", r.numeric_divergence},
          {"closed_form", r.closed_form},
          {"certified", r.certified},
          {"pass", r.pass}};
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace bwu
