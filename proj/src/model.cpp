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

#include "bwu/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "bwu/errors.h"
#include "bwu/kernels.h"
#include "bwu/rng.h"

namespace bwu::model {
namespace {

struct LayerView {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t w_offset = 0;
  std::size_t b_offset = 0;
};

std::vector<LayerView> Views(const MlpSpec& spec) {
  std::vector<LayerView> views;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    LayerView v;
    v.in = spec.widths[l];
    v.out = spec.widths[l + 1];
    v.w_offset = offset;
    v.b_offset = offset + v.in * v.out;
    offset = v.b_offset + v.out;
    views.push_back(v);
  }
  return views;
}

void CheckShapes(const MlpSpec& spec, const ParamVector& params,
                 const Dataset& data) {
  spec.validate();
  if (params.size() != spec.dim())
    throw DomainError("parameter vector does not match architecture");
  if (data.input_dim != spec.input_dim())
    throw DomainError("input dimension does not match architecture");
  if (data.num_classes > spec.num_classes())
    throw DomainError("dataset has more classes than the network outputs");
  data.validate();
  check_finite(params.values(), "parameters");
}

// Activations of one sample: acts[0] = input, acts[l+1] = post-activation of
// layer l (logits for the last layer).
void ForwardSample(const std::vector<LayerView>& views,
                   std::span<const double> p, std::span<const double> x,
                   std::vector<std::vector<double>>& acts) {
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < views.size(); ++l) {
    const LayerView& v = views[l];
    std::vector<double>& z = acts[l + 1];
    z.resize(v.out);
    kernels::gemv(p.subspan(v.w_offset, v.in * v.out), v.out, v.in, acts[l], z);
    for (std::size_t o = 0; o < v.out; ++o) z[o] += p[v.b_offset + o];
    if (l + 1 < views.size())
      for (double& a : z) a = a > 0.0 ? a : 0.0;
  }
}

// Returns log-sum-exp of the logits and fills softmax probabilities.
double Softmax(std::span<const double> logits, std::vector<double>& prob) {
  const double m = *std::max_element(logits.begin(), logits.end());
  prob.resize(logits.size());
  double s = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    prob[c] = std::exp(logits[c] - m);
    s += prob[c];
  }
  for (double& v : prob) v /= s;
  return m + std::log(s);
}

}  // namespace

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericalError(std::string("non-finite value in ") + what);
}

std::size_t LayerEntry::size() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

ParamVector::ParamVector(std::vector<double> values, LayerMap layer_map)
    : values_(std::move(values)), layer_map_(std::move(layer_map)) {
  std::size_t offset = 0;
  for (const LayerEntry& e : layer_map_) {
    if (e.offset != offset) throw DomainError("layer map is not contiguous");
    offset += e.size();
  }
  if (offset != values_.size())
    throw DomainError("layer map does not cover the parameter vector");
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (size() != other.size() || layer_map_.size() != other.layer_map_.size())
    return false;
  for (std::size_t i = 0; i < layer_map_.size(); ++i) {
    const LayerEntry& a = layer_map_[i];
    const LayerEntry& b = other.layer_map_[i];
    if (a.name != b.name || a.shape != b.shape || a.offset != b.offset)
      return false;
  }
  return true;
}

void MlpSpec::validate() const {
  if (widths.size() < 3)
    throw DomainError("network needs input, >= 1 hidden and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw DomainError("layer widths must be >= 1");
}

std::size_t MlpSpec::dim() const {
  std::size_t d = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    d += (widths[l] + 1) * widths[l + 1];
  return d;
}

LayerMap MlpSpec::layer_map() const {
  validate();
  LayerMap map;
  for (const LayerView& v : Views(*this)) {
    const std::string base = "fc" + std::to_string(map.size() / 2 + 1);
    map.push_back({base + ".weight", {v.out, v.in}, v.w_offset});
    map.push_back({base + ".bias", {v.out}, v.b_offset});
  }
  return map;
}

std::vector<subspace::LayerShape> MlpSpec::basis_layers() const {
  validate();
  std::vector<subspace::LayerShape> out;
  for (const LayerView& v : Views(*this)) {
    subspace::LayerShape s;
    s.name = "fc" + std::to_string(out.size() + 1);
    s.rows = v.out;
    s.segments = {{v.w_offset, v.in}, {v.b_offset, 1}};
    out.push_back(std::move(s));
  }
  return out;
}

ParamVector zeros(const MlpSpec& spec) {
  return ParamVector(std::vector<double>(spec.dim(), 0.0), spec.layer_map());
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  ParamVector p = zeros(spec);
  Rng rng = make_rng(seed, 3);
  for (const LayerView& v : Views(spec)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(v.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t j = 0; j < v.in * v.out; ++j) p[v.w_offset + j] = u(rng);
    for (std::size_t j = 0; j < v.out; ++j) p[v.b_offset + j] = u(rng);
  }
  return p;
}

ForwardResult forward(const MlpSpec& spec, const ParamVector& params,
                      const Batch& batch) {
  CheckShapes(spec, params, batch);
  if (batch.empty()) throw DomainError("batch must not be empty");
  const auto views = Views(spec);
  const auto classes = static_cast<std::size_t>(spec.num_classes());
  std::vector<std::vector<double>> acts(views.size() + 1);
  std::vector<double> prob;
  ForwardResult r;
  r.logits.resize(batch.size() * classes);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ForwardSample(views, params.values(), batch.row(i), acts);
    const std::vector<double>& z = acts.back();
    std::copy(z.begin(), z.end(), r.logits.begin() + i * classes);
    total += Softmax(z, prob) - z[batch.labels[i]];
  }
  r.loss = total / static_cast<double>(batch.size());
  return r;
}

LossGrad backward(const MlpSpec& spec, const ParamVector& params,
                  const Batch& batch) {
  CheckShapes(spec, params, batch);
  if (batch.empty()) throw DomainError("batch must not be empty");
  const auto views = Views(spec);
  const std::size_t layers = views.size();
  std::vector<std::vector<double>> acts(layers + 1);
  std::vector<double> prob;
  std::vector<double> delta;
  std::vector<double> back;
  LossGrad out;
  out.gradient = zeros(spec);
  std::span<double> g = out.gradient.values();
  std::span<const double> p = params.values();
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ForwardSample(views, p, batch.row(i), acts);
    const int y = batch.labels[i];
    total += Softmax(acts.back(), prob) - acts.back()[y];
    delta = prob;
    delta[y] -= 1.0;
    for (std::size_t l = layers; l-- > 0;) {
      const LayerView& v = views[l];
      kernels::ger(1.0, delta, acts[l], g.subspan(v.w_offset, v.in * v.out),
                   v.out, v.in);
      kernels::axpy(1.0, delta, g.subspan(v.b_offset, v.out));
      if (l == 0) break;
      back.assign(v.in, 0.0);
      kernels::gemv_t(p.subspan(v.w_offset, v.in * v.out), v.out, v.in, delta,
                      back);
      for (std::size_t j = 0; j < v.in; ++j)
        if (!(acts[l][j] > 0.0)) back[j] = 0.0;
      delta.swap(back);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  kernels::scale(inv_n, g);
  out.loss = total * inv_n;
  check_finite(g, "gradient");
  return out;
}

std::vector<double> clip(std::span<const double> v, double c) {
  if (!(c > 0.0)) throw DomainError("clip radius must be > 0");
  std::vector<double> out(v.begin(), v.end());
  const double norm = kernels::norm2(out);
  if (norm <= c) return out;
  double factor = c / norm;
  for (;;) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * factor;
    if (kernels::norm2(out) <= c) return out;
    factor = std::nextafter(factor, 0.0);
  }
}

std::vector<int> predict(const MlpSpec& spec, const ParamVector& params,
                         const Dataset& data) {
  CheckShapes(spec, params, data);
  const auto views = Views(spec);
  std::vector<std::vector<double>> acts(views.size() + 1);
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    ForwardSample(views, params.values(), data.row(i), acts);
    const std::vector<double>& z = acts.back();
    int best = 0;
    for (std::size_t c = 1; c < z.size(); ++c)
      if (z[c] > z[best]) best = static_cast<int>(c);
    out[i] = best;
  }
  return out;
}

double accuracy(const MlpSpec& spec, const ParamVector& params,
                const Dataset& data) {
  if (data.empty()) throw DomainError("accuracy of an empty dataset");
  const std::vector<int> pred = predict(spec, params, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    correct += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

SampleScores sample_scores(const MlpSpec& spec, const ParamVector& params,
                           const Dataset& data) {
  CheckShapes(spec, params, data);
  const auto views = Views(spec);
  std::vector<std::vector<double>> acts(views.size() + 1);
  std::vector<double> prob;
  SampleScores s;
  s.max_prob.resize(data.size());
  s.loss.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    ForwardSample(views, params.values(), data.row(i), acts);
    const double lse = Softmax(acts.back(), prob);
    s.max_prob[i] = *std::max_element(prob.begin(), prob.end());
    s.loss[i] = lse - acts.back()[data.labels[i]];
  }
  return s;
}

}  // namespace bwu::model
