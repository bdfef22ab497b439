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

// Minimal multilayer perceptron with explicit forward and backward passes.

#ifndef BWU_MODEL_H_
#define BWU_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bwu/dataset.h"
#include "bwu/subspace.h"

namespace bwu::model {

struct LayerEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;

  std::size_t size() const;
};

using LayerMap = std::vector<LayerEntry>;

// Flat float64 parameters plus the layer structure they encode.
class ParamVector {
 public:
  ParamVector() = default;
  // DomainError unless the map tiles [0, values.size()) in order.
  ParamVector(std::vector<double> values, LayerMap layer_map);

  std::size_t size() const { return values_.size(); }
  const LayerMap& layer_map() const { return layer_map_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  bool same_layout(const ParamVector& other) const;

 private:
  std::vector<double> values_;
  LayerMap layer_map_;
};

// widths = {input, hidden..., classes}; ReLU hidden units, softmax output.
struct MlpSpec {
  std::vector<std::size_t> widths;

  void validate() const;
  std::size_t num_layers() const { return widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  int num_classes() const { return static_cast<int>(widths.back()); }
  std::size_t dim() const;
  // fcN.weight (out x in) followed by fcN.bias (out) for N = 1..L.
  LayerMap layer_map() const;
  // Each layer as [W | b] for basis construction.
  std::vector<subspace::LayerShape> basis_layers() const;
};

ParamVector zeros(const MlpSpec& spec);
// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

struct ForwardResult {
  std::vector<double> logits;  // n x classes
  double loss = 0.0;           // mean cross-entropy
};

ForwardResult forward(const MlpSpec& spec, const ParamVector& params,
                      const Batch& batch);

struct LossGrad {
  double loss = 0.0;
  ParamVector gradient;
};

// Gradient of the mean cross-entropy over the batch.
LossGrad backward(const MlpSpec& spec, const ParamVector& params,
                  const Batch& batch);

// v * min(C / ||v||, 1). The result always satisfies ||result|| <= C, which
// makes clip idempotent bit for bit.
std::vector<double> clip(std::span<const double> v, double c);

// Argmax predictions; ties go to the lowest class index.
std::vector<int> predict(const MlpSpec& spec, const ParamVector& params,
                         const Dataset& data);
double accuracy(const MlpSpec& spec, const ParamVector& params,
                const Dataset& data);

// Per-sample confidence features: max softmax probability and cross-entropy.
struct SampleScores {
  std::vector<double> max_prob;
  std::vector<double> loss;
};
SampleScores sample_scores(const MlpSpec& spec, const ParamVector& params,
                           const Dataset& data);

// Throws NumericalError if any entry is NaN or infinite.
void check_finite(std::span<const double> v, const char* what);

}  // namespace bwu::model

#endif  // BWU_MODEL_H_
