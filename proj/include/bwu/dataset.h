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

#ifndef BWU_DATASET_H_
#define BWU_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bwu {

// Row-major n x input_dim features with integer labels. Every sample carries
// a stable id so that data-pipeline instrumentation can tell which samples a
// computation touched.
struct Dataset {
  std::size_t input_dim = 0;
  int num_classes = 0;
  std::vector<double> inputs;
  std::vector<int> labels;
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {inputs.data() + i * input_dim, input_dim};
  }
  // DomainError on inconsistent sizes or labels outside [0, num_classes).
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

// A minibatch is a small dataset.
using Batch = Dataset;

struct BlobsSpec {
  std::size_t n = 1000;
  std::size_t dim = 20;
  int num_classes = 10;
  // Class means are separation * (random unit vector); noise is N(0, I).
  double separation = 3.0;
  std::uint64_t seed = 0;
};

// Balanced labels (sample i has class i mod C before shuffling).
Dataset make_blobs(const BlobsSpec& spec);

// Draws `n` fresh samples from the same class means as `spec` (same seed),
// using `sample_seed` for the per-sample noise. Ids start at `first_id`.
Dataset sample_blobs(const BlobsSpec& spec, std::size_t n,
                     std::uint64_t sample_seed, std::uint64_t first_id);

// MNIST-style IDX files (big-endian). Pixels are scaled to [0, 1]. A nonzero
// `limit` keeps only the first `limit` samples.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit = 0);

}  // namespace bwu

#endif  // BWU_DATASET_H_
