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

#include "bwu/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "bwu/errors.h"
#include "bwu/rng.h"

namespace bwu {
namespace {

std::uint32_t ReadBigEndian32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("truncated IDX header: " + path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

std::vector<std::vector<double>> ClassMeans(const BlobsSpec& spec) {
  Rng rng = make_rng(spec.seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> means(spec.num_classes,
                                         std::vector<double>(spec.dim));
  for (auto& m : means) {
    double norm2 = 0.0;
    for (double& v : m) {
      v = normal(rng);
      norm2 += v * v;
    }
    const double s = spec.separation / std::sqrt(norm2);
    for (double& v : m) v *= s;
  }
  return means;
}

void CheckBlobs(const BlobsSpec& spec) {
  if (spec.dim == 0 || spec.num_classes < 2)
    throw DomainError("blobs need dim >= 1 and >= 2 classes");
  if (!(spec.separation >= 0.0)) throw DomainError("separation must be >= 0");
}

}  // namespace

void Dataset::validate() const {
  if (input_dim == 0) throw DomainError("dataset input_dim must be >= 1");
  if (num_classes < 1) throw DomainError("dataset needs >= 1 class");
  if (inputs.size() != labels.size() * input_dim || ids.size() != labels.size())
    throw DomainError("dataset arrays have inconsistent sizes");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw DomainError("label out of range");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.input_dim = input_dim;
  out.num_classes = num_classes;
  out.inputs.reserve(indices.size() * input_dim);
  out.labels.reserve(indices.size());
  out.ids.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw DomainError("subset index out of range");
    const auto r = row(i);
    out.inputs.insert(out.inputs.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
    out.ids.push_back(ids[i]);
  }
  return out;
}

Dataset sample_blobs(const BlobsSpec& spec, std::size_t n,
                     std::uint64_t sample_seed, std::uint64_t first_id) {
  CheckBlobs(spec);
  const auto means = ClassMeans(spec);
  Rng rng = make_rng(sample_seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
  std::shuffle(labels.begin(), labels.end(), rng);
  Dataset d;
  d.input_dim = spec.dim;
  d.num_classes = spec.num_classes;
  d.inputs.resize(n * spec.dim);
  d.labels = std::move(labels);
  d.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = means[d.labels[i]];
    for (std::size_t j = 0; j < spec.dim; ++j)
      d.inputs[i * spec.dim + j] = m[j] + normal(rng);
    d.ids[i] = first_id + i;
  }
  return d;
}

Dataset make_blobs(const BlobsSpec& spec) {
  return sample_blobs(spec, spec.n, spec.seed, 0);
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open " + labels_path);
  if (ReadBigEndian32(img, images_path) != 0x00000803)
    throw FormatError("bad image magic in " + images_path);
  if (ReadBigEndian32(lab, labels_path) != 0x00000801)
    throw FormatError("bad label magic in " + labels_path);
  const std::size_t n_img = ReadBigEndian32(img, images_path);
  const std::size_t rows = ReadBigEndian32(img, images_path);
  const std::size_t cols = ReadBigEndian32(img, images_path);
  const std::size_t n_lab = ReadBigEndian32(lab, labels_path);
  if (n_img != n_lab) throw FormatError("image/label count mismatch");
  if (rows == 0 || cols == 0) throw FormatError("empty IDX images");
  const std::size_t n = limit > 0 ? std::min(limit, n_img) : n_img;

  Dataset d;
  d.input_dim = rows * cols;
  d.num_classes = 10;
  std::vector<unsigned char> pix(n * d.input_dim);
  if (!img.read(reinterpret_cast<char*>(pix.data()),
                static_cast<std::streamsize>(pix.size())))
    throw FormatError("truncated image payload in " + images_path);
  std::vector<unsigned char> lbl(n);
  if (!lab.read(reinterpret_cast<char*>(lbl.data()),
                static_cast<std::streamsize>(lbl.size())))
    throw FormatError("truncated label payload in " + labels_path);
  d.inputs.resize(pix.size());
  for (std::size_t i = 0; i < pix.size(); ++i) d.inputs[i] = pix[i] / 255.0;
  for (unsigned char y : lbl)
    if (y >= 10) throw FormatError("label out of range in " + labels_path);
  d.labels.assign(lbl.begin(), lbl.end());
  d.ids.resize(n);
  std::iota(d.ids.begin(), d.ids.end(), std::uint64_t{0});
  return d;
}

}  // namespace bwu
