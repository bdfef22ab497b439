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

#include "bwu/subspace.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "bwu/errors.h"
#include "bwu/kernels.h"

namespace bwu::subspace {
namespace {

// Number of p in [0, x) with p mod k == i.
std::size_t ResidueCount(std::size_t x, std::size_t i, std::size_t k) {
  return (x + k - 1 - i) / k;
}

std::vector<double> GatherLayer(const LayerShape& shape,
                                std::span<const double> w) {
  const std::size_t cols = shape.cols();
  std::vector<double> m(shape.rows * cols);
  std::size_t coff = 0;
  for (const Segment& s : shape.segments) {
    for (std::size_t a = 0; a < shape.rows; ++a) {
      const double* src = w.data() + s.offset + a * s.cols;
      std::copy(src, src + s.cols, m.data() + a * cols + coff);
    }
    coff += s.cols;
  }
  return m;
}

void ScatterLayer(const LayerShape& shape, std::span<const double> m,
                  std::span<double> w) {
  const std::size_t cols = shape.cols();
  std::size_t coff = 0;
  for (const Segment& s : shape.segments) {
    for (std::size_t a = 0; a < shape.rows; ++a) {
      const double* src = m.data() + a * cols + coff;
      std::copy(src, src + s.cols, w.data() + s.offset + a * s.cols);
    }
    coff += s.cols;
  }
}

// Original flat index of layer matrix entry (a, j).
std::size_t FlatIndex(const LayerShape& shape, std::size_t a, std::size_t j) {
  for (const Segment& s : shape.segments) {
    if (j < s.cols) return s.offset + a * s.cols + j;
    j -= s.cols;
  }
  throw DomainError("column index out of range");
}

std::vector<double> Transpose(const std::vector<double>& q, std::size_t n) {
  std::vector<double> t(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t r = 0; r < n; ++r) t[r * n + a] = q[a * n + r];
  return t;
}

}  // namespace

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kRandomOrthonormal:
      return "random_orthonormal";
    case Strategy::kPermutation:
      return "permutation";
    case Strategy::kLayerCyclic:
      return "layer_cyclic";
    case Strategy::kHeadBody:
      return "head_body";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::kRandomOrthonormal, Strategy::kPermutation,
                     Strategy::kLayerCyclic, Strategy::kHeadBody}) {
    if (strategy_name(s) == name) return s;
  }
  throw DomainError("unknown block strategy: " + std::string(name));
}

std::size_t LayerShape::cols() const {
  std::size_t c = 0;
  for (const Segment& s : segments) c += s.cols;
  return c;
}

std::vector<LayerShape> contiguous_layers(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes) {
  std::vector<LayerShape> out;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    LayerShape shape;
    shape.name = "layer" + std::to_string(l);
    shape.rows = shapes[l].first;
    shape.segments.push_back({offset, shapes[l].second});
    offset += shapes[l].first * shapes[l].second;
    out.push_back(std::move(shape));
  }
  return out;
}

std::vector<double> random_orthonormal(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  // Work column-major internally: cols[r] is the r-th direction.
  std::vector<std::vector<double>> cols(n, std::vector<double>(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t r = 0; r < n; ++r) cols[r][a] = normal(rng);
  for (std::size_t r = 0; r < n; ++r) {
    std::span<double> v(cols[r]);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < r; ++i) {
        const double c = kernels::dot(cols[i], v);
        kernels::axpy(-c, cols[i], v);
      }
    }
    const double norm = kernels::norm2(v);
    if (!(norm > 1e-12)) throw NumericalError("degenerate Gaussian draw");
    kernels::scale(1.0 / norm, v);
  }
  std::vector<double> q(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t r = 0; r < n; ++r) q[a * n + r] = cols[r][a];
  return q;
}

BlockBasis::BlockBasis(Strategy strategy, std::uint64_t seed, int num_blocks,
                       std::vector<LayerFrame> layers)
    : strategy_(strategy),
      seed_(seed),
      num_blocks_(num_blocks),
      layers_(std::move(layers)) {
  if (num_blocks_ < 1) throw DomainError("number of blocks must be >= 1");
  if (layers_.empty()) throw DomainError("basis needs at least one layer");
  const auto k = static_cast<std::size_t>(num_blocks_);
  sizes_.assign(k, 0);
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const LayerFrame& f : layers_) {
    const LayerShape& s = f.shape;
    if (s.rows == 0 || s.segments.empty())
      throw DomainError("empty layer " + s.name);
    for (const Segment& seg : s.segments) {
      if (seg.cols == 0) throw DomainError("empty segment in " + s.name);
      spans.emplace_back(seg.offset, seg.offset + s.rows * seg.cols);
    }
    if (f.chunk_begin.size() != k + 1 || f.chunk_begin.front() != 0 ||
        f.chunk_begin.back() != s.size() ||
        !std::is_sorted(f.chunk_begin.begin(), f.chunk_begin.end()))
      throw FormatError("bad chunk layout in " + s.name);
    for (std::size_t i = 0; i < k; ++i)
      sizes_[i] += f.chunk_begin[i + 1] - f.chunk_begin[i];
    switch (f.rotation) {
      case Rotation::kDense:
        if (f.q.size() != s.rows * s.rows)
          throw FormatError("bad rotation size in " + s.name);
        break;
      case Rotation::kPermutation: {
        std::vector<std::size_t> sorted = f.perm;
        std::sort(sorted.begin(), sorted.end());
        bool ok = sorted.size() == s.rows;
        for (std::size_t i = 0; ok && i < sorted.size(); ++i)
          ok = sorted[i] == i;
        if (!ok) throw FormatError("bad permutation in " + s.name);
        break;
      }
      case Rotation::kIdentity:
        break;
    }
  }
  std::sort(spans.begin(), spans.end());
  for (const auto& [lo, hi] : spans) {
    if (lo != dim_) throw FormatError("layers do not tile the parameter vector");
    dim_ = hi;
  }
  for (std::size_t i = 0; i < k; ++i)
    if (sizes_[i] == 0) throw DomainError("empty block " + std::to_string(i));
  qt_.resize(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (layers_[l].rotation == Rotation::kDense)
      qt_[l] = Transpose(layers_[l].q, layers_[l].shape.rows);
  if (orthogonality_error() > 1e-10)
    throw NumericalError("rotation is not orthonormal");
}

bool BlockBasis::is_index_basis() const {
  return std::none_of(layers_.begin(), layers_.end(), [](const LayerFrame& f) {
    return f.rotation == Rotation::kDense;
  });
}

void BlockBasis::CheckBlock(int block) const {
  if (block < 0 || block >= num_blocks_)
    throw DomainError("block index out of range");
}

void BlockBasis::CheckDim(std::size_t n) const {
  if (n != dim_) throw DomainError("vector length does not match basis");
}

double BlockBasis::orthogonality_error() const {
  double err = 0.0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].rotation != Rotation::kDense) continue;
    const std::size_t n = layers_[l].shape.rows;
    const std::vector<double>& qt = qt_[l];
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = r; c < n; ++c) {
        const double g = kernels::dot({qt.data() + r * n, n},
                                      {qt.data() + c * n, n});
        err = std::max(err, std::abs(g - (r == c ? 1.0 : 0.0)));
      }
    }
  }
  return err;
}

std::vector<std::vector<double>> BlockBasis::decompose(
    std::span<const double> w) const {
  CheckDim(w.size());
  std::vector<std::vector<double>> out(num_blocks_);
  for (int i = 0; i < num_blocks_; ++i) out[i].reserve(sizes_[i]);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerFrame& f = layers_[l];
    const std::size_t rows = f.shape.rows;
    const std::size_t cols = f.shape.cols();
    std::vector<double> m = GatherLayer(f.shape, w);
    std::vector<double> b(m.size(), 0.0);
    switch (f.rotation) {
      case Rotation::kIdentity:
        b = std::move(m);
        break;
      case Rotation::kPermutation:
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(m.data() + f.perm[r] * cols, cols, b.data() + r * cols);
        break;
      case Rotation::kDense:
        for (std::size_t r = 0; r < rows; ++r)
          kernels::gemv_t(m, rows, cols, {qt_[l].data() + r * rows, rows},
                          {b.data() + r * cols, cols});
        break;
    }
    for (int i = 0; i < num_blocks_; ++i)
      out[i].insert(out[i].end(), b.begin() + f.chunk_begin[i],
                    b.begin() + f.chunk_begin[i + 1]);
  }
  return out;
}

std::vector<double> BlockBasis::reconstruct(
    const std::vector<std::vector<double>>& blocks) const {
  if (blocks.size() != static_cast<std::size_t>(num_blocks_))
    throw DomainError("wrong number of blocks");
  for (int i = 0; i < num_blocks_; ++i)
    if (blocks[i].size() != sizes_[i]) throw DomainError("wrong block size");
  std::vector<double> w(dim_, 0.0);
  std::vector<std::size_t> cursor(num_blocks_, 0);
  for (const LayerFrame& f : layers_) {
    const std::size_t rows = f.shape.rows;
    const std::size_t cols = f.shape.cols();
    std::vector<double> b(f.shape.size());
    for (int i = 0; i < num_blocks_; ++i) {
      const std::size_t n = f.chunk_begin[i + 1] - f.chunk_begin[i];
      std::copy_n(blocks[i].begin() + cursor[i], n,
                  b.begin() + f.chunk_begin[i]);
      cursor[i] += n;
    }
    std::vector<double> m(b.size(), 0.0);
    switch (f.rotation) {
      case Rotation::kIdentity:
        m = std::move(b);
        break;
      case Rotation::kPermutation:
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(b.data() + r * cols, cols, m.data() + f.perm[r] * cols);
        break;
      case Rotation::kDense:
        for (std::size_t a = 0; a < rows; ++a)
          kernels::gemv_t(b, rows, cols, {f.q.data() + a * rows, rows},
                          {m.data() + a * cols, cols});
        break;
    }
    ScatterLayer(f.shape, m, w);
  }
  return w;
}

std::vector<double> BlockBasis::block_coordinates(std::span<const double> w,
                                                  int block) const {
  CheckDim(w.size());
  CheckBlock(block);
  std::vector<double> out;
  out.reserve(sizes_[block]);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerFrame& f = layers_[l];
    const std::size_t lo = f.chunk_begin[block];
    const std::size_t hi = f.chunk_begin[block + 1];
    if (lo == hi) continue;
    const std::size_t rows = f.shape.rows;
    const std::size_t cols = f.shape.cols();
    if (f.rotation == Rotation::kDense) {
      const std::vector<double> m = GatherLayer(f.shape, w);
      const std::size_t r0 = lo / cols;
      const std::size_t r1 = (hi - 1) / cols;
      std::vector<double> rowbuf(cols);
      for (std::size_t r = r0; r <= r1; ++r) {
        std::fill(rowbuf.begin(), rowbuf.end(), 0.0);
        kernels::gemv_t(m, rows, cols, {qt_[l].data() + r * rows, rows},
                        rowbuf);
        const std::size_t j0 = r == r0 ? lo - r * cols : 0;
        const std::size_t j1 = r == r1 ? hi - r * cols : cols;
        out.insert(out.end(), rowbuf.begin() + j0, rowbuf.begin() + j1);
      }
    } else {
      for (std::size_t p = lo; p < hi; ++p) {
        const std::size_t r = p / cols;
        const std::size_t a = f.rotation == Rotation::kPermutation ? f.perm[r] : r;
        out.push_back(w[FlatIndex(f.shape, a, p % cols)]);
      }
    }
  }
  return out;
}

void BlockBasis::add_to_block(int block, std::span<const double> coeffs,
                              std::span<double> w, double alpha) const {
  CheckDim(w.size());
  CheckBlock(block);
  if (coeffs.size() != sizes_[block]) throw DomainError("wrong block size");
  std::size_t cursor = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerFrame& f = layers_[l];
    const std::size_t lo = f.chunk_begin[block];
    const std::size_t hi = f.chunk_begin[block + 1];
    if (lo == hi) continue;
    const std::size_t rows = f.shape.rows;
    const std::size_t cols = f.shape.cols();
    if (f.rotation == Rotation::kDense) {
      std::vector<double> m = GatherLayer(f.shape, w);
      const std::size_t r0 = lo / cols;
      const std::size_t r1 = (hi - 1) / cols;
      std::vector<double> delta(cols);
      std::vector<double> qcol(rows);
      for (std::size_t r = r0; r <= r1; ++r) {
        std::fill(delta.begin(), delta.end(), 0.0);
        const std::size_t j0 = r == r0 ? lo - r * cols : 0;
        const std::size_t j1 = r == r1 ? hi - r * cols : cols;
        for (std::size_t j = j0; j < j1; ++j) delta[j] = coeffs[cursor++];
        std::copy_n(qt_[l].data() + r * rows, rows, qcol.begin());
        kernels::ger(alpha, qcol, delta, m, rows, cols);
      }
      ScatterLayer(f.shape, m, w);
    } else {
      for (std::size_t p = lo; p < hi; ++p) {
        const std::size_t r = p / cols;
        const std::size_t a = f.rotation == Rotation::kPermutation ? f.perm[r] : r;
        w[FlatIndex(f.shape, a, p % cols)] += alpha * coeffs[cursor++];
      }
    }
  }
}

std::vector<std::size_t> BlockBasis::block_indices(int block) const {
  CheckBlock(block);
  if (!is_index_basis())
    throw DomainError("block indices are undefined for dense rotations");
  std::vector<std::size_t> out;
  out.reserve(sizes_[block]);
  for (const LayerFrame& f : layers_) {
    const std::size_t cols = f.shape.cols();
    for (std::size_t p = f.chunk_begin[block]; p < f.chunk_begin[block + 1];
         ++p) {
      const std::size_t r = p / cols;
      const std::size_t a = f.rotation == Rotation::kPermutation ? f.perm[r] : r;
      out.push_back(FlatIndex(f.shape, a, p % cols));
    }
  }
  return out;
}

BlockBasis build_basis(Strategy strategy, const std::vector<LayerShape>& layers,
                       int k, std::uint64_t seed, BasisOptions options) {
  if (k < 1) throw DomainError("number of blocks must be >= 1");
  if (layers.empty()) throw DomainError("basis needs at least one layer");
  const auto kk = static_cast<std::size_t>(k);
  std::size_t d = 0;
  for (const LayerShape& s : layers) d += s.size();
  if (kk > d) throw DomainError("more blocks than parameters");
  if (strategy == Strategy::kLayerCyclic && kk > layers.size())
    throw DomainError("layer_cyclic needs at least k layers");
  if (strategy == Strategy::kHeadBody) {
    if (k != 2) throw DomainError("head_body requires exactly 2 blocks");
    if (layers.size() < 2) throw DomainError("head_body needs >= 2 layers");
  }

  Rng rng = make_rng(seed, 0x5B5);
  std::vector<LayerFrame> frames;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerFrame f;
    f.shape = layers[l];
    const std::size_t n = f.shape.size();
    f.chunk_begin.assign(kk + 1, 0);
    switch (strategy) {
      case Strategy::kRandomOrthonormal:
      case Strategy::kPermutation: {
        if (strategy == Strategy::kRandomOrthonormal) {
          f.rotation = Rotation::kDense;
          f.q = random_orthonormal(f.shape.rows, rng);
        } else {
          f.rotation = Rotation::kPermutation;
          f.perm.resize(f.shape.rows);
          std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
          if (options.shuffle) std::shuffle(f.perm.begin(), f.perm.end(), rng);
        }
        // Global round-robin counts keep block sizes within one of each other.
        for (std::size_t i = 0; i < kk; ++i) {
          const std::size_t c =
              ResidueCount(offset + n, i, kk) - ResidueCount(offset, i, kk);
          f.chunk_begin[i + 1] = f.chunk_begin[i] + c;
        }
        break;
      }
      case Strategy::kLayerCyclic: {
        const std::size_t owner = l % kk;
        for (std::size_t i = owner + 1; i <= kk; ++i) f.chunk_begin[i] = n;
        break;
      }
      case Strategy::kHeadBody: {
        const std::size_t owner = l + 1 == layers.size() ? 0 : 1;
        for (std::size_t i = owner + 1; i <= kk; ++i) f.chunk_begin[i] = n;
        break;
      }
    }
    offset += n;
    frames.push_back(std::move(f));
  }
  return BlockBasis(strategy, seed, k, std::move(frames));
}

double GapVector::squared_norm() const {
  double s = 0.0;
  for (double v : z) s += v * v;
  return s;
}

GapVector gap(std::span<const double> w, std::span<const double> w_prime,
              const BlockBasis& basis) {
  if (w.size() != w_prime.size()) throw DomainError("length mismatch");
  std::vector<double> diff(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) diff[j] = w[j] - w_prime[j];
  GapVector g;
  for (const std::vector<double>& b : basis.decompose(diff))
    g.z.push_back(kernels::norm2(b));
  return g;
}

std::vector<double> sample_block_noise(const BlockBasis& basis, int block,
                                       double sigma2, Rng& rng) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
    throw DomainError("noise variance must be finite and >= 0");
  if (block < 0 || block >= basis.num_blocks())
    throw DomainError("block index out of range");
  std::vector<double> zeta(basis.sizes()[block], 0.0);
  if (sigma2 > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
    for (double& v : zeta) v = normal(rng);
  }
  std::vector<double> out(basis.dim(), 0.0);
  basis.add_to_block(block, zeta, out);
  return out;
}

}  // namespace bwu::subspace
