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

// Orthogonal block decompositions of a flat parameter vector.
//
// Each layer is viewed as a rows x cols matrix M (weight columns followed by
// the bias column). A per-layer orthonormal rows x rows matrix Q (dense
// random, permutation, or identity) maps it to rotated coordinates B = Q^T M.
// The rotated entries of every layer, flattened row-major, are cut into k
// contiguous chunks; block i is the union of the i-th chunks. Stacking the
// corresponding columns of blockdiag(Q_l (x) I) gives A = [A_1 ... A_k] with
// A^T A = I, so W = sum_i A_i B_i uniquely.

#ifndef BWU_SUBSPACE_H_
#define BWU_SUBSPACE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwu/rng.h"

namespace bwu::subspace {

enum class Strategy { kRandomOrthonormal, kPermutation, kLayerCyclic, kHeadBody };

std::string_view strategy_name(Strategy strategy);
// Accepts the names returned by strategy_name(); DomainError otherwise.
Strategy parse_strategy(std::string_view name);

// rows x cols row-major tensor stored at `offset` of the flat vector.
struct Segment {
  std::size_t offset = 0;
  std::size_t cols = 0;
};

// A layer as seen by the basis: horizontal concatenation of segments that all
// share the same number of rows.
struct LayerShape {
  std::string name;
  std::size_t rows = 0;
  std::vector<Segment> segments;

  std::size_t cols() const;
  std::size_t size() const { return rows * cols(); }
};

// Plain contiguous rows x cols matrices laid out back to back.
std::vector<LayerShape> contiguous_layers(
    const std::vector<std::pair<std::size_t, std::size_t>>& shapes);

enum class Rotation { kIdentity, kPermutation, kDense };

struct LayerFrame {
  LayerShape shape;
  Rotation rotation = Rotation::kIdentity;
  // kDense: rows x rows row-major; column r is the r-th basis direction.
  std::vector<double> q;
  // kPermutation: rotated row r is original row perm[r].
  std::vector<std::size_t> perm;
  // k + 1 entries; block i owns rotated entries [chunk_begin[i],
  // chunk_begin[i+1]).
  std::vector<std::size_t> chunk_begin;
};

struct BasisOptions {
  // Permutation strategy only: false keeps the identity permutation.
  bool shuffle = true;
};

// Immutable after construction; safe to share across threads.
class BlockBasis {
 public:
  // Validates shapes, coverage, chunk layout and orthogonality.
  BlockBasis(Strategy strategy, std::uint64_t seed, int num_blocks,
             std::vector<LayerFrame> layers);

  Strategy strategy() const { return strategy_; }
  std::uint64_t seed() const { return seed_; }
  int num_blocks() const { return num_blocks_; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  const std::vector<LayerFrame>& layers() const { return layers_; }
  bool is_index_basis() const;

  // B_i = A_i^T w for every block.
  std::vector<std::vector<double>> decompose(std::span<const double> w) const;
  // sum_i A_i B_i.
  std::vector<double> reconstruct(
      const std::vector<std::vector<double>>& blocks) const;
  // A_i^T w for a single block.
  std::vector<double> block_coordinates(std::span<const double> w,
                                        int block) const;
  // w += alpha * A_i coeffs. Only coordinates of layers holding part of block
  // i are written; for index bases only the block's own coordinates are.
  void add_to_block(int block, std::span<const double> coeffs,
                    std::span<double> w, double alpha = 1.0) const;
  // Original coordinates of block i; DomainError for dense rotations.
  std::vector<std::size_t> block_indices(int block) const;
  // max |Q^T Q - I| over all layers.
  double orthogonality_error() const;

 private:
  void CheckBlock(int block) const;
  void CheckDim(std::size_t n) const;

  Strategy strategy_;
  std::uint64_t seed_;
  int num_blocks_;
  std::size_t dim_ = 0;
  std::vector<std::size_t> sizes_;
  std::vector<LayerFrame> layers_;
  // Cached Q^T per dense layer (empty otherwise).
  std::vector<std::vector<double>> qt_;
};

BlockBasis build_basis(Strategy strategy, const std::vector<LayerShape>& layers,
                       int k, std::uint64_t seed, BasisOptions options = {});

// Decomposition gap z_i = ||B_i - B_i'||.
struct GapVector {
  std::vector<double> z;
  double squared_norm() const;
};

GapVector gap(std::span<const double> w, std::span<const double> w_prime,
              const BlockBasis& basis);

// A_i zeta with zeta ~ N(0, sigma2 I_{r_i}); lies in span(A_i).
std::vector<double> sample_block_noise(const BlockBasis& basis, int block,
                                       double sigma2, Rng& rng);

// Orthonormal columns from a Gaussian n x n matrix by modified Gram-Schmidt
// with one reorthogonalisation pass. Row-major, column r = direction r.
std::vector<double> random_orthonormal(std::size_t n, Rng& rng);

}  // namespace bwu::subspace

#endif  // BWU_SUBSPACE_H_
