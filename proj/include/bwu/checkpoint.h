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

// Binary parameter checkpoints.
//
// Layout (little-endian):
//   char[8]  magic "BWUCKPT1"
//   u32      format version
//   u64      d
//   u32      number of layer entries
//   per entry: u32 name length, name bytes, u32 rank, u64 dims[rank],
//              u64 offset
//   f64[d]   payload

#ifndef BWU_CHECKPOINT_H_
#define BWU_CHECKPOINT_H_

#include <iosfwd>
#include <string>

#include "bwu/model.h"

namespace bwu {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const model::ParamVector& params);
// FormatError on bad magic, unknown version, truncation or trailing bytes.
model::ParamVector read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const model::ParamVector& params);
model::ParamVector load_checkpoint(const std::string& path);

}  // namespace bwu

#endif  // BWU_CHECKPOINT_H_
