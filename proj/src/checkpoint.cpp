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

#include "bwu/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "bwu/errors.h"

namespace bwu {
namespace {

constexpr char kMagic[8] = {'B', 'W', 'U', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint64_t kMaxRank = 8;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw FormatError("truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const model::ParamVector& params) {
  out.write(kMagic, sizeof(kMagic));
  Put<std::uint32_t>(out, kCheckpointVersion);
  Put<std::uint64_t>(out, params.size());
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(params.layer_map().size()));
  for (const model::LayerEntry& e : params.layer_map()) {
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t s : e.shape) Put<std::uint64_t>(out, s);
    Put<std::uint64_t>(out, e.offset);
  }
  out.write(reinterpret_cast<const char*>(params.data().data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw FormatError("checkpoint write failed");
}

model::ParamVector read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw FormatError("bad checkpoint magic");
  const auto version = Get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  const auto d = Get<std::uint64_t>(in);
  const auto entries = Get<std::uint32_t>(in);
  model::LayerMap map;
  for (std::uint32_t i = 0; i < entries; ++i) {
    model::LayerEntry e;
    const auto len = Get<std::uint32_t>(in);
    if (len > 4096) throw FormatError("layer name too long");
    e.name.resize(len);
    if (!in.read(e.name.data(), len)) throw FormatError("truncated checkpoint");
    const auto rank = Get<std::uint32_t>(in);
    if (rank > kMaxRank) throw FormatError("layer rank too large");
    for (std::uint32_t r = 0; r < rank; ++r)
      e.shape.push_back(Get<std::uint64_t>(in));
    e.offset = Get<std::uint64_t>(in);
    map.push_back(std::move(e));
  }
  if (d > (std::uint64_t{1} << 34)) throw FormatError("implausible size");
  std::vector<double> values(d);
  if (!in.read(reinterpret_cast<char*>(values.data()),
               static_cast<std::streamsize>(d * sizeof(double))))
    throw FormatError("truncated checkpoint payload");
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after checkpoint payload");
  try {
    return model::ParamVector(std::move(values), std::move(map));
  } catch (const DomainError& e) {
    throw FormatError(std::string("inconsistent layer map: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const model::ParamVector& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_checkpoint(out, params);
}

model::ParamVector load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace bwu
