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

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bwu/checkpoint.h"
#include "bwu/dataset.h"
#include "bwu/errors.h"
#include "bwu/model.h"

namespace bwu {
namespace {

std::string TempPath(const std::string& name) {
  return ::testing::TempDir() + "/bwu_io_" + name;
}

void PutBigEndian32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

void WriteFile(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Two 2x3 images with labels 7 and 0.
struct IdxFixture {
  std::string images;
  std::string labels;
  std::vector<unsigned char> pixels = {0, 1, 2, 127, 128, 255,
                                       255, 254, 3, 64, 32, 16};

  IdxFixture() {
    PutBigEndian32(images, 0x803);
    PutBigEndian32(images, 2);
    PutBigEndian32(images, 2);
    PutBigEndian32(images, 3);
    for (unsigned char p : pixels) images.push_back(static_cast<char>(p));
    PutBigEndian32(labels, 0x801);
    PutBigEndian32(labels, 2);
    labels.push_back(7);
    labels.push_back(0);
  }
};

TEST(Idx, FixtureRoundTripsExactly) {
  IdxFixture fx;
  WriteFile(TempPath("img"), fx.images);
  WriteFile(TempPath("lbl"), fx.labels);
  const Dataset d = load_idx(TempPath("img"), TempPath("lbl"));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.input_dim, 6u);
  EXPECT_EQ(d.num_classes, 10);
  EXPECT_EQ(d.labels, (std::vector<int>{7, 0}));
  EXPECT_EQ(d.ids, (std::vector<std::uint64_t>{0, 1}));
  for (std::size_t i = 0; i < fx.pixels.size(); ++i) {
    EXPECT_EQ(d.inputs[i], fx.pixels[i] / 255.0);
  }
  EXPECT_EQ(load_idx(TempPath("img"), TempPath("lbl"), 1).size(), 1u);
}

TEST(Idx, Errors) {
  IdxFixture fx;
  WriteFile(TempPath("img"), fx.images);
  WriteFile(TempPath("lbl"), fx.labels);

  WriteFile(TempPath("trunc"), fx.images.substr(0, fx.images.size() - 3));
  EXPECT_THROW(load_idx(TempPath("trunc"), TempPath("lbl")), FormatError);

  std::string bad_magic = fx.images;
  bad_magic[3] = 0x01;
  WriteFile(TempPath("magic"), bad_magic);
  EXPECT_THROW(load_idx(TempPath("magic"), TempPath("lbl")), FormatError);

  std::string bad_label = fx.labels;
  bad_label.back() = 10;
  WriteFile(TempPath("badlbl"), bad_label);
  EXPECT_THROW(load_idx(TempPath("img"), TempPath("badlbl")), FormatError);

  std::string one_label;
  PutBigEndian32(one_label, 0x801);
  PutBigEndian32(one_label, 1);
  one_label.push_back(3);
  WriteFile(TempPath("count"), one_label);
  EXPECT_THROW(load_idx(TempPath("img"), TempPath("count")), FormatError);

  EXPECT_THROW(load_idx(TempPath("missing"), TempPath("lbl")), Error);
}

TEST(Blobs, DeterministicAndBalanced) {
  const BlobsSpec spec{.n = 500, .dim = 8, .num_classes = 5, .separation = 2.0,
                       .seed = 3};
  const Dataset a = make_blobs(spec);
  const Dataset b = make_blobs(spec);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.labels, b.labels);
  std::vector<int> counts(5, 0);
  for (int y : a.labels) ++counts[y];
  for (int c : counts) EXPECT_EQ(c, 100);
  BlobsSpec other = spec;
  other.seed = 4;
  EXPECT_NE(make_blobs(other).inputs, a.inputs);
  a.validate();
}

TEST(Blobs, FreshSamplesShareMeans) {
  const BlobsSpec spec{.n = 4000, .dim = 4, .num_classes = 2, .separation = 5.0,
                       .seed = 9};
  const Dataset a = make_blobs(spec);
  const Dataset b = sample_blobs(spec, 4000, 77, 10000);
  EXPECT_EQ(b.ids.front(), 10000u);
  // Per-class means agree to sampling error (sd 1/sqrt(2000) per coordinate).
  for (int c = 0; c < 2; ++c) {
    for (std::size_t j = 0; j < 4; ++j) {
      double ma = 0.0, mb = 0.0;
      int na = 0, nb = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.labels[i] == c) { ma += a.row(i)[j]; ++na; }
        if (b.labels[i] == c) { mb += b.row(i)[j]; ++nb; }
      }
      EXPECT_NEAR(ma / na, mb / nb, 0.15);
    }
  }
}

TEST(Dataset, SubsetKeepsIds) {
  const Dataset a = make_blobs({.n = 20, .dim = 3, .num_classes = 2,
                                .separation = 1.0, .seed = 1});
  const std::vector<std::size_t> idx = {4, 2, 19};
  const Dataset s = a.subset(idx);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.ids, (std::vector<std::uint64_t>{a.ids[4], a.ids[2], a.ids[19]}));
  EXPECT_EQ(s.row(1)[2], a.row(2)[2]);
  Dataset bad = a;
  bad.labels[0] = 2;
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Checkpoint, StreamRoundTripIsExact) {
  const model::MlpSpec spec{{5, 7, 3}};
  const model::ParamVector p = model::init_params(spec, 12);
  std::stringstream buf;
  write_checkpoint(buf, p);
  const model::ParamVector q = read_checkpoint(buf);
  EXPECT_EQ(p.data(), q.data());
  ASSERT_EQ(q.layer_map().size(), p.layer_map().size());
  for (std::size_t i = 0; i < q.layer_map().size(); ++i) {
    EXPECT_EQ(q.layer_map()[i].name, p.layer_map()[i].name);
    EXPECT_EQ(q.layer_map()[i].shape, p.layer_map()[i].shape);
    EXPECT_EQ(q.layer_map()[i].offset, p.layer_map()[i].offset);
  }
}

TEST(Checkpoint, FileRoundTripAndErrors) {
  const model::MlpSpec spec{{2, 3, 2}};
  const model::ParamVector p = model::init_params(spec, 1);
  save_checkpoint(TempPath("ckpt"), p);
  EXPECT_EQ(load_checkpoint(TempPath("ckpt")).data(), p.data());

  std::stringstream buf;
  write_checkpoint(buf, p);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "BWUCKPT1");

  auto read = [](const std::string& s) {
    std::stringstream in(s);
    return read_checkpoint(in);
  };
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(read(bad), FormatError);
  EXPECT_THROW(read(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(read(bytes + "x"), FormatError);
  bad = bytes;
  bad[8] = 2;  // version
  EXPECT_THROW(read(bad), FormatError);
  EXPECT_THROW(load_checkpoint(TempPath("does_not_exist")), Error);
}

}  // namespace
}  // namespace bwu
