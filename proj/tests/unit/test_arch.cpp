// Copyright 2026 The archgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <chrono>
#include <set>

#include "archgen/architecture.hpp"
#include "archgen/corpus.hpp"
#include "archgen/errors.hpp"
#include "archgen/serialize.hpp"
#include "archgen/vocab.hpp"

namespace archgen {
namespace {

// Counts window placements directly instead of using the closed form.
int enumerate_windows(int size, int kernel, int stride, int pad_lo, int pad_hi, int dilation) {
  int count = 0;
  for (int start = -pad_lo;; start += stride) {
    const int last = start + dilation * (kernel - 1);
    if (last > size - 1 + pad_hi) break;
    ++count;
  }
  return count;
}

LayerDescriptor windowed(LayerCategory cat, Shape3 in, Pair2 k, Pair2 s, Padding4 p, int d) {
  LayerDescriptor l;
  l.category = cat;
  l.in_size = in;
  l.kernel = k;
  l.stride = s;
  l.padding = p;
  l.dilation = d;
  l.bias_used = false;
  if (cat == LayerCategory::kConv) {
    l.groups = 1;
    l.out_size = {5, 1, 1};
  } else {
    l.pool_type = PoolType::kMax;
    l.out_size = {in.c, 1, 1};
  }
  return l;
}

TEST(ShapeOracle, FullSmallParameterGrid) {
  int cases = 0, mismatches = 0;
  auto check = [&](const LayerDescriptor& l) {
    ++cases;
    const auto& k = *l.kernel;
    const auto& s = *l.stride;
    const auto& p = *l.padding;
    const int d = *l.dilation;
    const int h = enumerate_windows(l.in_size.h, k[0], s[0], p.top, p.bottom, d);
    const int w = enumerate_windows(l.in_size.w, k[1], s[1], p.left, p.right, d);
    if (h <= 0 || w <= 0) {
      try {
        infer_out_size(l);
        ++mismatches;
      } catch (const ShapeError&) {
      }
      return;
    }
    const Shape3 want{l.category == LayerCategory::kConv ? l.out_size.c : l.in_size.c, h, w};
    if (infer_out_size(l) != want) ++mismatches;
  };
  for (int size = 1; size <= 16; ++size)
    for (int k = 1; k <= 5; ++k)
      for (int s = 1; s <= 3; ++s)
        for (int d = 1; d <= 3; ++d) {
          // Width uses a different geometry from height to catch axis mix-ups.
          const int w_size = 17 - size, w_k = 6 - k, w_s = 4 - s;
          for (int lo = 0; lo <= 2; ++lo)
            for (int hi = 0; hi <= 2; ++hi) {
              check(windowed(LayerCategory::kConv, {3, size, w_size}, {k, w_k}, {s, w_s},
                             {lo, hi, hi, lo}, d));
              check(windowed(LayerCategory::kConv, {3, w_size, size}, {w_k, k}, {w_s, s},
                             {hi, lo, lo, hi}, d));
            }
          check(windowed(LayerCategory::kPool, {4, size, w_size}, {k, w_k}, {s, w_s}, {}, d));
          check(windowed(LayerCategory::kPool, {4, w_size, size}, {w_k, k}, {w_s, s}, {}, d));
        }
  EXPECT_GE(cases, 10000);
  EXPECT_EQ(mismatches, 0);
}

TEST(Layer, ConstructorsAndParamCounts) {
  const auto conv = make_conv({16, 8, 8}, 32, {3, 3}, {1, 1}, uniform_padding(1), 1, 1, true);
  EXPECT_EQ(conv.out_size, (Shape3{32, 8, 8}));
  EXPECT_EQ(layer_param_count(conv), 32 * 16 * 9 + 32);
  const auto grouped = make_conv({16, 8, 8}, 16, {3, 3}, {2, 2}, uniform_padding(1), 1, 4);
  EXPECT_EQ(grouped.out_size, (Shape3{16, 4, 4}));
  EXPECT_EQ(layer_param_count(grouped), 16 * 4 * 9);
  const auto pool = make_pool(PoolType::kAvg, {8, 9, 9}, {2, 2}, {2, 2});
  EXPECT_EQ(pool.out_size, (Shape3{8, 4, 4}));
  EXPECT_EQ(layer_param_count(pool), 0);
  const auto fc = make_fc({8, 4, 4}, 10);
  EXPECT_EQ(layer_param_count(fc), 128 * 10 + 10);
  EXPECT_EQ(layer_param_count(make_other("batchnorm", {24, 2, 2})), 48);
  EXPECT_EQ(make_other("flatten", {2, 3, 4}).out_size, (Shape3{24, 1, 1}));
  EXPECT_THROW(make_conv({6, 8, 8}, 8, {3, 3}, {1, 1}, {}, 1, 4), ShapeError);
  EXPECT_THROW(make_conv({3, 2, 2}, 8, {5, 5}, {1, 1}, {}), ShapeError);
}

TEST(Layer, CheckRejectsMissingOrForeignFields) {
  auto conv = make_conv({3, 8, 8}, 8, {3, 3}, {1, 1}, uniform_padding(1));
  conv.name = "relu";
  EXPECT_THROW(check_layer(conv), EncodingError);
  auto pool = make_pool(PoolType::kMax, {3, 8, 8}, {2, 2}, {2, 2});
  pool.padding = uniform_padding(1);
  EXPECT_THROW(check_layer(pool), ShapeError);
  auto relu = make_other("relu", {3, 8, 8});
  relu.kernel = Pair2{1, 1};
  EXPECT_THROW(check_layer(relu), EncodingError);
}

TEST(Layer, CanonicalKeyIgnoresIdAndHonoursMode) {
  auto a = make_conv({3, 32, 32}, 16, {3, 3}, {1, 1}, uniform_padding(1));
  auto b = a;
  b.id = 41;
  EXPECT_EQ(canonical_key(a), canonical_key(b));
  const auto c = make_conv({3, 16, 16}, 16, {3, 3}, {1, 1}, uniform_padding(1));
  EXPECT_NE(canonical_key(a), canonical_key(c));
  EXPECT_EQ(canonical_key(a, Canonicalization::kChannelsOnly), canonical_key(c, Canonicalization::kChannelsOnly));
}

TEST(Library, EveryKindInstantiatesAndMatchesItself) {
  const auto& lib = default_library();
  ASSERT_EQ(lib.size(), static_cast<std::size_t>(kLibrarySize));
  for (int i = 0; i < kLibrarySize; ++i) {
    const auto kind = kind_from_index(i);
    for (int width : {16, 32, 64}) {
      const Shape3 in{16, 8, 8};
      const auto block = lib.instantiate(kind, width, in);
      ASSERT_TRUE(block) << to_string(kind);
      EXPECT_EQ(block->kind, kind);
      EXPECT_EQ(block->in_size(), in);
      EXPECT_EQ(block->width, block->out_size().c);
      if (BlockLibrary::channel_preserving(kind)) EXPECT_EQ(block->width, in.c);
      else EXPECT_EQ(block->width, width);
      Shape3 s = in;
      for (const auto& l : block->layers) {
        EXPECT_EQ(l.in_size, s);
        EXPECT_EQ(infer_out_size(l), l.out_size);
        s = l.out_size;
      }
      EXPECT_EQ(lib.match(block->layers), kind) << to_string(kind);
    }
  }
}

TEST(Library, PoolsNeedTwoPixels) {
  const auto& lib = default_library();
  EXPECT_FALSE(lib.instantiate(BlockKind::kMaxpool, 16, {16, 1, 1}));
  EXPECT_FALSE(lib.instantiate(BlockKind::kAvgpool, 16, {16, 1, 4}));
  EXPECT_TRUE(lib.instantiate(BlockKind::kConv, 16, {16, 1, 1}));
}

TEST(Assemble, RepairsPoolsOnTinyInputs) {
  std::vector<BlockSpec> specs(12, BlockSpec{BlockKind::kMaxpool, 16});
  std::vector<RepairAction> repairs;
  const auto arch = assemble(specs, {3, 32, 32}, 10, &repairs);
  EXPECT_NO_THROW(validate(arch));
  EXPECT_FALSE(repairs.empty());
  EXPECT_EQ(arch.blocks.size(), 12u);
}

TEST(Validate, DetectsBrokenChainsAndBounds) {
  std::vector<BlockSpec> specs(10, BlockSpec{BlockKind::kConvNormActivation, 16});
  auto arch = assemble(specs, {3, 32, 32}, 10);
  EXPECT_NO_THROW(validate(arch));
  EXPECT_THROW(validate(arch, DepthBounds{11, 20}), ShapeError);
  auto broken = arch;
  broken.blocks[4].layers[0].in_size.c = 7;
  EXPECT_THROW(validate(broken), DataError);
  auto relabeled = arch;
  relabeled.blocks[2].kind = BlockKind::kBasicblock;
  EXPECT_THROW(validate(relabeled), EncodingError);
  auto headless = arch;
  headless.head = make_fc({5, 1, 1}, 10);
  EXPECT_THROW(validate(headless), ShapeError);
}

TEST(ArchitectureJson, RoundTrip) {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto arch = sample_architecture(rng, {});
    const auto back = architecture_from_json(Json::parse(architecture_to_json(arch).dump()));
    EXPECT_EQ(key_sequence(back), key_sequence(arch));
    EXPECT_EQ(back.kinds(), arch.kinds());
    EXPECT_EQ(architecture_hash(back), architecture_hash(arch));
    EXPECT_NO_THROW(validate(back));
  }
}

TEST(Encoding, RoundTripThousandArchitectures) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  std::vector<Architecture> archs;
  for (int i = 0; i < 1000; ++i) archs.push_back(sample_architecture(rng, {}));
  Vocabulary vocab;
  int mismatches = 0;
  for (const auto& a : archs) {
    const auto seq = encode_architecture(a, vocab);
    ASSERT_EQ(seq.boundaries.size(), a.blocks.size());
    const auto back = decode_architecture(seq, vocab, a.input_shape, a.num_classes);
    if (key_sequence(back) != key_sequence(a) || back.kinds() != a.kinds()) ++mismatches;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(mismatches, 0);
  EXPECT_LT(secs, 10.0);
}

TEST(Vocabulary, FrozenRejectsNewAndUnknownThrows) {
  Vocabulary v;
  const auto a = make_other("relu", {8, 4, 4});
  const auto b = make_other("relu", {8, 2, 2});
  const auto ta = v.add(a);
  EXPECT_EQ(ta, Vocabulary::kNumSpecial);
  EXPECT_EQ(v.add(a), ta);
  v.freeze();
  EXPECT_THROW(v.add(b), VocabError);
  EXPECT_THROW(v.token_of(b), UnknownLayerError);
  EXPECT_EQ(v.token_of(a), ta);
  EXPECT_TRUE(same_structure(v.prototype(ta), a));
}

TEST(Vocabulary, HashDependsOnContentsAndOrder) {
  Vocabulary a, b;
  const auto x = make_other("relu", {8, 4, 4});
  const auto y = make_other("batchnorm", {8, 4, 4});
  a.add(x);
  a.add(y);
  b.add(y);
  b.add(x);
  EXPECT_NE(a.hash(), b.hash());
  Vocabulary c;
  c.add(x);
  c.add(y);
  EXPECT_EQ(a.hash(), c.hash());
}

TEST(Architecture, HashDistinguishesWidths) {
  std::vector<BlockSpec> s(10, BlockSpec{BlockKind::kConv, 16});
  const auto a = assemble(s, {3, 32, 32}, 10);
  s[5].width = 32;
  const auto b = assemble(s, {3, 32, 32}, 10);
  EXPECT_NE(architecture_hash(a), architecture_hash(b));
  EXPECT_GT(param_count(b), 0);
}

}  // namespace
}  // namespace archgen
