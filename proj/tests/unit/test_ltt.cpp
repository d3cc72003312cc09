#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "oracle.hpp"
#include "ttc/error.hpp"
#include "ttc/ltt.hpp"
#include "ttc/synth.hpp"

using namespace ttc;

namespace {

const LTTBlockSpec& and_block() {
  static const LTTBlockSpec b = [] {
    std::ifstream in(std::string(TTC_SOURCE_DIR) + "/models/and_block.json");
    const std::string text{std::istreambuf_iterator<char>(in), {}};
    return parse_model(text).heads.at(0).block();
  }();
  return b;
}

LTTBlockSpec stacked_block(std::uint64_t seed) {
  BlockShape s;
  s.dims = 1;
  s.hidden_channels = 4;
  s.kernel = {4, 1};
  s.stride = {2, 1};
  s.kernel2 = {2, 1};
  std::mt19937_64 rng(seed);
  LTTBlockSpec b = random_block(s, rng);
  b.layer2.stride = {2, 1};
  return b;
}

// Table index -> full patch via patch_positions, then the oracle's
// whole-tensor forward on exactly that window.
// Padding only matters when patches slide over a larger input.
std::uint8_t oracle_bit(LTTBlockSpec b, int channel, std::uint32_t index) {
  b.layer1.padding = 0;
  const ComposedWindow w = compose_window(b);
  const InputShape in{b.layer1.in_channels, w.window.h, w.window.w};
  const PatchGeometry g = receptive_field(b, in);
  const auto pos = patch_positions(g, g.channels.set_of_channel[channel]);
  std::vector<std::uint8_t> x(in.size(), 0);
  for (std::size_t i = 0; i < pos.size(); ++i) x[pos[i]] = (index >> i) & 1u;
  const auto out = oracle::block_forward(b, in, x);
  EXPECT_EQ(out.h * out.w, 1);
  return out.bits[channel];
}

}  // namespace

TEST(Ltt, SeluMatchesDefinition) {
  EXPECT_DOUBLE_EQ(selu(0.0), 0.0);
  EXPECT_DOUBLE_EQ(selu(2.0), kSeluLambda * 2.0);
  EXPECT_NEAR(selu(-1.0), kSeluLambda * kSeluAlpha * (std::exp(-1.0) - 1.0), 1e-15);
}

TEST(Ltt, BinActOfZeroIsOne) {
  EXPECT_EQ(bin_act(0.0), 1);
  EXPECT_EQ(bin_act(-0.0), 1);
  EXPECT_EQ(bin_act(-1e-300), 0);
  EXPECT_EQ(bin_act(1e-300), 1);
}

TEST(Ltt, AndBlockTable) {
  const TruthTable t = extract_truth_table(and_block(), 0);
  EXPECT_EQ(t.n, 2);
  EXPECT_EQ(t.bits, (std::vector<std::uint8_t>{0, 0, 0, 1}));
  EXPECT_EQ(t.to_bitstring(), "0001");
  EXPECT_FALSE(t.unstable);
}

TEST(Ltt, ZeroPreactivationMapsToOneAndIsFlagged) {
  LTTBlockSpec b = and_block();
  // selu(1) exactly at the bn2 mean: input (1,0) and (0,1) sit on the boundary.
  b.bn2.running_mean[0] = selu(1.0);
  const TruthTable t = extract_truth_table(b, 0);
  EXPECT_EQ(t.bits, (std::vector<std::uint8_t>{0, 1, 1, 1}));
  EXPECT_TRUE(t.unstable);
}

TEST(Ltt, StackedStridedReceptiveField) {
  const LTTBlockSpec b = stacked_block(1);
  EXPECT_EQ(receptive_bits(b), 6);
  const PatchGeometry g = receptive_field(b, {1, 6, 1});
  EXPECT_EQ(g.n, 6);
  EXPECT_EQ(g.patch_count(), 1);
  EXPECT_EQ(extract_truth_table(b, 0).size(), 64u);
}

TEST(Ltt, AdultReceptiveField) {
  const ModelSpec m = synth_model("adult", 3);
  const PatchGeometry g = receptive_field(m.heads[0].block(), m.input_shape);
  EXPECT_EQ(g.n, 5);
  EXPECT_EQ(g.patch_count(), 4);
  // Patches start every 4 bits: 0..4, 4..8, 8..12, 12..16.
  for (int p = 0; p < 4; ++p) {
    const auto w = g.wires(p, 0);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(w[k], 4 * p + k);
  }
}

TEST(Ltt, PaddingWiresAreZero) {
  BlockShape s;
  s.dims = 1;
  s.kernel = {3, 1};
  s.padding = 1;
  std::mt19937_64 rng(2);
  const LTTBlockSpec b = random_block(s, rng);
  const PatchGeometry g = receptive_field(b, {1, 4, 1});
  EXPECT_EQ(g.patch_count(), 4);
  EXPECT_EQ(g.wires(0, 0)[0], kZeroWire);
  EXPECT_EQ(g.wires(3, 0)[2], kZeroWire);
  EXPECT_EQ(g.wires(1, 0)[0], 0);
}

TEST(Ltt, DepthwiseChannelSets) {
  BlockShape s;
  s.in_channels = 3;
  s.hidden_channels = 12;
  s.out_channels = 3;
  s.groups = 3;
  s.kernel = {2, 2};
  std::mt19937_64 rng(4);
  const LTTBlockSpec b = random_block(s, rng);
  const ChannelSets cs = channel_sets(b);
  ASSERT_EQ(cs.sets.size(), 3u);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(cs.sets[c], std::vector<int>{c});
    EXPECT_EQ(cs.set_of_channel[c], c);
  }
  EXPECT_EQ(receptive_bits(b), 4);
}

TEST(Ltt, TablesMatchOracleForward) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 5;
    const LTTBlockSpec b = oracle::random_block_with_n(rng, n, 1 + trial % 2, 1 + trial % 2);
    for (int ch = 0; ch < b.out_channels(); ++ch) {
      const TruthTable t = extract_truth_table(b, ch);
      ASSERT_EQ(t.n, n);
      for (std::uint32_t i = 0; i < t.size(); ++i) {
        ASSERT_EQ(t(i), oracle_bit(b, ch, i)) << "trial " << trial << " ch " << ch << " idx " << i;
      }
    }
  }
}

TEST(Ltt, SerialAndParallelEnumerationAgree) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const LTTBlockSpec b = oracle::random_block_with_n(rng, 8 + trial % 3, 1, 2);
    for (int threads : {1, 3, 0}) {
      ExtractOptions par{threads, true};
      ExtractOptions ser{0, false};
      const TruthTable a = extract_truth_table(b, 0, par);
      const TruthTable c = extract_truth_table(b, 0, ser);
      EXPECT_EQ(a, c);
      EXPECT_EQ(a.unstable, c.unstable);
    }
  }
}

TEST(Ltt, EvaluateChecksPatchLength) {
  const std::vector<std::uint8_t> three = {1, 0, 1};
  EXPECT_THROW(ltt_evaluate(and_block(), three), ShapeError);
}

TEST(Ltt, ChannelPreactivationMatchesFullForward) {
  std::mt19937_64 rng(5);
  const LTTBlockSpec b = oracle::random_block_with_n(rng, 6, 2, 2);
  const int ps = b.layer1.in_channels * compose_window(b).window.area();
  for (int r = 0; r < 20; ++r) {
    const auto patch = oracle::random_bits(rng, ps);
    const BlockEvaluation e = ltt_evaluate(b, patch);
    for (int j = 0; j < b.out_channels(); ++j) {
      EXPECT_DOUBLE_EQ(ltt_channel_preactivation(b, patch, j), e.pre_activation[j]);
    }
  }
}

TEST(Ltt, BitstringRoundTrip) {
  std::mt19937_64 rng(6);
  for (int n = 1; n <= 10; ++n) {
    TruthTable t;
    t.n = n;
    t.bits = oracle::random_bits(rng, std::size_t{1} << n);
    EXPECT_EQ(TruthTable::from_bitstring(t.to_bitstring()), t);
  }
  EXPECT_THROW(TruthTable::from_bitstring("010"), SchemaError);
  EXPECT_THROW(TruthTable::from_bitstring("01x1"), SchemaError);
  EXPECT_THROW(TruthTable::from_bitstring(""), SchemaError);
}

TEST(Ltt, RejectsMoreThanSixteenBits) {
  BlockShape s;
  s.dims = 1;
  s.kernel = {17, 1};
  std::mt19937_64 rng(1);
  const LTTBlockSpec b = random_block(s, rng);
  EXPECT_THROW(extract_truth_table(b, 0), ConstraintError);
  EXPECT_THROW(receptive_field(b, {1, 20, 1}), ConstraintError);
}

TEST(Ltt, WideTableWarning) {
  EXPECT_TRUE(bitwidth_warning(8).empty());
  EXPECT_FALSE(bitwidth_warning(9).empty());
}
