#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "oracle.hpp"
#include "ttc/error.hpp"
#include "ttc/ltt.hpp"
#include "ttc/synth.hpp"
#include "ttc/ttir.hpp"

using namespace ttc;

namespace {

std::string read(const std::string& rel) {
  std::ifstream in(std::string(TTC_SOURCE_DIR) + "/" + rel);
  return {std::istreambuf_iterator<char>(in), {}};
}

LTTBlockSpec stacked_block() {
  BlockShape s;
  s.dims = 1;
  s.in_channels = 1;
  s.hidden_channels = 4;
  s.out_channels = 1;
  s.kernel = {4, 1};
  s.stride = {2, 1};
  s.kernel2 = {2, 1};
  std::mt19937_64 rng(7);
  LTTBlockSpec b = random_block(s, rng);
  b.layer2.stride = {2, 1};
  return b;
}

template <class E>
std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const E& e) {
    return e.field();
  }
  return "<no throw>";
}

}  // namespace

TEST(Ttir, ComposedWindowOfStackedLayers) {
  const ComposedWindow w = compose_window(stacked_block());
  EXPECT_EQ(w.window, (Extent2{6, 1}));
  EXPECT_EQ(w.stride, (Extent2{4, 1}));
}

TEST(Ttir, ParseSerializeRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const ModelSpec m = oracle::random_model(rng);
    const ModelSpec back = parse_model(serialize_model(m));
    EXPECT_EQ(back, m);
  }
}

TEST(Ttir, ShippedModelsParse) {
  const ModelSpec x = parse_model(read("models/toy_xor.json"));
  EXPECT_EQ(x.heads.size(), 2u);
  EXPECT_TRUE(x.heads[0].is_identity());
  EXPECT_EQ(x.linear.features, 3);
  EXPECT_EQ(x.input_shape, (InputShape{1, 2, 1}));
}

TEST(Ttir, SecondLayerKernelMustBeOne) {
  ModelSpec m = synth_model("adult", 1);
  auto& b = std::get<LTTBlockSpec>(m.heads[0].body);
  b.layer2.kernel = {2, 1};
  b.layer2.weights.resize(b.layer2.expected_weight_count(), 0.5);
  EXPECT_EQ(field_of<InvariantError>([&] { validate_model(m); }), "heads[0].layer2.kernel");
}

TEST(Ttir, WeightCountMismatchNamesField) {
  ModelSpec m = synth_model("cancer", 1);
  std::get<LTTBlockSpec>(m.heads[0].body).layer1.weights.pop_back();
  EXPECT_EQ(field_of<InvariantError>([&] { validate_model(m); }), "heads[0].layer1.weights");
}

TEST(Ttir, GroupsMustDivideChannels) {
  ModelSpec m = synth_model("mnist_vgg1b_tt", 1);
  std::get<LTTBlockSpec>(m.heads[0].body).layer1.groups = 5;
  EXPECT_EQ(field_of<InvariantError>([&] { validate_model(m); }), "heads[0].layer1.groups");
}

TEST(Ttir, LinearFeaturesMustMatchHeads) {
  ModelSpec m = synth_model("cancer", 1);
  m.linear.features += 1;
  m.linear.weights.resize(static_cast<std::size_t>(m.linear.classes) * m.linear.features, 0.1);
  EXPECT_EQ(field_of<InvariantError>([&] { validate_model(m); }), "linear.features");
}

TEST(Ttir, ShuffleMustBePermutation) {
  ModelSpec m = synth_model("cancer", 1);
  m.heads[0].shuffle = {0, 0, 1, 2};
  EXPECT_EQ(field_of<InvariantError>([&] { validate_model(m); }), "heads[0].shuffle");
}

TEST(Ttir, WideReceptiveFieldIsConstraintError) {
  // 17 input bits per output channel.
  BlockShape s;
  s.dims = 1;
  s.kernel = {17, 1};
  s.hidden_channels = 2;
  std::mt19937_64 rng(1);
  ModelSpec m;
  m.input_shape = {1, 20, 1};
  HeadSpec h;
  h.body = random_block(s, rng);
  m.heads.push_back(h);
  m.linear = random_linear(2, total_head_features(m), 0, rng);
  try {
    validate_model(m);
    FAIL() << "expected ConstraintError";
  } catch (const ConstraintError& e) {
    EXPECT_EQ(e.field(), "heads[0]");
    EXPECT_NE(std::string(e.what()).find("16-bit"), std::string::npos);
  }
}

TEST(Ttir, ParseErrorsNameTheField) {
  auto field = [](const std::string& text) {
    return field_of<SchemaError>([&] { parse_model(text); });
  };
  EXPECT_EQ(field("{"), "model");
  EXPECT_EQ(field(R"({"front_end":{"kind":"binarize"},"heads":[],"linear":{}})"), "model.input_shape");
  EXPECT_EQ(field(R"({"input_shape":2,"front_end":{"kind":"magic"},"heads":[],"linear":{}})"),
            "front_end.kind");
  EXPECT_EQ(field(R"({"input_shape":2,"front_end":{"kind":"binarize"},"heads":[{"kind":"conv"}],"linear":{}})"),
            "heads[0].kind");
}

TEST(Ttir, FrontEndThresholdCount) {
  ModelSpec m = synth_model("adult", 2);
  m.front_end.thresholds.pop_back();
  EXPECT_EQ(field_of<InvariantError>([&] { validate_model(m); }), "front_end.thresholds");
}

TEST(Ttir, BinarizeUsesStepWithZeroAsOne) {
  FrontEnd fe;
  fe.thresholds = {0.5, 0.5, 0.0};
  const std::vector<double> x = {0.5, 0.49, -0.0};
  EXPECT_EQ(binarize_input(fe, x), (std::vector<std::uint8_t>{1, 0, 1}));
  FrontEnd zero;
  const std::vector<double> y = {-1.0, 0.0, 2.0};
  EXPECT_EQ(binarize_input(zero, y), (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(Ttir, HeadShapeOfReferenceModels) {
  EXPECT_EQ(total_head_features(synth_model("mnist_fullpr", 1)), 1600);
  EXPECT_EQ(total_head_features(synth_model("mnist_vgg1b_tt", 1)), 576);
  EXPECT_EQ(total_head_features(synth_model("mnist_vgg1l_tt", 1)), 1176);
  const ModelSpec adult = synth_model("adult", 1);
  EXPECT_EQ(head_shape(adult.heads[0], adult.input_shape).patch_count(), 4);
}
