#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracle.hpp"
#include "ttc/error.hpp"
#include "ttc/quant.hpp"

using namespace ttc;

namespace {

LinearLayerSpec lin_of(int classes, int features, std::vector<double> w) {
  return {classes, features, std::move(w)};
}

}  // namespace

TEST(Quant, PlaneWeights) {
  EXPECT_EQ(plane_weight(0, 4), 1);
  EXPECT_EQ(plane_weight(2, 4), 4);
  EXPECT_EQ(plane_weight(3, 4), -8);
  EXPECT_EQ(plane_weight(7, 8), -128);
}

TEST(Quant, ScaleAndRounding) {
  // max|w| = 7 -> scale 1, so ints are the rounded weights.
  const auto q = quantize_linear(lin_of(1, 6, {7.0, 2.5, -2.5, 0.49, -0.5, -7.0}));
  EXPECT_DOUBLE_EQ(q.scale, 1.0);
  EXPECT_EQ(q.int_weights, (std::vector<std::int8_t>{7, 3, -3, 0, -1, -7}));
}

TEST(Quant, IntsStayInRange) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> w(40);
    for (double& v : w) v = g(rng);
    const auto q = quantize_linear(lin_of(4, 10, w));
    for (int v : q.int_weights) {
      EXPECT_GE(v, -8);
      EXPECT_LE(v, 7);
    }
  }
}

TEST(Quant, MatchesOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> w(15);
    for (double& v : w) v = u(rng);
    const LinearLayerSpec lin = lin_of(3, 5, w);
    const auto q = quantize_linear(lin);
    EXPECT_DOUBLE_EQ(q.scale, oracle::scale_4bit(lin));
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_EQ(q.int_weights[i], oracle::quantize_4bit(w[i], q.scale));
    }
  }
}

TEST(Quant, AllZeroIsDegenerate) {
  EXPECT_THROW(quantize_linear(lin_of(2, 2, {0, 0, 0, 0})), DegenerateError);
}

TEST(Quant, PlanesAreTwosComplement) {
  const auto q = from_int_weights(1, 16, 4, 1.0, {-8, -7, -6, -5, -4, -3, -2, -1,
                                                  0, 1, 2, 3, 4, 5, 6, 7});
  for (int f = 0; f < 16; ++f) {
    std::int64_t v = 0;
    for (int p = 0; p < 4; ++p) v += plane_weight(p, 4) * q.plane_bit(p, 0, f);
    EXPECT_EQ(v, q.weight(0, f));
  }
  EXPECT_THROW(from_int_weights(1, 1, 1, 1.0, {0}), InvariantError);
  EXPECT_THROW(from_int_weights(1, 1, 4, 1.0, {8}), InvariantError);
}

TEST(Quant, RecombinationIsExact) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> wi(-8, 7);
  for (int t = 0; t < 1000; ++t) {
    const int classes = 1 + t % 5;
    const int features = 1 + (t * 7) % 60;
    std::vector<std::int8_t> w(static_cast<std::size_t>(classes) * features);
    for (auto& v : w) v = static_cast<std::int8_t>(wi(rng));
    const auto q = from_int_weights(classes, features, 4, 0.25, w);
    const auto f = oracle::random_bits(rng, features);
    const auto got = recombine_integer(plane_partials(q, f));
    for (int c = 0; c < classes; ++c) {
      std::int64_t want = 0;
      for (int i = 0; i < features; ++i) want += q.weight(c, i) * f[i];
      ASSERT_EQ(got[c], want);
    }
  }
}

TEST(Quant, RecombineScales) {
  const Partials p = {{1, 0}, {0, 1}, {0, 0}, {1, 0}};  // class0: 1-8, class1: 2
  EXPECT_EQ(recombine_integer(p), (std::vector<std::int64_t>{-7, 2}));
  EXPECT_EQ(recombine(p, 0.5), (std::vector<double>{-3.5, 1.0}));
}

TEST(Quant, ReconstructionErrorBound) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> w(24);
    for (double& v : w) v = g(rng);
    const auto q = quantize_linear(lin_of(3, 8, w));
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double err = std::abs(q.int_weights[i] * q.scale - w[i]);
      const double mag = std::max(std::abs(w[i]), q.scale);
      EXPECT_LE(err, q.scale / 2 + (std::nextafter(mag, 1e300) - mag));
    }
  }
}

TEST(Quant, DequantizedScoreBound) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 200; ++t) {
    const int classes = 3, features = 20;
    std::vector<double> w(classes * features);
    for (double& v : w) v = g(rng);
    const auto lin = lin_of(classes, features, w);
    const auto q = quantize_linear(lin);
    std::vector<std::uint8_t> x(features);
    for (auto& b : x) b = coin(rng);
    const auto scores = recombine(plane_partials(q, x), q.scale);
    for (int c = 0; c < classes; ++c) {
      double ref = 0.0;
      for (int f = 0; f < features; ++f) ref += lin.at(c, f) * x[f];
      EXPECT_LE(std::abs(scores[c] - ref), q.scale * features / 2 + 1e-12);
    }
  }
}
