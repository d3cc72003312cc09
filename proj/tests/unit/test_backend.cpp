#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "ttc/backend.hpp"
#include "ttc/error.hpp"
#include "ttc/synth.hpp"

using namespace ttc;

TEST(Backend, StubLutApply) {
  StubBackend be;
  TruthTable t = TruthTable::from_bitstring("0110");
  const std::vector<std::uint8_t> bits = {1, 0};
  const auto ct = be.encode(bits);
  EXPECT_EQ(be.decode(be.lut_apply(t, ct)), 1);
  const std::vector<Ciphertext> one = {ct[0]};
  EXPECT_THROW(be.lut_apply(t, one), ShapeError);
  const auto counters = be.counters();
  EXPECT_EQ(counters.encoded_bits, 2u);
  EXPECT_EQ(counters.lut_calls_by_bitwidth.at(2), 1u);
}

TEST(Backend, PartialsMatchCleartext) {
  std::mt19937_64 rng(31);
  for (const std::string arch : {"adult", "cancer", "diabetes"}) {
    const Circuit c = compile(synth_model(arch, 4));
    StubBackend be;
    for (int r = 0; r < 5; ++r) {
      const auto x = oracle::random_bits(rng, c.input_bits());
      const auto enc = eval_backend(c, be, be.encode(x));
      const InferenceResult want = eval_cleartext(c, x);
      ASSERT_EQ(enc.planes.size(), want.partials.size());
      for (std::size_t p = 0; p < enc.planes.size(); ++p) {
        for (std::size_t k = 0; k < enc.planes[p].size(); ++k) {
          EXPECT_EQ(be.decode(enc.planes[p][k]), want.partials[p][k]);
        }
      }
    }
    EXPECT_EQ(be.counters().lut_calls_by_bitwidth.at(c.lut_calls[0].n), 5 * c.lut_calls.size());
  }
}

TEST(Backend, OverflowThrows) {
  ModelSpec m;
  m.input_shape = {1, 32, 1};
  m.front_end.kind = FrontEnd::Kind::PrecomputedBinary;
  m.heads.push_back(HeadSpec{IdentityHead{}, {}});
  m.linear = {1, 32, std::vector<double>(32, 1.0)};
  CompileOptions o;
  o.chunk_size = 16;
  o.raise_acc_bits = false;
  const Circuit c = compile(m, o);
  StubBackend be;
  const std::vector<std::uint8_t> ones(32, 1);
  EXPECT_THROW(eval_backend(c, be, be.encode(ones)), ConstraintViolation);
}
