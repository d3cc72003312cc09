#pragma once

// Low-bit linear quantization of the final layer and its two's-complement
// bit-plane decomposition. Plane i carries weight 2^i, except the top plane
// which carries -2^(bits-1).

#include <cstdint>
#include <span>
#include <vector>

#include "ttc/ttir.hpp"

namespace ttc {

inline constexpr int kDefaultWeightBits = 4;

// [plane][class] integer partial sums.
using Partials = std::vector<std::vector<std::int64_t>>;

struct QuantLinear {
  int classes = 0;
  int features = 0;
  int bits = kDefaultWeightBits;
  double scale = 1.0;
  std::vector<std::int8_t> int_weights;           // [classes][features]
  std::vector<std::vector<std::uint8_t>> planes;  // [plane][classes * features]

  int planes_count() const { return bits; }
  int weight(int c, int f) const {
    return int_weights[static_cast<std::size_t>(c) * features + f];
  }
  std::uint8_t plane_bit(int plane, int c, int f) const {
    return planes[plane][static_cast<std::size_t>(c) * features + f];
  }
  bool operator==(const QuantLinear&) const = default;
};

// Signed weight of plane i in the two's-complement decomposition.
std::int64_t plane_weight(int plane, int bits);

// scale = max|w| / (2^(bits-1) - 1); ints rounded half away from zero and
// clamped to [-2^(bits-1), 2^(bits-1) - 1]. Throws DegenerateError when all
// weights are zero.
QuantLinear quantize_linear(const LinearLayerSpec& lin, int bits = kDefaultWeightBits);

// Builds planes from integer weights; used by quantize_linear and parsers.
QuantLinear from_int_weights(int classes, int features, int bits, double scale,
                             std::vector<std::int8_t> int_weights);

// Exact integer recombination: sum_i plane_weight(i) * partials[i][c].
std::vector<std::int64_t> recombine_integer(const Partials& partials);

// scale * recombine_integer(partials); the only floating-point step.
std::vector<double> recombine(const Partials& partials, double scale);

// Plane partial sums of a feature bit vector computed directly (no chunking).
Partials plane_partials(const QuantLinear& q, std::span<const std::uint8_t> features);

}  // namespace ttc
