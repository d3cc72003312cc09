#include "ttc/quant.hpp"

#include <algorithm>
#include <cmath>

#include "ttc/error.hpp"

namespace ttc {

std::int64_t plane_weight(int plane, int bits) {
  const std::int64_t w = std::int64_t{1} << plane;
  return plane == bits - 1 ? -w : w;
}

QuantLinear from_int_weights(int classes, int features, int bits, double scale,
                             std::vector<std::int8_t> int_weights) {
  if (bits < 2 || bits > 8) throw InvariantError("weight_bits", "must be in [2, 8]");
  if (int_weights.size() != static_cast<std::size_t>(classes) * features) {
    throw InvariantError("int_weights", "expected classes * features values");
  }
  const int lo = -(1 << (bits - 1));
  const int hi = (1 << (bits - 1)) - 1;
  QuantLinear q;
  q.classes = classes;
  q.features = features;
  q.bits = bits;
  q.scale = scale;
  q.planes.assign(bits, std::vector<std::uint8_t>(int_weights.size(), 0));
  const unsigned mask = (1u << bits) - 1u;
  for (std::size_t k = 0; k < int_weights.size(); ++k) {
    const int w = int_weights[k];
    if (w < lo || w > hi) {
      throw InvariantError("int_weights[" + std::to_string(k) + "]",
                           "value " + std::to_string(w) + " outside the " +
                               std::to_string(bits) + "-bit range");
    }
    const unsigned u = static_cast<unsigned>(w) & mask;
    for (int i = 0; i < bits; ++i) q.planes[i][k] = (u >> i) & 1u;
  }
  q.int_weights = std::move(int_weights);
  return q;
}

QuantLinear quantize_linear(const LinearLayerSpec& lin, int bits) {
  if (bits < 2 || bits > 8) throw InvariantError("weight_bits", "must be in [2, 8]");
  double max_abs = 0.0;
  for (double w : lin.weights) max_abs = std::max(max_abs, std::abs(w));
  if (max_abs == 0.0) throw DegenerateError("linear.weights", "all weights are zero");

  const int hi = (1 << (bits - 1)) - 1;
  const int lo = -(1 << (bits - 1));
  const double scale = max_abs / hi;
  std::vector<std::int8_t> ints(lin.weights.size());
  for (std::size_t k = 0; k < ints.size(); ++k) {
    const double r = std::round(lin.weights[k] / scale);  // half away from zero
    ints[k] = static_cast<std::int8_t>(std::clamp(static_cast<int>(r), lo, hi));
  }
  return from_int_weights(lin.classes, lin.features, bits, scale, std::move(ints));
}

std::vector<std::int64_t> recombine_integer(const Partials& partials) {
  if (partials.empty()) return {};
  const int bits = static_cast<int>(partials.size());
  const std::size_t classes = partials.front().size();
  std::vector<std::int64_t> out(classes, 0);
  for (int i = 0; i < bits; ++i) {
    if (partials[i].size() != classes) {
      throw ShapeError("partials[" + std::to_string(i) + "]", "class count differs between planes");
    }
    for (std::size_t c = 0; c < classes; ++c) out[c] += plane_weight(i, bits) * partials[i][c];
  }
  return out;
}

std::vector<double> recombine(const Partials& partials, double scale) {
  const auto ints = recombine_integer(partials);
  std::vector<double> out(ints.size());
  for (std::size_t c = 0; c < ints.size(); ++c) out[c] = scale * static_cast<double>(ints[c]);
  return out;
}

Partials plane_partials(const QuantLinear& q, std::span<const std::uint8_t> features) {
  if (features.size() != static_cast<std::size_t>(q.features)) {
    throw ShapeError("features", "expected " + std::to_string(q.features) + " values, got " +
                                     std::to_string(features.size()));
  }
  Partials p(q.bits, std::vector<std::int64_t>(q.classes, 0));
  for (int i = 0; i < q.bits; ++i) {
    for (int c = 0; c < q.classes; ++c) {
      std::int64_t s = 0;
      for (int f = 0; f < q.features; ++f) s += q.plane_bit(i, c, f) & features[f];
      p[i][c] = s;
    }
  }
  return p;
}

}  // namespace ttc
