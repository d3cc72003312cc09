#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP variant; both must produce bit-identical results.

#include <cstdint>
#include <span>
#include <vector>

#include "ttc/circuit.hpp"
#include "ttc/ltt.hpp"
#include "ttc/quant.hpp"

namespace ttc::kernels {

struct Enumeration {
  std::vector<std::uint8_t> bits;
  double min_abs_preactivation = 0.0;
};

// positions[k]: slot of truth-table input bit k in the full patch.
Enumeration enumerate_serial(const LTTBlockSpec& block, int out_channel,
                             std::span<const int> positions, int patch_size);
Enumeration enumerate_omp(const LTTBlockSpec& block, int out_channel,
                          std::span<const int> positions, int patch_size, int threads);

// Evaluates every LUT call and identity wire into `features`.
void lut_layer_serial(const Circuit& c, std::span<const std::uint8_t> input,
                      std::span<std::uint8_t> features);
void lut_layer_omp(const Circuit& c, std::span<const std::uint8_t> input,
                   std::span<std::uint8_t> features, int threads);

struct AccumulatorStats {
  std::int64_t max_chunk_sum = 0;
  std::uint64_t violations = 0;  // chunks whose sum exceeded the declared width
};

// Plane partial sums through the chunk plan; chunk sums within one
// (class, plane) are added sequentially.
Partials accumulate_serial(const Circuit& c, std::span<const std::uint8_t> features,
                           AccumulatorStats* stats);
Partials accumulate_omp(const Circuit& c, std::span<const std::uint8_t> features,
                        AccumulatorStats* stats, int threads);

}  // namespace ttc::kernels
