#include <algorithm>
#include <cmath>
#include <limits>

#include "ttc/kernels.hpp"

namespace ttc::kernels {

Enumeration enumerate_serial(const LTTBlockSpec& block, int out_channel,
                             std::span<const int> positions, int patch_size) {
  const int n = static_cast<int>(positions.size());
  const std::uint32_t entries = std::uint32_t{1} << n;
  Enumeration e;
  e.bits.resize(entries);
  e.min_abs_preactivation = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> patch(patch_size, 0);
  for (std::uint32_t k = 0; k < entries; ++k) {
    for (int i = 0; i < n; ++i) patch[positions[i]] = (k >> i) & 1u;
    const double pre = ltt_channel_preactivation(block, patch, out_channel);
    e.bits[k] = bin_act(pre);
    e.min_abs_preactivation = std::min(e.min_abs_preactivation, std::abs(pre));
  }
  return e;
}

void lut_layer_serial(const Circuit& c, std::span<const std::uint8_t> input,
                      std::span<std::uint8_t> features) {
  for (const LutCall& call : c.lut_calls) {
    const std::int32_t* wires = c.wire_pool.data() + call.wire_offset;
    std::uint32_t index = 0;
    for (int i = 0; i < call.n; ++i) {
      if (wires[i] != kZeroWire) index |= static_cast<std::uint32_t>(input[wires[i]] & 1u) << i;
    }
    features[call.output_wire] = c.tables[call.table_id].bits[index];
  }
  for (const Passthrough& p : c.passthrough) features[p.feature] = input[p.input_wire] & 1u;
}

Partials accumulate_serial(const Circuit& c, std::span<const std::uint8_t> features,
                           AccumulatorStats* stats) {
  const ChunkPlan& plan = c.chunk_plan;
  const std::int64_t limit = plan.accumulator_limit();
  Partials partials(plan.planes, std::vector<std::int64_t>(plan.classes, 0));
  AccumulatorStats local;
  for (int cls = 0; cls < plan.classes; ++cls) {
    for (int p = 0; p < plan.planes; ++p) {
      std::int64_t total = 0;
      for (const auto& chunk : plan.of(cls, p)) {
        std::int64_t sum = 0;
        for (std::int32_t f : chunk) sum += features[f];
        local.max_chunk_sum = std::max(local.max_chunk_sum, sum);
        if (sum > limit) ++local.violations;
        total += sum;
      }
      partials[p][cls] = total;
    }
  }
  if (stats) *stats = local;
  return partials;
}

}  // namespace ttc::kernels
