#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ttc/kernels.hpp"

namespace ttc::kernels {

namespace {
int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }
}  // namespace

Enumeration enumerate_omp(const LTTBlockSpec& block, int out_channel,
                          std::span<const int> positions, int patch_size, int threads) {
  const int n = static_cast<int>(positions.size());
  const std::int64_t entries = std::int64_t{1} << n;
  Enumeration e;
  e.bits.resize(entries);
  double min_abs = std::numeric_limits<double>::infinity();

#pragma omp parallel num_threads(resolve_threads(threads))
  {
    std::vector<std::uint8_t> patch(patch_size, 0);
#pragma omp for schedule(static) reduction(min : min_abs)
    for (std::int64_t k = 0; k < entries; ++k) {
      for (int i = 0; i < n; ++i) patch[positions[i]] = (k >> i) & 1;
      const double pre = ltt_channel_preactivation(block, patch, out_channel);
      e.bits[k] = bin_act(pre);
      min_abs = std::min(min_abs, std::abs(pre));
    }
  }
  e.min_abs_preactivation = min_abs;
  return e;
}

void lut_layer_omp(const Circuit& c, std::span<const std::uint8_t> input,
                   std::span<std::uint8_t> features, int threads) {
  const auto calls = static_cast<std::int64_t>(c.lut_calls.size());
  const auto wires = static_cast<std::int64_t>(c.passthrough.size());
#pragma omp parallel num_threads(resolve_threads(threads))
  {
    // Every call writes a distinct feature; no synchronization needed.
#pragma omp for schedule(static) nowait
    for (std::int64_t k = 0; k < calls; ++k) {
      const LutCall& call = c.lut_calls[k];
      const std::int32_t* w = c.wire_pool.data() + call.wire_offset;
      std::uint32_t index = 0;
      for (int i = 0; i < call.n; ++i) {
        if (w[i] != kZeroWire) index |= static_cast<std::uint32_t>(input[w[i]] & 1u) << i;
      }
      features[call.output_wire] = c.tables[call.table_id].bits[index];
    }
#pragma omp for schedule(static)
    for (std::int64_t k = 0; k < wires; ++k) {
      const Passthrough& p = c.passthrough[k];
      features[p.feature] = input[p.input_wire] & 1u;
    }
  }
}

Partials accumulate_omp(const Circuit& c, std::span<const std::uint8_t> features,
                        AccumulatorStats* stats, int threads) {
  const ChunkPlan& plan = c.chunk_plan;
  const std::int64_t limit = plan.accumulator_limit();
  Partials partials(plan.planes, std::vector<std::int64_t>(plan.classes, 0));
  const std::int64_t pairs = static_cast<std::int64_t>(plan.classes) * plan.planes;
  std::int64_t max_sum = 0;
  std::uint64_t violations = 0;

#pragma omp parallel for num_threads(resolve_threads(threads)) schedule(static) \
    reduction(max : max_sum) reduction(+ : violations)
  for (std::int64_t k = 0; k < pairs; ++k) {
    const int cls = static_cast<int>(k / plan.planes);
    const int p = static_cast<int>(k % plan.planes);
    std::int64_t total = 0;
    for (const auto& chunk : plan.of(cls, p)) {
      std::int64_t sum = 0;
      for (std::int32_t f : chunk) sum += features[f];
      max_sum = std::max(max_sum, sum);
      if (sum > limit) ++violations;
      total += sum;
    }
    partials[p][cls] = total;
  }
  if (stats) *stats = {max_sum, violations};
  return partials;
}

}  // namespace ttc::kernels
