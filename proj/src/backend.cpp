#include "ttc/backend.hpp"

#include <algorithm>

#include "ttc/error.hpp"

namespace ttc {

std::vector<Ciphertext> StubBackend::encode(std::span<const std::uint8_t> bits) {
  std::vector<Ciphertext> out;
  out.reserve(bits.size());
  for (std::uint8_t b : bits) out.push_back({b & 1, 1});
  std::lock_guard lock(mutex_);
  counters_.encoded_bits += bits.size();
  return out;
}

Ciphertext StubBackend::lut_apply(const TruthTable& table, std::span<const Ciphertext> inputs) {
  if (static_cast<int>(inputs.size()) != table.n) {
    throw ShapeError("lut_apply", "table takes " + std::to_string(table.n) + " inputs, got " +
                                      std::to_string(inputs.size()));
  }
  std::uint32_t index = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].payload < 0 || inputs[i].payload > 1) {
      throw ShapeError("lut_apply", "input " + std::to_string(i) + " is not a single bit");
    }
    index |= static_cast<std::uint32_t>(inputs[i].payload) << i;
  }
  {
    std::lock_guard lock(mutex_);
    ++counters_.lut_calls_by_bitwidth[table.n];
  }
  return {table(index), 1};
}

Ciphertext StubBackend::add(const Ciphertext& a, const Ciphertext& b) {
  {
    std::lock_guard lock(mutex_);
    ++counters_.adds;
  }
  return {a.payload + b.payload, std::max(a.bits, b.bits)};
}

std::int64_t StubBackend::decode(const Ciphertext& c) {
  std::lock_guard lock(mutex_);
  ++counters_.decoded_values;
  return c.payload;
}

Ciphertext StubBackend::constant(std::int64_t value, int bits) { return {value, bits}; }

BackendCounters StubBackend::counters() const {
  std::lock_guard lock(mutex_);
  return counters_;
}

EncryptedPartials eval_backend(const Circuit& c, Backend& backend,
                               std::span<const Ciphertext> inputs) {
  if (inputs.size() != static_cast<std::size_t>(c.input_bits())) {
    throw ShapeError("input", "expected " + std::to_string(c.input_bits()) +
                                  " ciphertexts, got " + std::to_string(inputs.size()));
  }
  EncryptedPartials out;
  out.trace = static_trace(c);

  const Ciphertext zero = backend.constant(0, 1);
  std::vector<Ciphertext> features(static_cast<std::size_t>(c.feature_count()), zero);
  std::vector<Ciphertext> args;
  for (const LutCall& call : c.lut_calls) {
    args.clear();
    for (std::int32_t w : c.inputs(call)) args.push_back(w == kZeroWire ? zero : inputs[w]);
    features[call.output_wire] = backend.lut_apply(c.tables[call.table_id], args);
  }
  for (const Passthrough& p : c.passthrough) features[p.feature] = inputs[p.input_wire];

  const ChunkPlan& plan = c.chunk_plan;
  const int total_bits = bits_for_sum(std::max(1, c.feature_count()));
  out.planes.assign(plan.planes, std::vector<Ciphertext>(plan.classes, zero));
  for (int cls = 0; cls < plan.classes; ++cls) {
    for (int p = 0; p < plan.planes; ++p) {
      Ciphertext total = backend.constant(0, total_bits);
      for (const auto& chunk : plan.of(cls, p)) {
        Ciphertext sum = backend.constant(0, plan.acc_bits);
        for (std::int32_t f : chunk) sum = backend.add(sum, features[f]);
        if (auto v = backend.inspect(sum)) {
          out.trace.max_accumulator_value = std::max(out.trace.max_accumulator_value, *v);
          if (*v > plan.accumulator_limit()) ++out.trace.violations;
        }
        total = backend.add(total, sum);
      }
      out.planes[p][cls] = total;
    }
  }
  if (out.trace.violations > 0) {
    throw ConstraintViolation("chunk_plan.acc_bits",
                              "sub-sum of " + std::to_string(out.trace.max_accumulator_value) +
                                  " exceeds the " + std::to_string(plan.acc_bits) +
                                  "-bit accumulator");
  }
  return out;
}

}  // namespace ttc
