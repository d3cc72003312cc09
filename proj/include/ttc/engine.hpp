#pragma once

// Circuit evaluation: float reference path over the source model, the
// bit-exact cleartext LUT engine, and a simulated-encrypted mode that
// tracks execution constraints.

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "ttc/circuit.hpp"
#include "ttc/quant.hpp"
#include "ttc/ttir.hpp"

namespace ttc {

struct EvalOptions {
  int threads = 0;        // 0: OpenMP default
  bool parallel = true;   // false: serial reference kernels
  bool compute_scores = true;  // false: stop at plane partials (split mode)
};

struct InferenceResult {
  std::vector<double> scores;
  std::vector<std::int64_t> int_scores;
  int label = 0;
  Partials partials;
};

struct EvalTrace {
  std::map<int, std::uint64_t> lut_calls_by_bitwidth;
  std::int64_t max_accumulator_value = 0;
  int max_bitwidth_touched = 0;
  int acc_bits = 0;
  std::uint64_t patches_evaluated = 0;
  std::uint64_t violations = 0;

  std::uint64_t total_calls() const;
  bool operator==(const EvalTrace&) const = default;
};

enum class OnViolation { Throw, Record };

struct SimulateOptions {
  EvalOptions eval;
  OnViolation on_violation = OnViolation::Throw;
};

// Lowest index wins ties.
int argmax(std::span<const double> scores);

// Binarized features of the float model: front end, per-patch float LTT
// forward with bin_act, identity wires, in linear-layer feature order.
std::vector<std::uint8_t> float_features(const ModelSpec& m, std::span<const std::uint8_t> input_bits);

// Float scores of the source model on a real-valued input.
std::vector<double> eval_float(const ModelSpec& m, std::span<const double> input);
std::vector<double> eval_float_bits(const ModelSpec& m, std::span<const std::uint8_t> input_bits);

// LUT-layer features of the circuit.
std::vector<std::uint8_t> circuit_features(const Circuit& c, std::span<const std::uint8_t> input_bits,
                                           const EvalOptions& options = {});

InferenceResult eval_cleartext(const Circuit& c, std::span<const std::uint8_t> input_bits,
                               const EvalOptions& options = {});

// Same result as eval_cleartext plus a trace. Throws ConstraintViolation on
// a sub-sum beyond 2^acc_bits - 1 unless on_violation == Record.
std::pair<InferenceResult, EvalTrace> eval_simulated(const Circuit& c,
                                                     std::span<const std::uint8_t> input_bits,
                                                     const SimulateOptions& options = {});

// Static trace of a circuit: what every evaluation touches regardless of input.
EvalTrace static_trace(const Circuit& c);

}  // namespace ttc
