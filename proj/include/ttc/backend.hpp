#pragma once

// Boundary between circuit evaluation and the homomorphic scheme. The
// shipped StubBackend carries plaintext values and only accounts for sizes;
// a TFHE implementation plugs in behind the same four operations.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "ttc/circuit.hpp"
#include "ttc/engine.hpp"
#include "ttc/ltt.hpp"

namespace ttc {

struct Ciphertext {
  std::int64_t payload = 0;  // plaintext value in the stub
  int bits = 1;              // declared message width
  bool operator==(const Ciphertext&) const = default;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::vector<Ciphertext> encode(std::span<const std::uint8_t> bits) = 0;
  // Programmable lookup over the bits of `inputs` (inputs[i] is bit i of the index).
  virtual Ciphertext lut_apply(const TruthTable& table, std::span<const Ciphertext> inputs) = 0;
  virtual Ciphertext add(const Ciphertext& a, const Ciphertext& b) = 0;
  virtual std::int64_t decode(const Ciphertext& c) = 0;

  // Encryption of a public constant (padding wires, empty sums).
  virtual Ciphertext constant(std::int64_t value, int bits) = 0;
  // Instrumentation hook; real backends return nullopt.
  virtual std::optional<std::int64_t> inspect(const Ciphertext&) const { return std::nullopt; }
};

struct BackendCounters {
  std::uint64_t encoded_bits = 0;
  std::uint64_t decoded_values = 0;
  std::uint64_t adds = 0;
  std::map<int, std::uint64_t> lut_calls_by_bitwidth;
};

class StubBackend final : public Backend {
 public:
  std::vector<Ciphertext> encode(std::span<const std::uint8_t> bits) override;
  Ciphertext lut_apply(const TruthTable& table, std::span<const Ciphertext> inputs) override;
  Ciphertext add(const Ciphertext& a, const Ciphertext& b) override;
  std::int64_t decode(const Ciphertext& c) override;
  Ciphertext constant(std::int64_t value, int bits) override;
  std::optional<std::int64_t> inspect(const Ciphertext& c) const override { return c.payload; }

  BackendCounters counters() const;

 private:
  mutable std::mutex mutex_;
  BackendCounters counters_;
};

struct EncryptedPartials {
  std::vector<std::vector<Ciphertext>> planes;  // [plane][class]
  EvalTrace trace;  // accumulator values only where the backend allows inspection
};

// Server-side evaluation through the backend: LUT layer, then chunked plane
// sums. Throws ConstraintViolation when an inspectable chunk sum overflows.
EncryptedPartials eval_backend(const Circuit& c, Backend& backend,
                               std::span<const Ciphertext> inputs);

}  // namespace ttc
