#pragma once

// Lowering of a ModelSpec into a lookup-table circuit: deduplicated truth
// tables, one LUT call per (head, patch, channel), identity wires, the
// quantized linear layer and its sub-sum chunk plan.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/ltt.hpp"
#include "ttc/quant.hpp"
#include "ttc/ttir.hpp"

namespace ttc {

inline constexpr int kDefaultAccBits = 4;
inline constexpr int kDefaultChunkSize = 15;
inline constexpr int kCircuitFormatVersion = 1;

struct LutCall {
  std::uint32_t table_id = 0;
  std::int32_t n = 0;
  std::uint32_t wire_offset = 0;  // first of n entries in Circuit::wire_pool
  std::int32_t output_wire = 0;   // feature index
  bool operator==(const LutCall&) const = default;
};

struct Passthrough {
  std::int32_t input_wire = 0;
  std::int32_t feature = 0;
  bool operator==(const Passthrough&) const = default;
};

// For each (class, plane) a partition of the plane's active features into
// runs of at most chunk_size.
struct ChunkPlan {
  int acc_bits = kDefaultAccBits;
  int chunk_size = kDefaultChunkSize;
  int classes = 0;
  int planes = 0;
  std::vector<std::vector<std::vector<std::int32_t>>> chunks;  // [class * planes + plane][chunk]

  const std::vector<std::vector<std::int32_t>>& of(int c, int plane) const {
    return chunks[static_cast<std::size_t>(c) * planes + plane];
  }
  std::size_t chunk_count() const;
  std::int64_t accumulator_limit() const { return (std::int64_t{1} << acc_bits) - 1; }
  bool operator==(const ChunkPlan&) const = default;
};

// Smallest accumulator width holding a sum of `terms` binary values.
int bits_for_sum(int terms);

// Strict: throws InvariantError if chunk_size > 2^acc_bits - 1.
ChunkPlan plan_chunks(const std::vector<std::vector<std::int32_t>>& active_per_class_plane,
                      int classes, int planes, int acc_bits, int chunk_size);
ChunkPlan plan_chunks(const QuantLinear& q, int acc_bits, int chunk_size);

struct HeadLayout {
  bool identity = false;
  int n = 0;  // LUT bitwidth, 0 for identity heads
  int channels = 0;
  int patch_count = 0;
  int feature_offset = 0;
  bool operator==(const HeadLayout&) const = default;
};

struct Circuit {
  std::string name;
  std::string dataset;
  InputShape input_shape;
  FrontEnd front_end;
  std::vector<TruthTable> tables;
  std::vector<HeadLayout> heads;
  std::vector<LutCall> lut_calls;     // head-major, then patch-major
  std::vector<std::int32_t> wire_pool;
  std::vector<Passthrough> passthrough;
  QuantLinear quant;
  ChunkPlan chunk_plan;
  int requested_acc_bits = kDefaultAccBits;  // differs from chunk_plan.acc_bits if raised
  int max_bitwidth = 0;

  int input_bits() const { return input_shape.size(); }
  int feature_count() const { return quant.features; }
  int classes() const { return quant.classes; }
  std::span<const std::int32_t> inputs(const LutCall& call) const {
    return {wire_pool.data() + call.wire_offset, static_cast<std::size_t>(call.n)};
  }
  bool operator==(const Circuit&) const = default;
};

struct CompileOptions {
  int acc_bits = kDefaultAccBits;
  int chunk_size = kDefaultChunkSize;
  // Widen the accumulator when chunk_size does not fit. When false the
  // declared width is kept and the violation is left to check_constraints
  // and the simulated engine.
  bool raise_acc_bits = true;
  bool dedup_tables = true;
  ExtractOptions extract;
};

Circuit compile(const ModelSpec& m, const CompileOptions& options = {});

enum class Severity { Info, Warning, Error };

struct ConstraintIssue {
  Severity severity = Severity::Info;
  std::string code;
  std::string message;
};

struct ConstraintReport {
  int max_bitwidth = 0;
  int max_lut_bitwidth = 0;
  std::map<int, std::uint64_t> calls_by_bitwidth;
  int acc_bits = 0;
  int requested_acc_bits = 0;
  int chunk_size = 0;
  std::size_t chunk_count = 0;
  std::vector<ConstraintIssue> issues;

  bool ok() const;
  bool has(const std::string& code) const;
};

ConstraintReport check_constraints(const Circuit& c);

std::string serialize_circuit(const Circuit& c);
Circuit parse_circuit(std::string_view text);
Circuit load_circuit(const std::filesystem::path& path);
void save_circuit(const Circuit& c, const std::filesystem::path& path);

// 64-bit FNV-1a over (n, bits); the dedup key of the table store.
std::uint64_t table_hash(const TruthTable& t);

// Hex digest identifying a serialized circuit; used as model version.
std::string circuit_version(const Circuit& c);

}  // namespace ttc
