#pragma once

// Forward semantics of an LTT block, its receptive field on an input
// tensor, and exhaustive conversion of each output channel into a truth
// table.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/ttir.hpp"

namespace ttc {

inline constexpr int kMaxLutBits = 16;
inline constexpr int kWarnLutBits = 8;

inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluLambda = 1.0507009873554805;

// Pre-activations closer to zero than this make a table bit rounding-dependent.
inline constexpr double kUnstableMargin = 1e-9;

double selu(double x);

// Heaviside with sgn(0) = +1.
inline std::uint8_t bin_act(double x) { return x >= 0.0 ? 1 : 0; }

// Wire value meaning "constant zero bit" (padding).
inline constexpr std::int32_t kZeroWire = -1;

// Input channels each output channel of the block depends on, deduplicated
// into sets. All sets have the same size for valid blocks.
struct ChannelSets {
  std::vector<std::vector<int>> sets;   // each sorted ascending
  std::vector<int> set_of_channel;      // output channel -> set index
};

ChannelSets channel_sets(const LTTBlockSpec& block);

// Truth-table input bit count of one output channel; does not check limits.
int receptive_bits(const LTTBlockSpec& block);

struct PatchGeometry {
  int n = 0;                 // truth-table input bits per output channel
  int in_channels = 0;
  Extent2 window;            // spatial receptive field
  Extent2 stride;            // patch stride on the input
  int patches_h = 0;
  int patches_w = 0;
  ChannelSets channels;
  // [patch][set][bit] -> flat index into the input tensor, or kZeroWire.
  std::vector<std::int32_t> wire_map;

  int patch_count() const { return patches_h * patches_w; }
  int set_count() const { return static_cast<int>(channels.sets.size()); }
  // Full patch length as fed to ltt_forward: in_channels * window area.
  int patch_size() const { return in_channels * window.area(); }

  std::span<const std::int32_t> wires(int patch, int set) const {
    const auto stride_ = static_cast<std::size_t>(n);
    return {wire_map.data() + (static_cast<std::size_t>(patch) * set_count() + set) * stride_,
            stride_};
  }
};

// Throws ConstraintError when n > 16.
PatchGeometry receptive_field(const LTTBlockSpec& block, const InputShape& input);

// Position of truth-table bit `k` of channel set `set` inside the full
// [in_channels][window.h][window.w] patch layout.
std::vector<int> patch_positions(const PatchGeometry& geometry, int set);

struct BlockEvaluation {
  std::vector<std::uint8_t> bits;     // per output channel
  std::vector<double> pre_activation; // bn2 output per output channel
};

// Float forward of one patch laid out as [in_channels][window.h][window.w].
BlockEvaluation ltt_evaluate(const LTTBlockSpec& block, std::span<const std::uint8_t> patch);
std::vector<std::uint8_t> ltt_forward(const LTTBlockSpec& block,
                                      std::span<const std::uint8_t> patch);

// Pre-activation of a single output channel; only its group is computed.
double ltt_channel_preactivation(const LTTBlockSpec& block, std::span<const std::uint8_t> patch,
                                 int out_channel);

// Boolean function of n inputs; bit b_i of the index is the i-th wire.
struct TruthTable {
  int n = 0;
  std::vector<std::uint8_t> bits;  // 2^n entries, each 0 or 1
  bool unstable = false;

  std::size_t size() const { return bits.size(); }
  std::uint8_t operator()(std::uint32_t index) const { return bits[index]; }
  bool operator==(const TruthTable& o) const { return n == o.n && bits == o.bits; }

  std::string to_bitstring() const;
  static TruthTable from_bitstring(std::string_view s);
};

struct ExtractOptions {
  int threads = 0;       // 0: OpenMP default
  bool parallel = true;  // false selects the serial reference kernel
};

// Exhaustive enumeration over all 2^n inputs of one output channel.
// Throws ConstraintError for n > 16.
TruthTable extract_truth_table(const LTTBlockSpec& block, int out_channel,
                               const ExtractOptions& options = {});

std::vector<TruthTable> extract_all_tables(const LTTBlockSpec& block,
                                           const ExtractOptions& options = {});

// Per-filter table dump exchanged with the trainer: one line per LTT head
// output channel, "head channel n bits", bits in index order.
std::string format_table_dump(const ModelSpec& m, const ExtractOptions& options = {});

struct DumpCheck {
  bool ok = false;
  int first_mismatch = -1;  // dump line index, -1 when ok
  std::string message;
};

// Compares a dump against extraction over `m`. Unparseable dumps fail with a
// message rather than throwing.
DumpCheck check_table_dump(const ModelSpec& m, std::string_view dump,
                           const ExtractOptions& options = {});

// Warning text for n > 8 tables, empty otherwise.
std::string bitwidth_warning(int n);

}  // namespace ttc
