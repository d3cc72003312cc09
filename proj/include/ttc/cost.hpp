#pragma once

// Encrypted-inference cost estimation. Time comes from measured per-call
// lookup latencies with every call charged at the widest bitwidth in the
// circuit; sizes come from a calibrated linear model.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ttc/circuit.hpp"
#include "ttc/engine.hpp"

namespace ttc {

struct LutTimingTable {
  std::array<double, 16> ms_per_call{};  // index b - 1 for bitwidth b

  double at(int bitwidth) const;
  bool operator==(const LutTimingTable&) const = default;
};

LutTimingTable default_timing_table();
LutTimingTable parse_timing_table(std::string_view json_text);
std::string serialize_timing_table(const LutTimingTable& t);
LutTimingTable load_timing_table(const std::filesystem::path& path);

struct CallCost {
  int bitwidth = 0;          // bitwidth of the calls
  std::uint64_t calls = 0;
  int charged_bitwidth = 0;  // bitwidth they are billed at
  double ms = 0.0;           // total, single core
};

// Quantities the size model is linear in.
struct SizeDims {
  int max_bitwidth = 0;
  std::uint64_t input_bits = 0;
  std::uint64_t output_values = 0;  // classes * planes * ceil(active features / chunk_size)
};

SizeDims size_dims(const Circuit& c);

struct SizeCoefficients {
  double input_bytes_per_bit = 0.0;
  double output_bytes_per_value = 0.0;
  double ram_factor = 0.0;  // server RAM / (input + output bytes)
  double public_key_bytes = 0.0;
  double encryption_key_bytes = 0.0;
};

// One measured memory/communication row with the dimensions it was taken at.
struct CalibrationRow {
  std::string name;
  SizeDims dims;
  double input_bytes = 0.0;
  double output_bytes = 0.0;
  double server_ram_bytes = 0.0;
  double public_key_bytes = 0.0;
  double encryption_key_bytes = 0.0;
};

struct SizeCalibration {
  std::map<int, SizeCoefficients> by_bitwidth;
  std::vector<CalibrationRow> rows;

  // Coefficients for `bitwidth`: exact match, else the nearest wider
  // calibrated width, else the widest available.
  const SizeCoefficients& for_bitwidth(int bitwidth) const;
};

// Per-bitwidth least squares on relative error, c = sum(x/y) / sum((x/y)^2).
SizeCalibration fit_size_calibration(const std::vector<CalibrationRow>& rows);
SizeCalibration parse_size_calibration(std::string_view json_text);
SizeCalibration load_size_calibration(const std::filesystem::path& path);
SizeCalibration default_size_calibration();

struct SizeEstimate {
  double input_bytes = 0.0;
  double output_bytes = 0.0;
  double server_ram_bytes = 0.0;
  double public_key_bytes = 0.0;
  double encryption_key_bytes = 0.0;
  double communication_with_keys() const { return input_bytes + output_bytes + public_key_bytes; }
  double communication_without_keys() const { return input_bytes + output_bytes; }
};

SizeEstimate estimate_sizes(const SizeDims& dims, const SizeCalibration& calib);
SizeEstimate estimate_sizes(const Circuit& c, const SizeCalibration& calib);

struct CostReport {
  double est_seconds = 0.0;
  int cores = 1;
  int uniform_bitwidth_applied = 0;
  std::uint64_t total_calls = 0;
  std::vector<CallCost> call_costs;
  SizeEstimate comm;
  double server_ram_estimate = 0.0;
  bool lower_bound = true;
  std::string label = "lower bound";
};

// est_seconds = total_calls * ms_per_call[max_bitwidth] / 1000 / cores.
CostReport estimate_time(const EvalTrace& trace, int cores, const LutTimingTable& table);
CostReport estimate(const Circuit& c, int cores, const LutTimingTable& table,
                    const SizeCalibration& calib);

std::string format_report(const CostReport& r);
std::string report_json(const CostReport& r);

}  // namespace ttc
