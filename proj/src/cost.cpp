#include "ttc/cost.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json_util.hpp"
#include "ttc/error.hpp"

namespace ttc {

using detail::json;

namespace {

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), std::string("cannot open ") + what);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

double LutTimingTable::at(int bitwidth) const {
  if (bitwidth < 1 || bitwidth > kMaxLutBits) {
    throw InvariantError("bitwidth", "no timing for " + std::to_string(bitwidth) + "-bit tables");
  }
  return ms_per_call[bitwidth - 1];
}

LutTimingTable default_timing_table() {
  return {{49.3, 57.6, 57.3, 74.6, 75.2, 169.9, 353.4, 774.4, 2979.5, 2756.0, 3023.2, 3732.5,
           3956.5, 4030.1, 4009.4, 4499.5}};
}

LutTimingTable parse_timing_table(std::string_view text) {
  const json j = detail::parse_json(text, "timing");
  const json& ms = detail::require(j, "ms_per_call", "timing");
  if (!ms.is_object()) throw SchemaError("ms_per_call", "expected an object keyed by bitwidth");
  LutTimingTable t;
  for (int b = 1; b <= kMaxLutBits; ++b) {
    const std::string key = std::to_string(b);
    const std::string path = "ms_per_call." + key;
    if (!ms.contains(key)) throw SchemaError(path, "missing entry");
    const double v = detail::get_real(ms[key], path);
    if (!(v > 0.0) || !std::isfinite(v)) throw SchemaError(path, "must be positive");
    t.ms_per_call[b - 1] = v;
  }
  if (ms.size() != static_cast<std::size_t>(kMaxLutBits)) {
    throw SchemaError("ms_per_call", "expected exactly the 16 bitwidths 1..16");
  }
  return t;
}

std::string serialize_timing_table(const LutTimingTable& t) {
  json ms = json::object();
  for (int b = 1; b <= kMaxLutBits; ++b) ms[std::to_string(b)] = t.ms_per_call[b - 1];
  return json{{"unit", "ms"}, {"ms_per_call", ms}}.dump(2);
}

LutTimingTable load_timing_table(const std::filesystem::path& path) {
  return parse_timing_table(read_file(path, "timing table"));
}

// ---------------------------------------------------------------------------
// Sizes

SizeDims size_dims(const Circuit& c) {
  SizeDims d;
  d.max_bitwidth = c.max_bitwidth;
  d.input_bits = static_cast<std::uint64_t>(c.input_bits());
  // Same convention as the calibration rows: every plane of every class is
  // charged ceil(active / chunk_size) values, active = features with any
  // nonzero weight.
  const QuantLinear& q = c.quant;
  std::uint64_t active = 0;
  for (int f = 0; f < q.features; ++f) {
    for (int k = 0; k < q.classes; ++k) {
      if (q.weight(k, f) != 0) {
        ++active;
        break;
      }
    }
  }
  const auto chunk = static_cast<std::uint64_t>(std::max(1, c.chunk_plan.chunk_size));
  d.output_values = static_cast<std::uint64_t>(q.classes) * q.bits * ((active + chunk - 1) / chunk);
  return d;
}

const SizeCoefficients& SizeCalibration::for_bitwidth(int bitwidth) const {
  if (by_bitwidth.empty()) throw InvariantError("size_calibration", "no calibrated bitwidths");
  auto it = by_bitwidth.lower_bound(bitwidth);
  if (it == by_bitwidth.end()) return std::prev(it)->second;
  return it->second;
}

namespace {

// argmin_c sum ((c * x - y) / y)^2
double relative_fit(const std::vector<std::pair<double, double>>& xy) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& [x, y] : xy) {
    if (y <= 0.0) continue;
    num += x / y;
    den += (x / y) * (x / y);
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

SizeCalibration fit_size_calibration(const std::vector<CalibrationRow>& rows) {
  SizeCalibration calib;
  calib.rows = rows;
  std::map<int, std::vector<const CalibrationRow*>> groups;
  for (const auto& r : rows) groups[r.dims.max_bitwidth].push_back(&r);
  for (const auto& [bw, group] : groups) {
    std::vector<std::pair<double, double>> in, out, ram, pk, ek;
    for (const CalibrationRow* r : group) {
      in.emplace_back(static_cast<double>(r->dims.input_bits), r->input_bytes);
      out.emplace_back(static_cast<double>(r->dims.output_values), r->output_bytes);
      ram.emplace_back(r->input_bytes + r->output_bytes, r->server_ram_bytes);
      pk.emplace_back(1.0, r->public_key_bytes);
      ek.emplace_back(1.0, r->encryption_key_bytes);
    }
    SizeCoefficients k;
    k.input_bytes_per_bit = relative_fit(in);
    k.output_bytes_per_value = relative_fit(out);
    k.ram_factor = relative_fit(ram);
    k.public_key_bytes = relative_fit(pk);
    k.encryption_key_bytes = relative_fit(ek);
    calib.by_bitwidth[bw] = k;
  }
  return calib;
}

SizeCalibration parse_size_calibration(std::string_view text) {
  using namespace detail;
  const json j = parse_json(text, "size_calibration");
  const json& rows = require(j, "rows", "size_calibration");
  if (!rows.is_array() || rows.empty()) throw SchemaError("rows", "expected a non-empty array");
  std::vector<CalibrationRow> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string p = "rows[" + std::to_string(i) + "]";
    const json& r = rows[i];
    CalibrationRow row;
    row.name = get_string(require(r, "name", p), p + ".name");
    row.dims.max_bitwidth = get_count(require(r, "max_bitwidth", p), p + ".max_bitwidth", 1);
    row.dims.input_bits = static_cast<std::uint64_t>(get_count(require(r, "input_bits", p), p + ".input_bits"));
    row.dims.output_values =
        static_cast<std::uint64_t>(get_count(require(r, "output_values", p), p + ".output_values"));
    auto bytes = [&](const char* key) {
      const double v = get_real(require(r, key, p), p + "." + key);
      if (v < 0.0 || !std::isfinite(v)) throw SchemaError(p + "." + key, "must be nonnegative");
      return v;
    };
    row.input_bytes = bytes("input_bytes");
    row.output_bytes = bytes("output_bytes");
    row.server_ram_bytes = bytes("server_ram_bytes");
    row.public_key_bytes = bytes("public_key_bytes");
    row.encryption_key_bytes = bytes("encryption_key_bytes");
    out.push_back(std::move(row));
  }
  return fit_size_calibration(out);
}

SizeCalibration load_size_calibration(const std::filesystem::path& path) {
  return parse_size_calibration(read_file(path, "size calibration"));
}

SizeCalibration default_size_calibration() {
  // Measured rows with the dimensions of the models they were taken on.
  // Bytes are decimal (1 MB = 1e6).
  std::vector<CalibrationRow> rows = {
      {"adult", {5, 18, 152}, 4.3e6, 1.9e6, 3.4e6, 101.6e6, 21.6e3},
      {"mnist_fullpr", {6, 400, 4280}, 100e6, 220e6, 237.1e6, 440e6, 70.9e3},
      {"mnist_vgg1l_tt", {4, 1536, 3160}, 18.4e6, 40.6e6, 46.13e6, 102e6, 21.7e3},
      {"mnist_vgg1b_tt", {4, 784, 1560}, 9e6, 30e6, 31.45e6, 101.9e6, 21.7e3},
  };
  return fit_size_calibration(rows);
}

SizeEstimate estimate_sizes(const SizeDims& dims, const SizeCalibration& calib) {
  const SizeCoefficients& k = calib.for_bitwidth(std::max(1, dims.max_bitwidth));
  SizeEstimate e;
  e.input_bytes = k.input_bytes_per_bit * static_cast<double>(dims.input_bits);
  e.output_bytes = k.output_bytes_per_value * static_cast<double>(dims.output_values);
  e.server_ram_bytes = k.ram_factor * (e.input_bytes + e.output_bytes);
  e.public_key_bytes = k.public_key_bytes;
  e.encryption_key_bytes = k.encryption_key_bytes;
  return e;
}

SizeEstimate estimate_sizes(const Circuit& c, const SizeCalibration& calib) {
  return estimate_sizes(size_dims(c), calib);
}

// ---------------------------------------------------------------------------
// Time

CostReport estimate_time(const EvalTrace& trace, int cores, const LutTimingTable& table) {
  if (cores < 1) throw InvariantError("cores", "must be >= 1");
  CostReport r;
  r.cores = cores;
  r.total_calls = trace.total_calls();
  if (r.total_calls == 0) return r;
  const int bw = trace.max_bitwidth_touched;
  r.uniform_bitwidth_applied = bw;
  const double per_call = table.at(bw);
  for (const auto& [bits, calls] : trace.lut_calls_by_bitwidth) {
    r.call_costs.push_back({bits, calls, bw, static_cast<double>(calls) * per_call});
  }
  r.est_seconds = static_cast<double>(r.total_calls) * per_call / 1000.0 / cores;
  return r;
}

CostReport estimate(const Circuit& c, int cores, const LutTimingTable& table,
                    const SizeCalibration& calib) {
  CostReport r = estimate_time(static_trace(c), cores, table);
  r.comm = estimate_sizes(c, calib);
  r.server_ram_estimate = r.comm.server_ram_bytes;
  return r;
}

namespace {

std::string mb(double bytes) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << bytes / 1e6 << " MB";
  return os.str();
}

}  // namespace

std::string format_report(const CostReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "estimated time: " << r.est_seconds << " s on " << r.cores << " core(s) (" << r.label
     << ")\n";
  os << "lookup calls: " << r.total_calls << ", all charged at " << r.uniform_bitwidth_applied
     << " bits\n";
  for (const CallCost& cc : r.call_costs) {
    os << "  " << cc.bitwidth << "-bit: " << cc.calls << " calls, " << cc.ms / 1000.0
       << " s single core\n";
  }
  os << "encrypted input: " << mb(r.comm.input_bytes) << "\n";
  os << "encrypted output: " << mb(r.comm.output_bytes) << "\n";
  os << "public keys: " << mb(r.comm.public_key_bytes) << "\n";
  os << "encryption keys: " << std::setprecision(1) << r.comm.encryption_key_bytes / 1e3
     << " kB\n";
  os << "server RAM: " << mb(r.server_ram_estimate) << "\n";
  os << "communication: " << mb(r.comm.communication_with_keys()) << " with keys, "
     << mb(r.comm.communication_without_keys()) << " without\n";
  return os.str();
}

std::string report_json(const CostReport& r) {
  json calls = json::array();
  for (const CallCost& cc : r.call_costs) {
    calls.push_back({{"bitwidth", cc.bitwidth},
                     {"calls", cc.calls},
                     {"charged_bitwidth", cc.charged_bitwidth},
                     {"ms", cc.ms}});
  }
  json j = {{"est_seconds", r.est_seconds},
            {"cores", r.cores},
            {"uniform_bitwidth_applied", r.uniform_bitwidth_applied},
            {"total_calls", r.total_calls},
            {"call_costs", calls},
            {"lower_bound", r.lower_bound},
            {"label", r.label},
            {"comm",
             {{"input_bytes", r.comm.input_bytes},
              {"output_bytes", r.comm.output_bytes},
              {"public_key_bytes", r.comm.public_key_bytes},
              {"encryption_key_bytes", r.comm.encryption_key_bytes},
              {"with_keys_bytes", r.comm.communication_with_keys()},
              {"without_keys_bytes", r.comm.communication_without_keys()}}},
            {"server_ram_bytes", r.server_ram_estimate}};
  return j.dump(2);
}

}  // namespace ttc
