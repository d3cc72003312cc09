#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "ttc/cost.hpp"
#include "ttc/error.hpp"
#include "ttc/synth.hpp"

using namespace ttc;

namespace {

const std::string kConfig = std::string(TTC_SOURCE_DIR) + "/config";

EvalTrace trace_of(int bitwidth, std::uint64_t calls) {
  EvalTrace t;
  t.lut_calls_by_bitwidth[bitwidth] = calls;
  t.max_bitwidth_touched = bitwidth;
  return t;
}

double rel(double got, double want) { return (got - want) / want; }

}  // namespace

TEST(Cost, TimingTableValues) {
  const double want[16] = {49.3,   57.6,   57.3,   74.6,   75.2,   169.9,  353.4,  774.4,
                           2979.5, 2756.0, 3023.2, 3732.5, 3956.5, 4030.1, 4009.4, 4499.5};
  const LutTimingTable t = default_timing_table();
  for (int b = 1; b <= 16; ++b) EXPECT_DOUBLE_EQ(t.at(b), want[b - 1]) << b;
  EXPECT_THROW(t.at(0), InvariantError);
  EXPECT_THROW(t.at(17), InvariantError);
}

TEST(Cost, ShippedTimingConfigMatchesDefault) {
  EXPECT_EQ(load_timing_table(kConfig + "/lut_timing.json"), default_timing_table());
  EXPECT_EQ(parse_timing_table(serialize_timing_table(default_timing_table())),
            default_timing_table());
}

TEST(Cost, TimingParseErrors) {
  EXPECT_THROW(parse_timing_table(R"({"ms_per_call":{"1":1}})"), SchemaError);
  std::string neg = R"({"ms_per_call":{)";
  for (int b = 1; b <= 16; ++b) neg += "\"" + std::to_string(b) + "\":" + (b == 3 ? "-1" : "1") + (b < 16 ? "," : "");
  neg += "}}";
  EXPECT_THROW(parse_timing_table(neg), SchemaError);
}

TEST(Cost, FullPrEstimate) {
  const auto t = default_timing_table();
  const CostReport four = estimate_time(trace_of(6, 1600), 4, t);
  EXPECT_NEAR(four.est_seconds, 1600 * 169.9 / 1000.0 / 4, 1e-9);
  EXPECT_NEAR(four.est_seconds, 67.96, 1e-9);
  EXPECT_NEAR(estimate_time(trace_of(6, 1600), 1, t).est_seconds, 271.84, 1e-9);
  EXPECT_TRUE(four.lower_bound);
  EXPECT_EQ(four.label, "lower bound");
  EXPECT_NE(format_report(four).find("lower bound"), std::string::npos);
}

TEST(Cost, CompiledFullPrEstimate) {
  const Circuit c = compile(synth_model("mnist_fullpr", 1));
  const CostReport r = estimate(c, 4, default_timing_table(), default_size_calibration());
  EXPECT_EQ(r.total_calls, 1600u);
  EXPECT_EQ(r.uniform_bitwidth_applied, 6);
  EXPECT_NEAR(r.est_seconds, 67.96, 1e-9);
}

TEST(Cost, EveryCallChargedAtWidest) {
  EvalTrace t;
  t.lut_calls_by_bitwidth = {{4, 100}, {6, 10}};
  t.max_bitwidth_touched = 6;
  const CostReport r = estimate_time(t, 1, default_timing_table());
  EXPECT_NEAR(r.est_seconds, 110 * 169.9 / 1000.0, 1e-9);
  for (const CallCost& cc : r.call_costs) EXPECT_EQ(cc.charged_bitwidth, 6);
}

TEST(Cost, ScalesWithCoresAndCalls) {
  const auto t = default_timing_table();
  for (int bw = 1; bw <= 16; ++bw) {
    double prev = -1.0;
    for (std::uint64_t calls : {0u, 1u, 10u, 1000u}) {
      const double s = estimate_time(trace_of(bw, calls), 2, t).est_seconds;
      EXPECT_GE(s, prev);
      prev = s;
    }
    const double one = estimate_time(trace_of(bw, 100), 1, t).est_seconds;
    const double eight = estimate_time(trace_of(bw, 100), 8, t).est_seconds;
    EXPECT_NEAR(one / eight, 8.0, 1e-12);
  }
  EXPECT_THROW(estimate_time(trace_of(4, 1), 0, t), InvariantError);
  EXPECT_EQ(estimate_time(EvalTrace{}, 4, t).est_seconds, 0.0);
}

TEST(Cost, BitwidthMonotoneExceptMeasuredInversions) {
  // The measured table is not monotone at 9 -> 10 and 14 -> 15.
  const std::set<int> inversions = {9, 14};
  const auto t = default_timing_table();
  for (int b = 1; b < 16; ++b) {
    const double lo = estimate_time(trace_of(b, 100), 4, t).est_seconds;
    const double hi = estimate_time(trace_of(b + 1, 100), 4, t).est_seconds;
    if (inversions.count(b) || b == 2) {
      continue;
    }
    EXPECT_LE(lo, hi) << b;
  }
  EXPECT_GT(t.at(9), t.at(10));
  EXPECT_GT(t.at(14), t.at(15));
  EXPECT_GT(t.at(2), t.at(3));
}

TEST(Cost, SizeDimsOfReferenceShapes) {
  struct Want {
    const char* arch;
    SizeDims dims;
  };
  for (const Want& w : {Want{"adult", {5, 18, 152}}, Want{"mnist_fullpr", {6, 400, 4280}},
                        Want{"mnist_vgg1l_tt", {4, 1536, 3160}},
                        Want{"mnist_vgg1b_tt", {4, 784, 1560}}, Want{"cancer", {5, 81, 48}},
                        Want{"diabetes", {6, 296, 240}}}) {
    const SizeDims d = size_dims(compile(synth_model(w.arch, 1)));
    EXPECT_EQ(d.max_bitwidth, w.dims.max_bitwidth) << w.arch;
    EXPECT_EQ(d.input_bits, w.dims.input_bits) << w.arch;
    EXPECT_EQ(d.output_values, w.dims.output_values) << w.arch;
  }
}

TEST(Cost, CalibrationReproducesRows) {
  const SizeCalibration calib = default_size_calibration();
  for (const CalibrationRow& row : calib.rows) {
    const SizeEstimate e = estimate_sizes(row.dims, calib);
    EXPECT_LE(std::abs(rel(e.input_bytes, row.input_bytes)), 0.25) << row.name;
    EXPECT_LE(std::abs(rel(e.output_bytes, row.output_bytes)), 0.25) << row.name;
    EXPECT_LE(std::abs(rel(e.server_ram_bytes, row.server_ram_bytes)), 0.25) << row.name;
  }
}

TEST(Cost, CalibrationFitOracle) {
  // Single-row groups are reproduced exactly.
  std::vector<CalibrationRow> rows = {{"a", {3, 10, 20}, 100.0, 400.0, 1000.0, 7.0, 1.0}};
  const SizeCalibration one = fit_size_calibration(rows);
  const SizeEstimate e = estimate_sizes(rows[0].dims, one);
  EXPECT_NEAR(e.input_bytes, 100.0, 1e-9);
  EXPECT_NEAR(e.output_bytes, 400.0, 1e-9);
  EXPECT_NEAR(e.server_ram_bytes, 1000.0, 1e-9);
  EXPECT_NEAR(e.public_key_bytes, 7.0, 1e-12);
  // Two rows: c minimizes sum((c x - y) / y)^2, checked against a scan.
  rows.push_back({"b", {3, 30, 20}, 240.0, 400.0, 1000.0, 7.0, 1.0});
  const double c = fit_size_calibration(rows).for_bitwidth(3).input_bytes_per_bit;
  auto loss = [&](double k) {
    double s = 0.0;
    for (const auto& r : rows) s += std::pow((k * r.dims.input_bits - r.input_bytes) / r.input_bytes, 2);
    return s;
  };
  EXPECT_LE(loss(c), loss(c * 1.001));
  EXPECT_LE(loss(c), loss(c * 0.999));
}

TEST(Cost, ShippedCalibrationMatchesDefault) {
  const SizeCalibration file = load_size_calibration(kConfig + "/size_calibration.json");
  const SizeCalibration def = default_size_calibration();
  ASSERT_EQ(file.by_bitwidth.size(), def.by_bitwidth.size());
  for (const auto& [bw, k] : def.by_bitwidth) {
    const auto& f = file.by_bitwidth.at(bw);
    EXPECT_DOUBLE_EQ(f.input_bytes_per_bit, k.input_bytes_per_bit);
    EXPECT_DOUBLE_EQ(f.output_bytes_per_value, k.output_bytes_per_value);
    EXPECT_DOUBLE_EQ(f.ram_factor, k.ram_factor);
  }
}

TEST(Cost, BitwidthFallback) {
  const SizeCalibration calib = default_size_calibration();
  EXPECT_EQ(&calib.for_bitwidth(2), &calib.for_bitwidth(4));
  EXPECT_EQ(&calib.for_bitwidth(9), &calib.for_bitwidth(6));
  EXPECT_EQ(&calib.for_bitwidth(5), &calib.by_bitwidth.at(5));
}

TEST(Cost, ReportJson) {
  const CostReport r = estimate_time(trace_of(6, 1600), 4, default_timing_table());
  const std::string j = report_json(r);
  EXPECT_NE(j.find("\"lower_bound\": true"), std::string::npos);
  EXPECT_NE(j.find("\"uniform_bitwidth_applied\": 6"), std::string::npos);
}
