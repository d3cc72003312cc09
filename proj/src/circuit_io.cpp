#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "ttc/circuit.hpp"
#include "ttc/codec.hpp"
#include "ttc/error.hpp"

namespace ttc {

using detail::json;

namespace {

const char* kFormat = "ttc-circuit";

json front_end_json(const FrontEnd& fe) {
  json j;
  j["kind"] = fe.kind == FrontEnd::Kind::Binarize ? "binarize" : "precomputed_binary";
  if (!fe.thresholds.empty()) j["thresholds"] = fe.thresholds;
  return j;
}

FrontEnd parse_front_end(const json& j, const std::string& path) {
  FrontEnd fe;
  const std::string kind = detail::get_string(detail::require(j, "kind", path), path + ".kind");
  if (kind == "binarize") {
    fe.kind = FrontEnd::Kind::Binarize;
  } else if (kind == "precomputed_binary") {
    fe.kind = FrontEnd::Kind::PrecomputedBinary;
  } else {
    throw SchemaError(path + ".kind", "unknown front end '" + kind + "'");
  }
  if (j.contains("thresholds")) fe.thresholds = detail::get_reals(j["thresholds"], path + ".thresholds");
  return fe;
}

}  // namespace

std::string serialize_circuit(const Circuit& c) {
  json j;
  j["format"] = kFormat;
  j["version"] = kCircuitFormatVersion;
  j["name"] = c.name;
  j["dataset"] = c.dataset;
  j["input_shape"] = {c.input_shape.channels, c.input_shape.h, c.input_shape.w};
  j["front_end"] = front_end_json(c.front_end);

  json tables = json::array();
  for (const TruthTable& t : c.tables) {
    tables.push_back({{"n", t.n},
                      {"length", t.bits.size()},
                      {"bits", codec::base64_encode(codec::pack_bits(t.bits))},
                      {"unstable", t.unstable}});
  }
  j["tables"] = std::move(tables);

  json heads = json::array();
  for (const HeadLayout& h : c.heads) {
    heads.push_back({{"identity", h.identity},
                     {"n", h.n},
                     {"channels", h.channels},
                     {"patch_count", h.patch_count},
                     {"feature_offset", h.feature_offset}});
  }
  j["heads"] = std::move(heads);

  json calls = json::array();
  for (const LutCall& call : c.lut_calls) {
    calls.push_back({call.table_id, call.n, call.wire_offset, call.output_wire});
  }
  j["lut_calls"] = std::move(calls);
  j["wire_pool"] = c.wire_pool;
  json pass = json::array();
  for (const Passthrough& p : c.passthrough) pass.push_back({p.input_wire, p.feature});
  j["passthrough"] = std::move(pass);

  std::vector<int> ints(c.quant.int_weights.begin(), c.quant.int_weights.end());
  j["linear"] = {{"classes", c.quant.classes},
                 {"features", c.quant.features},
                 {"bits", c.quant.bits},
                 {"scale", c.quant.scale},
                 {"int_weights", ints}};

  const ChunkPlan& plan = c.chunk_plan;
  j["chunk_plan"] = {{"acc_bits", plan.acc_bits},
                     {"requested_acc_bits", c.requested_acc_bits},
                     {"chunk_size", plan.chunk_size},
                     {"chunks", plan.chunks}};
  j["max_bitwidth"] = c.max_bitwidth;
  return j.dump(1);
}

Circuit parse_circuit(std::string_view text) {
  using namespace detail;
  const json j = parse_json(text, "circuit");
  if (!j.is_object()) throw SchemaError("circuit", "expected an object");
  if (get_string(require(j, "format", "circuit"), "format") != kFormat) {
    throw SchemaError("format", "not a compiled circuit");
  }
  if (get_int(require(j, "version", "circuit"), "version") != kCircuitFormatVersion) {
    throw SchemaError("version", "unsupported circuit version");
  }
  Circuit c;
  if (j.contains("name")) c.name = get_string(j["name"], "name");
  if (j.contains("dataset")) c.dataset = get_string(j["dataset"], "dataset");
  const auto shape = get_ints(require(j, "input_shape", "circuit"), "input_shape");
  if (shape.size() != 3 || shape[0] < 1 || shape[1] < 1 || shape[2] < 1) {
    throw SchemaError("input_shape", "expected [channels, h, w] with positive entries");
  }
  c.input_shape = {shape[0], shape[1], shape[2]};
  c.front_end = parse_front_end(require(j, "front_end", "circuit"), "front_end");
  const auto inputs = static_cast<std::size_t>(c.input_shape.size());
  if (!c.front_end.thresholds.empty() && c.front_end.thresholds.size() != inputs) {
    throw SchemaError("front_end.thresholds", "length must equal the input size");
  }

  const json& tables = require(j, "tables", "circuit");
  if (!tables.is_array()) throw SchemaError("tables", "expected an array");
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const std::string p = "tables[" + std::to_string(i) + "]";
    TruthTable t;
    t.n = get_count(require(tables[i], "n", p), p + ".n", 1);
    if (t.n > kMaxLutBits) throw SchemaError(p + ".n", "exceeds 16");
    const auto length = static_cast<std::size_t>(get_int(require(tables[i], "length", p), p + ".length"));
    if (length != (std::size_t{1} << t.n)) {
      throw SchemaError(p + ".length", "must equal 2^n = " + std::to_string(std::size_t{1} << t.n));
    }
    const auto bytes = codec::base64_decode(get_string(require(tables[i], "bits", p), p + ".bits"));
    try {
      t.bits = codec::unpack_bits(bytes, length);
    } catch (const SchemaError& e) {
      throw SchemaError(p + ".bits", e.what());
    }
    if (tables[i].contains("unstable")) t.unstable = get_bool(tables[i]["unstable"], p + ".unstable");
    c.tables.push_back(std::move(t));
  }

  const json& lin = require(j, "linear", "circuit");
  const int classes = get_count(require(lin, "classes", "linear"), "linear.classes", 1);
  const int features = get_count(require(lin, "features", "linear"), "linear.features", 1);
  const int bits = get_count(require(lin, "bits", "linear"), "linear.bits", 2);
  const double scale = get_real(require(lin, "scale", "linear"), "linear.scale");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw SchemaError("linear.scale", "must be positive");
  const auto raw = get_ints(require(lin, "int_weights", "linear"), "linear.int_weights");
  std::vector<std::int8_t> ints;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < -128 || raw[i] > 127) {
      throw SchemaError("linear.int_weights[" + std::to_string(i) + "]", "out of range");
    }
    ints.push_back(static_cast<std::int8_t>(raw[i]));
  }
  try {
    c.quant = from_int_weights(classes, features, bits, scale, std::move(ints));
  } catch (const InvariantError& e) {
    throw SchemaError("linear." + e.field(), e.what());
  }

  const json& heads = require(j, "heads", "circuit");
  if (!heads.is_array()) throw SchemaError("heads", "expected an array");
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const std::string p = "heads[" + std::to_string(i) + "]";
    HeadLayout h;
    h.identity = get_bool(require(heads[i], "identity", p), p + ".identity");
    h.n = get_count(require(heads[i], "n", p), p + ".n");
    h.channels = get_count(require(heads[i], "channels", p), p + ".channels", 1);
    h.patch_count = get_count(require(heads[i], "patch_count", p), p + ".patch_count", 1);
    h.feature_offset = get_count(require(heads[i], "feature_offset", p), p + ".feature_offset");
    c.heads.push_back(h);
  }

  c.wire_pool.clear();
  for (int w : get_ints(require(j, "wire_pool", "circuit"), "wire_pool")) {
    if (w != kZeroWire && (w < 0 || static_cast<std::size_t>(w) >= inputs)) {
      throw SchemaError("wire_pool", "wire " + std::to_string(w) + " outside the input");
    }
    c.wire_pool.push_back(w);
  }

  std::vector<std::uint8_t> covered(features, 0);
  auto cover = [&](long long f, const std::string& p) {
    if (f < 0 || f >= features) throw SchemaError(p, "feature index out of range");
    if (covered[f]++) throw SchemaError(p, "feature " + std::to_string(f) + " produced twice");
  };

  const json& calls = require(j, "lut_calls", "circuit");
  if (!calls.is_array()) throw SchemaError("lut_calls", "expected an array");
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const std::string p = "lut_calls[" + std::to_string(i) + "]";
    const auto v = get_ints(calls[i], p);
    if (v.size() != 4) throw SchemaError(p, "expected [table_id, n, wire_offset, output_wire]");
    if (v[0] < 0 || static_cast<std::size_t>(v[0]) >= c.tables.size()) {
      throw SchemaError(p, "table id out of range");
    }
    if (v[1] != c.tables[v[0]].n) throw SchemaError(p, "n does not match the table");
    if (v[2] < 0 || static_cast<std::size_t>(v[2]) + v[1] > c.wire_pool.size()) {
      throw SchemaError(p, "wire range outside wire_pool");
    }
    cover(v[3], p);
    c.lut_calls.push_back({static_cast<std::uint32_t>(v[0]), v[1], static_cast<std::uint32_t>(v[2]), v[3]});
    c.max_bitwidth = std::max(c.max_bitwidth, v[1]);
  }
  const json& pass = require(j, "passthrough", "circuit");
  if (!pass.is_array()) throw SchemaError("passthrough", "expected an array");
  for (std::size_t i = 0; i < pass.size(); ++i) {
    const std::string p = "passthrough[" + std::to_string(i) + "]";
    const auto v = get_ints(pass[i], p);
    if (v.size() != 2) throw SchemaError(p, "expected [input_wire, feature]");
    if (v[0] < 0 || static_cast<std::size_t>(v[0]) >= inputs) throw SchemaError(p, "input wire out of range");
    cover(v[1], p);
    c.passthrough.push_back({v[0], v[1]});
  }
  for (int f = 0; f < features; ++f) {
    if (!covered[f]) throw SchemaError("lut_calls", "feature " + std::to_string(f) + " is never produced");
  }

  const json& plan = require(j, "chunk_plan", "circuit");
  const int acc = get_count(require(plan, "acc_bits", "chunk_plan"), "chunk_plan.acc_bits", 1);
  const int chunk = get_count(require(plan, "chunk_size", "chunk_plan"), "chunk_plan.chunk_size", 1);
  c.requested_acc_bits = plan.contains("requested_acc_bits")
                             ? get_count(plan["requested_acc_bits"], "chunk_plan.requested_acc_bits", 1)
                             : acc;
  const json& chunks = require(plan, "chunks", "chunk_plan");
  if (!chunks.is_array() || chunks.size() != static_cast<std::size_t>(classes) * bits) {
    throw SchemaError("chunk_plan.chunks", "expected classes * planes lists");
  }
  c.chunk_plan.acc_bits = acc;
  c.chunk_plan.chunk_size = chunk;
  c.chunk_plan.classes = classes;
  c.chunk_plan.planes = bits;
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    const std::string p = "chunk_plan.chunks[" + std::to_string(k) + "]";
    if (!chunks[k].is_array()) throw SchemaError(p, "expected an array of chunks");
    std::vector<std::vector<std::int32_t>> list;
    for (std::size_t i = 0; i < chunks[k].size(); ++i) {
      const auto fs = get_ints(chunks[k][i], p + "[" + std::to_string(i) + "]");
      if (fs.empty() || static_cast<int>(fs.size()) > chunk) {
        throw SchemaError(p, "chunk length must be in [1, chunk_size]");
      }
      for (int f : fs) {
        if (f < 0 || f >= features) throw SchemaError(p, "feature index out of range");
      }
      list.emplace_back(fs.begin(), fs.end());
    }
    c.chunk_plan.chunks.push_back(std::move(list));
  }
  c.max_bitwidth = std::max(c.max_bitwidth, acc);
  if (j.contains("max_bitwidth")) {
    const int declared = get_count(j["max_bitwidth"], "max_bitwidth");
    if (declared != c.max_bitwidth) {
      throw SchemaError("max_bitwidth", "does not match the tables and accumulator");
    }
  }
  return c;
}

Circuit load_circuit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "cannot open circuit file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_circuit(ss.str());
}

void save_circuit(const Circuit& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError(path.string(), "cannot write circuit file");
  out << serialize_circuit(c);
}

}  // namespace ttc
