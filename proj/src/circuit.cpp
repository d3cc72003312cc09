#include "ttc/circuit.hpp"

#include <algorithm>
#include <unordered_map>

#include "ttc/codec.hpp"
#include "ttc/error.hpp"

namespace ttc {

std::size_t ChunkPlan::chunk_count() const {
  std::size_t n = 0;
  for (const auto& cp : chunks) n += cp.size();
  return n;
}

int bits_for_sum(int terms) {
  int b = 1;
  while ((std::int64_t{1} << b) - 1 < terms) ++b;
  return b;
}

namespace {

ChunkPlan build_plan(const std::vector<std::vector<std::int32_t>>& active, int classes,
                     int planes, int acc_bits, int chunk_size) {
  if (chunk_size < 1) throw InvariantError("chunk_size", "must be >= 1");
  if (acc_bits < 1 || acc_bits > 16) throw InvariantError("acc_bits", "must be in [1, 16]");
  if (active.size() != static_cast<std::size_t>(classes) * planes) {
    throw ShapeError("active", "expected classes * planes feature lists");
  }
  ChunkPlan plan;
  plan.acc_bits = acc_bits;
  plan.chunk_size = chunk_size;
  plan.classes = classes;
  plan.planes = planes;
  plan.chunks.resize(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto& feats = active[k];
    for (std::size_t i = 0; i < feats.size(); i += chunk_size) {
      const std::size_t end = std::min(feats.size(), i + chunk_size);
      plan.chunks[k].emplace_back(feats.begin() + i, feats.begin() + end);
    }
  }
  return plan;
}

std::vector<std::vector<std::int32_t>> active_features(const QuantLinear& q) {
  std::vector<std::vector<std::int32_t>> active(static_cast<std::size_t>(q.classes) * q.bits);
  for (int c = 0; c < q.classes; ++c) {
    for (int p = 0; p < q.bits; ++p) {
      auto& list = active[static_cast<std::size_t>(c) * q.bits + p];
      for (int f = 0; f < q.features; ++f) {
        if (q.plane_bit(p, c, f)) list.push_back(f);
      }
    }
  }
  return active;
}

void check_fits(int acc_bits, int chunk_size) {
  if (chunk_size > (std::int64_t{1} << acc_bits) - 1) {
    throw InvariantError("chunk_size", "chunk of " + std::to_string(chunk_size) +
                                           " binary terms can overflow a " +
                                           std::to_string(acc_bits) + "-bit accumulator");
  }
}

}  // namespace

ChunkPlan plan_chunks(const std::vector<std::vector<std::int32_t>>& active_per_class_plane,
                      int classes, int planes, int acc_bits, int chunk_size) {
  check_fits(acc_bits, chunk_size);
  return build_plan(active_per_class_plane, classes, planes, acc_bits, chunk_size);
}

ChunkPlan plan_chunks(const QuantLinear& q, int acc_bits, int chunk_size) {
  check_fits(acc_bits, chunk_size);
  return build_plan(active_features(q), q.classes, q.bits, acc_bits, chunk_size);
}

std::uint64_t table_hash(const TruthTable& t) {
  const std::uint8_t n = static_cast<std::uint8_t>(t.n);
  std::uint64_t h = codec::fnv1a({&n, 1});
  return codec::fnv1a(t.bits, h);
}

Circuit compile(const ModelSpec& m, const CompileOptions& options) {
  validate_model(m);
  Circuit c;
  c.name = m.metadata.name;
  c.dataset = m.metadata.dataset;
  c.input_shape = m.input_shape;
  c.front_end = m.front_end;

  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> store;
  auto intern = [&](TruthTable t) -> std::uint32_t {
    if (options.dedup_tables) {
      auto& bucket = store[table_hash(t)];
      for (std::uint32_t id : bucket) {
        if (c.tables[id] == t) {
          c.tables[id].unstable = c.tables[id].unstable || t.unstable;
          return id;
        }
      }
      bucket.push_back(static_cast<std::uint32_t>(c.tables.size()));
    }
    c.tables.push_back(std::move(t));
    return static_cast<std::uint32_t>(c.tables.size() - 1);
  };

  int offset = 0;
  int max_lut = 0;
  for (const HeadSpec& head : m.heads) {
    const HeadShape hs = head_shape(head, m.input_shape);
    const int patches = hs.patch_count();
    auto source = [&](int ch) { return head.shuffle.empty() ? ch : head.shuffle[ch]; };

    HeadLayout layout;
    layout.identity = head.is_identity();
    layout.channels = hs.channels;
    layout.patch_count = patches;
    layout.feature_offset = offset;

    if (head.is_identity()) {
      for (int ch = 0; ch < hs.channels; ++ch) {
        for (int p = 0; p < patches; ++p) {
          c.passthrough.push_back({source(ch) * patches + p, offset + ch * patches + p});
        }
      }
    } else {
      const LTTBlockSpec& block = head.block();
      const PatchGeometry g = receptive_field(block, m.input_shape);
      std::vector<std::uint32_t> ids;
      for (TruthTable& t : extract_all_tables(block, options.extract)) ids.push_back(intern(std::move(t)));

      const auto base = static_cast<std::uint32_t>(c.wire_pool.size());
      c.wire_pool.insert(c.wire_pool.end(), g.wire_map.begin(), g.wire_map.end());
      for (int p = 0; p < patches; ++p) {
        for (int ch = 0; ch < hs.channels; ++ch) {
          const int src = source(ch);
          const int set = g.channels.set_of_channel[src];
          LutCall call;
          call.table_id = ids[src];
          call.n = g.n;
          call.wire_offset =
              base + static_cast<std::uint32_t>((static_cast<std::size_t>(p) * g.set_count() + set) * g.n);
          call.output_wire = offset + ch * patches + p;
          c.lut_calls.push_back(call);
        }
      }
      layout.n = g.n;
      max_lut = std::max(max_lut, g.n);
    }
    c.heads.push_back(layout);
    offset += hs.features();
  }

  c.quant = quantize_linear(m.linear, kDefaultWeightBits);

  c.requested_acc_bits = options.acc_bits;
  int acc = options.acc_bits;
  if (options.raise_acc_bits && options.chunk_size > (std::int64_t{1} << acc) - 1) {
    acc = bits_for_sum(options.chunk_size);
  }
  c.chunk_plan = build_plan(active_features(c.quant), c.quant.classes, c.quant.bits, acc,
                            options.chunk_size);
  c.max_bitwidth = std::max(max_lut, acc);
  return c;
}

bool ConstraintReport::ok() const {
  return std::none_of(issues.begin(), issues.end(),
                      [](const ConstraintIssue& i) { return i.severity == Severity::Error; });
}

bool ConstraintReport::has(const std::string& code) const {
  return std::any_of(issues.begin(), issues.end(),
                     [&](const ConstraintIssue& i) { return i.code == code; });
}

ConstraintReport check_constraints(const Circuit& c) {
  ConstraintReport r;
  for (const LutCall& call : c.lut_calls) {
    ++r.calls_by_bitwidth[call.n];
    r.max_lut_bitwidth = std::max(r.max_lut_bitwidth, static_cast<int>(call.n));
  }
  const ChunkPlan& plan = c.chunk_plan;
  r.acc_bits = plan.acc_bits;
  r.requested_acc_bits = c.requested_acc_bits;
  r.chunk_size = plan.chunk_size;
  r.chunk_count = plan.chunk_count();
  r.max_bitwidth = std::max(r.max_lut_bitwidth, plan.acc_bits);

  if (r.max_lut_bitwidth > kMaxLutBits) {
    r.issues.push_back({Severity::Error, "lut_bitwidth",
                        "lookup tables of " + std::to_string(r.max_lut_bitwidth) +
                            " bits exceed the 16-bit limit"});
  } else if (r.max_lut_bitwidth > kWarnLutBits) {
    r.issues.push_back({Severity::Warning, "wide_lut", bitwidth_warning(r.max_lut_bitwidth)});
  }
  std::size_t unstable = 0;
  for (const TruthTable& t : c.tables) unstable += t.unstable ? 1 : 0;
  if (unstable > 0) {
    r.issues.push_back({Severity::Warning, "unstable_table",
                        std::to_string(unstable) +
                            " table(s) have entries within rounding distance of the threshold"});
  }
  if (plan.chunk_size > plan.accumulator_limit()) {
    r.issues.push_back({Severity::Error, "accumulator_overflow",
                        "chunk size " + std::to_string(plan.chunk_size) + " needs " +
                            std::to_string(bits_for_sum(plan.chunk_size)) +
                            " accumulator bits, circuit declares " +
                            std::to_string(plan.acc_bits)});
  }
  if (plan.acc_bits != c.requested_acc_bits) {
    r.issues.push_back({Severity::Info, "acc_bits_raised",
                        "accumulator raised from " + std::to_string(c.requested_acc_bits) +
                            " to " + std::to_string(plan.acc_bits) + " bits to hold chunks of " +
                            std::to_string(plan.chunk_size)});
  }
  return r;
}

std::string circuit_version(const Circuit& c) {
  const std::string s = serialize_circuit(c);
  return codec::hex64(codec::fnv1a(
      {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}));
}

}  // namespace ttc
