#include "ttc/ltt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "ttc/error.hpp"
#include "ttc/kernels.hpp"

namespace ttc {

double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

ChannelSets channel_sets(const LTTBlockSpec& block) {
  const auto& l1 = block.layer1;
  const auto& l2 = block.layer2;
  ChannelSets out;
  std::map<std::vector<int>, int> index;
  out.set_of_channel.resize(l2.out_channels);
  for (int j = 0; j < l2.out_channels; ++j) {
    const int g2 = j / l2.out_per_group();
    std::vector<bool> used(l1.in_channels, false);
    for (int ml = 0; ml < l2.in_per_group(); ++ml) {
      const int m = g2 * l2.in_per_group() + ml;
      const int g1 = m / l1.out_per_group();
      for (int il = 0; il < l1.in_per_group(); ++il) used[g1 * l1.in_per_group() + il] = true;
    }
    std::vector<int> set;
    for (int c = 0; c < l1.in_channels; ++c) {
      if (used[c]) set.push_back(c);
    }
    auto [it, inserted] = index.emplace(set, static_cast<int>(out.sets.size()));
    if (inserted) out.sets.push_back(std::move(set));
    out.set_of_channel[j] = it->second;
  }
  return out;
}

int receptive_bits(const LTTBlockSpec& block) {
  const ChannelSets sets = channel_sets(block);
  std::size_t widest = 0;
  for (const auto& s : sets.sets) widest = std::max(widest, s.size());
  return static_cast<int>(widest) * compose_window(block).window.area();
}

PatchGeometry receptive_field(const LTTBlockSpec& block, const InputShape& input) {
  validate_block(block, "block", false);
  if (block.layer1.in_channels != input.channels) {
    throw ShapeError("input_shape.channels", "block expects " +
                                                 std::to_string(block.layer1.in_channels) +
                                                 " input channels");
  }
  const ComposedWindow cw = compose_window(block);
  HeadSpec head;
  head.body = block;
  const HeadShape hs = head_shape(head, input);

  PatchGeometry g;
  g.channels = channel_sets(block);
  g.n = static_cast<int>(g.channels.sets.front().size()) * cw.window.area();
  g.in_channels = input.channels;
  g.window = cw.window;
  g.stride = cw.stride;
  g.patches_h = hs.patches_h;
  g.patches_w = hs.patches_w;

  g.wire_map.reserve(static_cast<std::size_t>(g.patch_count()) * g.set_count() * g.n);
  for (int py = 0; py < g.patches_h; ++py) {
    for (int px = 0; px < g.patches_w; ++px) {
      const int y0 = py * cw.stride.h - cw.pad_h;
      const int x0 = px * cw.stride.w - cw.pad_w;
      for (const auto& set : g.channels.sets) {
        for (int c : set) {
          for (int y = 0; y < cw.window.h; ++y) {
            for (int x = 0; x < cw.window.w; ++x) {
              const int yy = y0 + y;
              const int xx = x0 + x;
              if (yy < 0 || yy >= input.h || xx < 0 || xx >= input.w) {
                g.wire_map.push_back(kZeroWire);
              } else {
                g.wire_map.push_back((c * input.h + yy) * input.w + xx);
              }
            }
          }
        }
      }
    }
  }
  return g;
}

namespace {

std::vector<int> positions_for(const std::vector<int>& set, const Extent2& window) {
  std::vector<int> pos;
  pos.reserve(set.size() * window.area());
  for (int c : set) {
    for (int y = 0; y < window.h; ++y) {
      for (int x = 0; x < window.w; ++x) pos.push_back((c * window.h + y) * window.w + x);
    }
  }
  return pos;
}

// SeLU(bn1(conv1)) for layer-1 channel m at layer-1 output position (qy, qx).
double hidden_unit(const LTTBlockSpec& b, std::span<const std::uint8_t> patch,
                   const Extent2& window, int m, int qy, int qx) {
  const auto& l1 = b.layer1;
  const int g1 = m / l1.out_per_group();
  double acc = 0.0;
  for (int il = 0; il < l1.in_per_group(); ++il) {
    const int c = g1 * l1.in_per_group() + il;
    for (int ky = 0; ky < l1.kernel.h; ++ky) {
      const int y = qy * l1.stride.h + ky;
      for (int kx = 0; kx < l1.kernel.w; ++kx) {
        const int x = qx * l1.stride.w + kx;
        acc += l1.weight(m, il, ky, kx) * patch[(c * window.h + y) * window.w + x];
      }
    }
  }
  return selu(b.bn1.apply(m, acc));
}

}  // namespace

std::vector<int> patch_positions(const PatchGeometry& geometry, int set) {
  return positions_for(geometry.channels.sets.at(set), geometry.window);
}

double ltt_channel_preactivation(const LTTBlockSpec& b, std::span<const std::uint8_t> patch,
                                 int j) {
  const auto& l2 = b.layer2;
  const Extent2 window = compose_window(b).window;
  const int g2 = j / l2.out_per_group();
  double acc = 0.0;
  for (int ml = 0; ml < l2.in_per_group(); ++ml) {
    const int m = g2 * l2.in_per_group() + ml;
    for (int ky = 0; ky < l2.kernel.h; ++ky) {
      for (int kx = 0; kx < l2.kernel.w; ++kx) {
        acc += l2.weight(j, ml, ky, kx) * hidden_unit(b, patch, window, m, ky, kx);
      }
    }
  }
  return b.bn2.apply(j, acc);
}

BlockEvaluation ltt_evaluate(const LTTBlockSpec& b, std::span<const std::uint8_t> patch) {
  const Extent2 window = compose_window(b).window;
  const std::size_t expected = static_cast<std::size_t>(b.layer1.in_channels) * window.area();
  if (patch.size() != expected) {
    throw ShapeError("inputs", "expected " + std::to_string(expected) + " bits, got " +
                                   std::to_string(patch.size()));
  }
  const auto& l1 = b.layer1;
  const auto& l2 = b.layer2;
  // Hidden activations at the k2 positions the single output needs.
  std::vector<double> hidden(static_cast<std::size_t>(l1.out_channels) * l2.kernel.area());
  for (int m = 0; m < l1.out_channels; ++m) {
    for (int qy = 0; qy < l2.kernel.h; ++qy) {
      for (int qx = 0; qx < l2.kernel.w; ++qx) {
        hidden[(m * l2.kernel.h + qy) * l2.kernel.w + qx] = hidden_unit(b, patch, window, m, qy, qx);
      }
    }
  }
  BlockEvaluation out;
  out.bits.resize(l2.out_channels);
  out.pre_activation.resize(l2.out_channels);
  for (int j = 0; j < l2.out_channels; ++j) {
    const int g2 = j / l2.out_per_group();
    double acc = 0.0;
    for (int ml = 0; ml < l2.in_per_group(); ++ml) {
      const int m = g2 * l2.in_per_group() + ml;
      for (int ky = 0; ky < l2.kernel.h; ++ky) {
        for (int kx = 0; kx < l2.kernel.w; ++kx) {
          acc += l2.weight(j, ml, ky, kx) * hidden[(m * l2.kernel.h + ky) * l2.kernel.w + kx];
        }
      }
    }
    out.pre_activation[j] = b.bn2.apply(j, acc);
    out.bits[j] = bin_act(out.pre_activation[j]);
  }
  return out;
}

std::vector<std::uint8_t> ltt_forward(const LTTBlockSpec& block,
                                      std::span<const std::uint8_t> patch) {
  return ltt_evaluate(block, patch).bits;
}

std::string TruthTable::to_bitstring() const {
  std::string s(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) s[i] = '1';
  }
  return s;
}

TruthTable TruthTable::from_bitstring(std::string_view s) {
  int n = 0;
  while (n <= kMaxLutBits && (std::size_t{1} << n) < s.size()) ++n;
  if (n < 1 || n > kMaxLutBits || (std::size_t{1} << n) != s.size()) {
    throw SchemaError("table", "length " + std::to_string(s.size()) +
                                   " is not 2^n for 1 <= n <= 16");
  }
  TruthTable t;
  t.n = n;
  t.bits.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '0' && s[i] != '1') throw SchemaError("table", "expected only '0' and '1'");
    t.bits[i] = s[i] == '1';
  }
  return t;
}

TruthTable extract_truth_table(const LTTBlockSpec& block, int out_channel,
                               const ExtractOptions& options) {
  validate_block(block, "block", false);
  if (out_channel < 0 || out_channel >= block.layer2.out_channels) {
    throw ShapeError("out_channel", "no output channel " + std::to_string(out_channel));
  }
  const ChannelSets sets = channel_sets(block);
  const Extent2 window = compose_window(block).window;
  const auto positions = positions_for(sets.sets[sets.set_of_channel[out_channel]], window);
  const int patch_size = block.layer1.in_channels * window.area();

  kernels::Enumeration e =
      options.parallel
          ? kernels::enumerate_omp(block, out_channel, positions, patch_size, options.threads)
          : kernels::enumerate_serial(block, out_channel, positions, patch_size);
  TruthTable t;
  t.n = static_cast<int>(positions.size());
  t.bits = std::move(e.bits);
  t.unstable = e.min_abs_preactivation < kUnstableMargin;
  return t;
}

std::vector<TruthTable> extract_all_tables(const LTTBlockSpec& block,
                                           const ExtractOptions& options) {
  std::vector<TruthTable> out;
  out.reserve(block.layer2.out_channels);
  for (int j = 0; j < block.layer2.out_channels; ++j) {
    out.push_back(extract_truth_table(block, j, options));
  }
  return out;
}

std::string format_table_dump(const ModelSpec& m, const ExtractOptions& options) {
  std::ostringstream os;
  for (std::size_t h = 0; h < m.heads.size(); ++h) {
    if (m.heads[h].is_identity()) continue;
    const auto tables = extract_all_tables(m.heads[h].block(), options);
    for (std::size_t ch = 0; ch < tables.size(); ++ch) {
      os << h << " " << ch << " " << tables[ch].n << " " << tables[ch].to_bitstring() << "\n";
    }
  }
  return os.str();
}

DumpCheck check_table_dump(const ModelSpec& m, std::string_view dump, const ExtractOptions& options) {
  std::istringstream want(format_table_dump(m, options));
  std::istringstream got{std::string(dump)};
  DumpCheck r;
  std::string wl;
  std::string gl;
  int line = 0;
  while (std::getline(want, wl)) {
    while (std::getline(got, gl) && gl.find_first_not_of(" \t\r") == std::string::npos) {
    }
    if (!got) {
      r.first_mismatch = line;
      r.message = "dump ends at line " + std::to_string(line) + ", expected more tables";
      return r;
    }
    if (!gl.empty() && gl.back() == '\r') gl.pop_back();
    std::istringstream a(wl);
    std::istringstream b(gl);
    int ah = 0, ac = 0, an = 0, bh = -1, bc = -1, bn = -1;
    std::string abits, bbits;
    a >> ah >> ac >> an >> abits;
    b >> bh >> bc >> bn >> bbits;
    if (!b || bh != ah || bc != ac) {
      r.first_mismatch = line;
      r.message = "line " + std::to_string(line) + ": expected head " + std::to_string(ah) +
                  " channel " + std::to_string(ac);
      return r;
    }
    if (bn != an || bbits.size() != abits.size()) {
      r.first_mismatch = line;
      r.message = "line " + std::to_string(line) + ": table has n = " + std::to_string(an) +
                  ", dump has n = " + std::to_string(bn) + " with " +
                  std::to_string(bbits.size()) + " bits";
      return r;
    }
    if (bbits != abits) {
      const auto at = std::mismatch(abits.begin(), abits.end(), bbits.begin()).first - abits.begin();
      r.first_mismatch = line;
      r.message = "line " + std::to_string(line) + ": first differing entry at index " +
                  std::to_string(at);
      return r;
    }
    ++line;
  }
  while (std::getline(got, gl)) {
    if (gl.find_first_not_of(" \t\r") != std::string::npos) {
      r.first_mismatch = line;
      r.message = "dump has extra lines after " + std::to_string(line) + " tables";
      return r;
    }
  }
  r.ok = true;
  return r;
}

std::string bitwidth_warning(int n) {
  if (n <= kWarnLutBits) return {};
  return std::to_string(n) +
         "-bit lookup tables exceed 8 bits; per-call latency is prohibitive at this width";
}

}  // namespace ttc
