#include "ttc/ttir.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "ttc/error.hpp"
#include "ttc/ltt.hpp"

namespace ttc {

using detail::json;

std::size_t ConvLayerSpec::expected_weight_count() const {
  if (groups <= 0) return 0;
  return static_cast<std::size_t>(out_channels) * in_per_group() * kernel.h * kernel.w;
}

double BatchNormSpec::apply(int c, double x) const {
  return gamma[c] * (x - running_mean[c]) / std::sqrt(running_var[c] + epsilon) + beta[c];
}

BatchNormSpec BatchNormSpec::identity(int channels, double epsilon) {
  BatchNormSpec bn;
  bn.gamma.assign(channels, 1.0);
  bn.beta.assign(channels, 0.0);
  bn.running_mean.assign(channels, 0.0);
  bn.running_var.assign(channels, 1.0 - epsilon);
  bn.epsilon = epsilon;
  return bn;
}

ComposedWindow compose_window(const LTTBlockSpec& block) {
  const auto& l1 = block.layer1;
  const auto& l2 = block.layer2;
  ComposedWindow w;
  w.window.h = (l2.kernel.h - 1) * l1.stride.h + l1.kernel.h;
  w.window.w = (l2.kernel.w - 1) * l1.stride.w + l1.kernel.w;
  w.stride.h = l1.stride.h * l2.stride.h;
  w.stride.w = l1.stride.w * l2.stride.w;
  w.pad_h = l1.padding;
  w.pad_w = l1.dims == 2 ? l1.padding : 0;
  return w;
}

namespace {

int conv_out(int length, int pad, int kernel, int stride) {
  const int span = length + 2 * pad - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

}  // namespace

HeadShape head_shape(const HeadSpec& head, const InputShape& input) {
  if (head.is_identity()) return {input.channels, input.h, input.w};
  const auto& b = head.block();
  const auto& l1 = b.layer1;
  const auto& l2 = b.layer2;
  const int pw = l1.dims == 2 ? l1.padding : 0;
  const int h1 = conv_out(input.h, l1.padding, l1.kernel.h, l1.stride.h);
  const int w1 = conv_out(input.w, pw, l1.kernel.w, l1.stride.w);
  return {l2.out_channels, conv_out(h1, 0, l2.kernel.h, l2.stride.h),
          conv_out(w1, 0, l2.kernel.w, l2.stride.w)};
}

int total_head_features(const ModelSpec& m) {
  int total = 0;
  for (const auto& h : m.heads) total += head_shape(h, m.input_shape).features();
  return total;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void check_finite(const std::vector<double>& v, const std::string& field) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw InvariantError(field + "[" + std::to_string(i) + "]", "value is not finite");
    }
  }
}

void validate_conv(const ConvLayerSpec& l, const std::string& where) {
  if (l.dims != 1 && l.dims != 2) throw InvariantError(where + ".dims", "must be 1 or 2");
  if (l.in_channels < 1) throw InvariantError(where + ".in_channels", "must be >= 1");
  if (l.out_channels < 1) throw InvariantError(where + ".out_channels", "must be >= 1");
  if (l.groups < 1) throw InvariantError(where + ".groups", "must be >= 1");
  if (l.in_channels % l.groups != 0) {
    throw InvariantError(where + ".groups", "in_channels " + std::to_string(l.in_channels) +
                                                " not divisible by groups " +
                                                std::to_string(l.groups));
  }
  if (l.out_channels % l.groups != 0) {
    throw InvariantError(where + ".groups", "out_channels " + std::to_string(l.out_channels) +
                                                " not divisible by groups " +
                                                std::to_string(l.groups));
  }
  if (l.kernel.h < 1 || l.kernel.w < 1) throw InvariantError(where + ".kernel", "must be >= 1");
  if (l.stride.h < 1 || l.stride.w < 1) throw InvariantError(where + ".stride", "must be >= 1");
  if (l.padding < 0) throw InvariantError(where + ".padding", "must be >= 0");
  if (l.dims == 1 && (l.kernel.w != 1 || l.stride.w != 1)) {
    throw InvariantError(where + ".kernel", "1-D layer must have unit width kernel and stride");
  }
  if (l.weights.size() != l.expected_weight_count()) {
    throw InvariantError(where + ".weights",
                         "expected " + std::to_string(l.expected_weight_count()) +
                             " values [out][in/groups][kh][kw], got " +
                             std::to_string(l.weights.size()));
  }
  check_finite(l.weights, where + ".weights");
}

void validate_bn(const BatchNormSpec& bn, int channels, const std::string& where) {
  const std::size_t n = static_cast<std::size_t>(channels);
  if (bn.gamma.size() != n || bn.beta.size() != n || bn.running_mean.size() != n ||
      bn.running_var.size() != n) {
    throw InvariantError(where, "all vectors must have length " + std::to_string(channels));
  }
  if (!std::isfinite(bn.epsilon)) throw InvariantError(where + ".epsilon", "not finite");
  check_finite(bn.gamma, where + ".gamma");
  check_finite(bn.beta, where + ".beta");
  check_finite(bn.running_mean, where + ".running_mean");
  check_finite(bn.running_var, where + ".running_var");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(bn.running_var[i] + bn.epsilon > 0.0)) {
      throw InvariantError(where + ".running_var[" + std::to_string(i) + "]",
                           "running_var + epsilon must be > 0");
    }
  }
}

}  // namespace

void validate_block(const LTTBlockSpec& b, const std::string& where, bool strict_kernel_one) {
  validate_conv(b.layer1, where + ".layer1");
  validate_conv(b.layer2, where + ".layer2");
  if (b.layer1.dims != b.layer2.dims) {
    throw InvariantError(where + ".layer2.dims", "must equal layer1.dims");
  }
  if (b.layer1.out_channels != b.layer2.in_channels) {
    throw InvariantError(where + ".layer2.in_channels",
                         "must equal layer1.out_channels (" +
                             std::to_string(b.layer1.out_channels) + ")");
  }
  if (strict_kernel_one && (b.layer2.kernel.h != 1 || b.layer2.kernel.w != 1)) {
    throw InvariantError(where + ".layer2.kernel",
                         "amplification layer must have kernel size 1, got (" +
                             std::to_string(b.layer2.kernel.h) + "," +
                             std::to_string(b.layer2.kernel.w) + ")");
  }
  if (b.layer2.padding != 0) {
    throw InvariantError(where + ".layer2.padding",
                         "padding of the second layer would feed non-binary constants");
  }
  validate_bn(b.bn1, b.layer1.out_channels, where + ".bn1");
  validate_bn(b.bn2, b.layer2.out_channels, where + ".bn2");

  const ChannelSets sets = channel_sets(b);
  for (const auto& s : sets.sets) {
    if (s.size() != sets.sets.front().size()) {
      throw InvariantError(where, "grouping gives output channels receptive fields of different "
                                  "channel counts");
    }
  }
  const int n = receptive_bits(b);
  if (n > kMaxLutBits) {
    throw ConstraintError(where, "receptive field of " + std::to_string(n) +
                                     " bits exceeds the 16-bit lookup-table input limit");
  }
}

void validate_model(const ModelSpec& m) {
  const auto& in = m.input_shape;
  if (in.channels < 1 || in.h < 1 || in.w < 1) {
    throw InvariantError("input_shape", "all dimensions must be >= 1");
  }
  if (m.front_end.kind == FrontEnd::Kind::Binarize) {
    if (!m.front_end.thresholds.empty() &&
        m.front_end.thresholds.size() != static_cast<std::size_t>(in.size())) {
      throw InvariantError("front_end.thresholds",
                           "expected " + std::to_string(in.size()) + " thresholds, got " +
                               std::to_string(m.front_end.thresholds.size()));
    }
    check_finite(m.front_end.thresholds, "front_end.thresholds");
  } else if (!m.front_end.thresholds.empty()) {
    throw InvariantError("front_end.thresholds", "precomputed_binary front end takes no thresholds");
  }
  if (m.heads.empty()) throw InvariantError("heads", "at least one head is required");

  for (std::size_t i = 0; i < m.heads.size(); ++i) {
    const auto& h = m.heads[i];
    const std::string where = "heads[" + std::to_string(i) + "]";
    if (!h.is_identity()) {
      const auto& b = h.block();
      validate_block(b, where, true);
      if (b.layer1.in_channels != in.channels) {
        throw InvariantError(where + ".layer1.in_channels",
                             "must equal input channels (" + std::to_string(in.channels) + ")");
      }
    }
    const HeadShape hs = head_shape(h, in);
    if (hs.patch_count() < 1) {
      throw InvariantError(where, "receptive field does not fit the input shape");
    }
    if (!h.shuffle.empty()) {
      if (h.shuffle.size() != static_cast<std::size_t>(hs.channels)) {
        throw InvariantError(where + ".shuffle", "length must equal head channels (" +
                                                     std::to_string(hs.channels) + ")");
      }
      std::vector<bool> seen(hs.channels, false);
      for (int v : h.shuffle) {
        if (v < 0 || v >= hs.channels || seen[v]) {
          throw InvariantError(where + ".shuffle", "not a permutation");
        }
        seen[v] = true;
      }
    }
  }

  const auto& lin = m.linear;
  if (lin.classes < 1) throw InvariantError("linear.classes", "must be >= 1");
  const int produced = total_head_features(m);
  if (lin.features != produced) {
    throw InvariantError("linear.features", "heads produce " + std::to_string(produced) +
                                                " features, linear layer declares " +
                                                std::to_string(lin.features));
  }
  if (lin.weights.size() != static_cast<std::size_t>(lin.classes) * lin.features) {
    throw InvariantError("linear.weights", "expected [classes][features] matrix");
  }
  check_finite(lin.weights, "linear.weights");
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

Extent2 parse_extent(const json& j, int dims, const std::string& path) {
  if (j.is_number_integer()) {
    const int v = detail::get_count(j, path, 1);
    return dims == 1 ? Extent2{v, 1} : Extent2{v, v};
  }
  const auto v = detail::get_ints(j, path);
  if (v.size() == 1 && dims == 1) return {v[0], 1};
  if (v.size() != 2) throw SchemaError(path, "expected an integer or [h, w]");
  return {v[0], v[1]};
}

json extent_json(const Extent2& e, int dims) {
  if (dims == 1 && e.w == 1) return e.h;
  return json::array({e.h, e.w});
}

void flatten_weights(const json& j, int depth, std::vector<double>& out, const std::string& path) {
  if (depth == 0) {
    out.push_back(detail::get_real(j, path));
    return;
  }
  if (!j.is_array()) throw SchemaError(path, "expected nested weight arrays");
  for (std::size_t i = 0; i < j.size(); ++i) {
    flatten_weights(j[i], depth - 1, out, path + "[" + std::to_string(i) + "]");
  }
}

int nesting_depth(const json& j) {
  int d = 0;
  const json* cur = &j;
  while (cur->is_array() && !cur->empty()) {
    ++d;
    cur = &(*cur)[0];
  }
  return cur->is_array() ? d + 1 : d;
}

ConvLayerSpec parse_conv(const json& j, const std::string& path) {
  ConvLayerSpec l;
  l.dims = j.contains("dims") ? detail::get_count(j["dims"], path + ".dims", 1) : 1;
  l.in_channels = detail::get_count(detail::require(j, "in_channels", path), path + ".in_channels");
  l.out_channels =
      detail::get_count(detail::require(j, "out_channels", path), path + ".out_channels");
  l.kernel = parse_extent(detail::require(j, "kernel", path), l.dims, path + ".kernel");
  l.stride = j.contains("stride") ? parse_extent(j["stride"], l.dims, path + ".stride") : Extent2{};
  l.groups = j.contains("groups") ? detail::get_count(j["groups"], path + ".groups") : 1;
  l.padding = j.contains("padding") ? detail::get_count(j["padding"], path + ".padding") : 0;
  const auto& w = detail::require(j, "weights", path);
  const int depth = nesting_depth(w);
  if (depth != 4 && !(l.dims == 1 && depth == 3)) {
    throw SchemaError(path + ".weights",
                      l.dims == 1 ? "expected [out][in][k] or [out][in][kh][kw] arrays"
                                  : "expected [out][in][kh][kw] arrays");
  }
  flatten_weights(w, depth, l.weights, path + ".weights");
  return l;
}

json conv_json(const ConvLayerSpec& l) {
  json w = json::array();
  std::size_t idx = 0;
  for (int o = 0; o < l.out_channels; ++o) {
    json per_out = json::array();
    for (int i = 0; i < l.in_per_group(); ++i) {
      json rows = json::array();
      for (int y = 0; y < l.kernel.h; ++y) {
        if (l.dims == 1 && l.kernel.w == 1) {
          rows.push_back(l.weights[idx++]);
        } else {
          json row = json::array();
          for (int x = 0; x < l.kernel.w; ++x) row.push_back(l.weights[idx++]);
          rows.push_back(std::move(row));
        }
      }
      per_out.push_back(std::move(rows));
    }
    w.push_back(std::move(per_out));
  }
  return {{"dims", l.dims},
          {"in_channels", l.in_channels},
          {"out_channels", l.out_channels},
          {"kernel", extent_json(l.kernel, l.dims)},
          {"stride", extent_json(l.stride, l.dims)},
          {"groups", l.groups},
          {"padding", l.padding},
          {"weights", std::move(w)}};
}

BatchNormSpec parse_bn(const json& j, const std::string& path) {
  BatchNormSpec bn;
  bn.gamma = detail::get_reals(detail::require(j, "gamma", path), path + ".gamma");
  bn.beta = detail::get_reals(detail::require(j, "beta", path), path + ".beta");
  bn.running_mean =
      detail::get_reals(detail::require(j, "running_mean", path), path + ".running_mean");
  bn.running_var =
      detail::get_reals(detail::require(j, "running_var", path), path + ".running_var");
  bn.epsilon = detail::get_real(detail::require(j, "epsilon", path), path + ".epsilon");
  return bn;
}

json bn_json(const BatchNormSpec& bn) {
  return {{"gamma", bn.gamma},
          {"beta", bn.beta},
          {"running_mean", bn.running_mean},
          {"running_var", bn.running_var},
          {"epsilon", bn.epsilon}};
}

HeadSpec parse_head(const json& j, const std::string& path) {
  HeadSpec h;
  const std::string kind = detail::get_string(detail::require(j, "kind", path), path + ".kind");
  if (kind == "identity") {
    h.body = IdentityHead{};
  } else if (kind == "ltt") {
    if (j.contains("activation") && j["activation"] != "selu") {
      throw SchemaError(path + ".activation", "only \"selu\" is supported");
    }
    if (j.contains("output") && j["output"] != "bin_act") {
      throw SchemaError(path + ".output", "only \"bin_act\" is supported");
    }
    LTTBlockSpec b;
    b.layer1 = parse_conv(detail::require(j, "layer1", path), path + ".layer1");
    b.bn1 = parse_bn(detail::require(j, "bn1", path), path + ".bn1");
    b.layer2 = parse_conv(detail::require(j, "layer2", path), path + ".layer2");
    b.bn2 = parse_bn(detail::require(j, "bn2", path), path + ".bn2");
    h.body = std::move(b);
  } else {
    throw SchemaError(path + ".kind", "unknown head kind \"" + kind + "\"");
  }
  if (j.contains("shuffle") && !j["shuffle"].is_null()) {
    h.shuffle = detail::get_ints(j["shuffle"], path + ".shuffle");
  }
  return h;
}

json head_json(const HeadSpec& h) {
  json j;
  if (h.is_identity()) {
    j["kind"] = "identity";
  } else {
    const auto& b = h.block();
    j["kind"] = "ltt";
    j["layer1"] = conv_json(b.layer1);
    j["bn1"] = bn_json(b.bn1);
    j["activation"] = "selu";
    j["layer2"] = conv_json(b.layer2);
    j["bn2"] = bn_json(b.bn2);
    j["output"] = "bin_act";
  }
  if (!h.shuffle.empty()) j["shuffle"] = h.shuffle;
  return j;
}

}  // namespace

ModelSpec parse_model(std::string_view text) {
  const json j = detail::parse_json(text, "model");
  if (!j.is_object()) throw SchemaError("model", "top level must be an object");
  if (j.contains("format") && j["format"] != "ttir") {
    throw SchemaError("format", "not a ttir model document");
  }
  if (j.contains("version") && j["version"] != 1) {
    throw SchemaError("version", "unsupported model version");
  }
  ModelSpec m;

  const auto& shape = detail::require(j, "input_shape", "model");
  if (shape.is_number_integer()) {
    m.input_shape = {1, detail::get_count(shape, "input_shape", 1), 1};
  } else {
    const auto v = detail::get_ints(shape, "input_shape");
    if (v.size() != 3) throw SchemaError("input_shape", "expected a count or [channels, h, w]");
    m.input_shape = {v[0], v[1], v[2]};
  }

  const auto& fe = detail::require(j, "front_end", "model");
  const std::string kind = detail::get_string(detail::require(fe, "kind", "front_end"),
                                              "front_end.kind");
  if (kind == "binarize") {
    m.front_end.kind = FrontEnd::Kind::Binarize;
    if (fe.contains("thresholds")) {
      m.front_end.thresholds = detail::get_reals(fe["thresholds"], "front_end.thresholds");
    }
  } else if (kind == "precomputed_binary") {
    m.front_end.kind = FrontEnd::Kind::PrecomputedBinary;
  } else {
    throw SchemaError("front_end.kind", "unknown front end \"" + kind + "\"");
  }

  const auto& heads = detail::require(j, "heads", "model");
  if (!heads.is_array()) throw SchemaError("heads", "expected an array");
  for (std::size_t i = 0; i < heads.size(); ++i) {
    m.heads.push_back(parse_head(heads[i], "heads[" + std::to_string(i) + "]"));
  }

  const auto& lin = detail::require(j, "linear", "model");
  m.linear.classes = detail::get_count(detail::require(lin, "classes", "linear"), "linear.classes");
  m.linear.features =
      detail::get_count(detail::require(lin, "features", "linear"), "linear.features");
  const auto& w = detail::require(lin, "weights", "linear");
  if (!w.is_array() || w.size() != static_cast<std::size_t>(m.linear.classes)) {
    throw SchemaError("linear.weights", "expected one row per class");
  }
  for (std::size_t c = 0; c < w.size(); ++c) {
    const auto row = detail::get_reals(w[c], "linear.weights[" + std::to_string(c) + "]");
    if (row.size() != static_cast<std::size_t>(m.linear.features)) {
      throw SchemaError("linear.weights[" + std::to_string(c) + "]",
                        "row length must equal linear.features");
    }
    m.linear.weights.insert(m.linear.weights.end(), row.begin(), row.end());
  }

  if (j.contains("metadata")) {
    const auto& md = j["metadata"];
    if (md.contains("name")) m.metadata.name = detail::get_string(md["name"], "metadata.name");
    if (md.contains("dataset")) {
      m.metadata.dataset = detail::get_string(md["dataset"], "metadata.dataset");
    }
  }

  validate_model(m);
  return m;
}

std::string serialize_model(const ModelSpec& m) {
  json j;
  j["format"] = "ttir";
  j["version"] = 1;
  j["metadata"] = {{"name", m.metadata.name}, {"dataset", m.metadata.dataset}};
  j["input_shape"] = {m.input_shape.channels, m.input_shape.h, m.input_shape.w};
  if (m.front_end.kind == FrontEnd::Kind::Binarize) {
    j["front_end"] = {{"kind", "binarize"}};
    if (!m.front_end.thresholds.empty()) j["front_end"]["thresholds"] = m.front_end.thresholds;
  } else {
    j["front_end"] = {{"kind", "precomputed_binary"}};
  }
  j["heads"] = json::array();
  for (const auto& h : m.heads) j["heads"].push_back(head_json(h));
  json rows = json::array();
  for (int c = 0; c < m.linear.classes; ++c) {
    auto first = m.linear.weights.begin() + static_cast<std::ptrdiff_t>(c) * m.linear.features;
    rows.push_back(std::vector<double>(first, first + m.linear.features));
  }
  j["linear"] = {{"classes", m.linear.classes},
                 {"features", m.linear.features},
                 {"weights", std::move(rows)}};
  return j.dump(1) + "\n";
}

ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "cannot open model file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

void save_model(const ModelSpec& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError(path.string(), "cannot write model file");
  out << serialize_model(m);
}

std::vector<std::uint8_t> binarize_input(const FrontEnd& fe, std::span<const double> input) {
  std::vector<std::uint8_t> bits(input.size());
  if (!fe.thresholds.empty() && fe.thresholds.size() != input.size()) {
    throw ShapeError("input", "expected " + std::to_string(fe.thresholds.size()) +
                                  " values, got " + std::to_string(input.size()));
  }
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double t = fe.thresholds.empty() ? 0.0 : fe.thresholds[i];
    bits[i] = bin_act(input[i] - t);
  }
  return bits;
}

}  // namespace ttc
