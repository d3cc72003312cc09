#include "ttc/protocol.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "ttc/backend.hpp"
#include "ttc/codec.hpp"
#include "ttc/engine.hpp"
#include "ttc/error.hpp"

namespace ttc {

using detail::json;

const char* setting_name(Setting s) { return s == Setting::FullPr ? "full" : "split"; }

Setting parse_setting(const std::string& s) {
  if (s == "full" || s == "full-pr" || s == "fullpr") return Setting::FullPr;
  if (s == "split") return Setting::SplitFeatures;
  throw SchemaError("setting", "unknown setting '" + s + "' (expected full or split)");
}

// ---------------------------------------------------------------------------
// Message bodies

namespace {

json request_json(const InferenceRequest& r) {
  return {{"model_id", r.model_id},
          {"setting", setting_name(r.setting)},
          {"bits", r.payload.size()},
          {"payload", codec::base64_encode(codec::pack_bits(r.payload))},
          {"nonce", r.nonce}};
}

json response_json(const InferenceResponse& r) {
  json calls = json::object();
  for (const auto& [bw, n] : r.trace.lut_calls_by_bitwidth) calls[std::to_string(bw)] = n;
  return {{"nonce", r.nonce},
          {"model_id", r.model_id},
          {"model_version", r.model_version},
          {"partials", r.partials},
          {"trace",
           {{"lut_calls_by_bitwidth", calls},
            {"max_bitwidth", r.trace.max_bitwidth},
            {"max_accumulator", r.trace.max_accumulator}}}};
}

std::uint64_t get_nonce(const json& j) {
  const json& v = detail::require(j, "nonce", "message");
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw SchemaError("message.nonce", "expected an unsigned integer");
  }
  return v.get<std::uint64_t>();
}

InferenceRequest parse_request(const json& j) {
  using namespace detail;
  InferenceRequest r;
  r.model_id = get_string(require(j, "model_id", "request"), "request.model_id");
  r.setting = parse_setting(get_string(require(j, "setting", "request"), "request.setting"));
  const int bits = get_count(require(j, "bits", "request"), "request.bits");
  const auto bytes = codec::base64_decode(get_string(require(j, "payload", "request"), "request.payload"));
  r.payload = codec::unpack_bits(bytes, static_cast<std::size_t>(bits));
  r.nonce = get_nonce(j);
  return r;
}

InferenceResponse parse_response(const json& j) {
  using namespace detail;
  InferenceResponse r;
  r.nonce = get_nonce(j);
  r.model_id = get_string(require(j, "model_id", "response"), "response.model_id");
  r.model_version = get_string(require(j, "model_version", "response"), "response.model_version");
  const json& parts = require(j, "partials", "response");
  if (!parts.is_array()) throw SchemaError("response.partials", "expected an array");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string p = "response.partials[" + std::to_string(i) + "]";
    if (!parts[i].is_array()) throw SchemaError(p, "expected an array of integers");
    std::vector<std::int64_t> row;
    for (std::size_t k = 0; k < parts[i].size(); ++k) row.push_back(get_int(parts[i][k], p));
    r.partials.push_back(std::move(row));
  }
  const json& t = require(j, "trace", "response");
  const json& calls = require(t, "lut_calls_by_bitwidth", "response.trace");
  if (!calls.is_object()) throw SchemaError("response.trace.lut_calls_by_bitwidth", "expected an object");
  for (auto it = calls.begin(); it != calls.end(); ++it) {
    int bw = 0;
    try {
      bw = std::stoi(it.key());
    } catch (const std::exception&) {
      throw SchemaError("response.trace.lut_calls_by_bitwidth", "bad bitwidth key");
    }
    r.trace.lut_calls_by_bitwidth[bw] =
        static_cast<std::uint64_t>(get_int(it.value(), "response.trace.lut_calls_by_bitwidth"));
  }
  r.trace.max_bitwidth = get_count(require(t, "max_bitwidth", "response.trace"), "response.trace.max_bitwidth");
  r.trace.max_accumulator = get_int(require(t, "max_accumulator", "response.trace"), "response.trace.max_accumulator");
  return r;
}

FrameType type_of(const Message& m) {
  switch (m.index()) {
    case 0: return FrameType::Request;
    case 1: return FrameType::Response;
    default: return FrameType::Error;
  }
}

}  // namespace

std::string message_body(const Message& m) {
  if (auto* r = std::get_if<InferenceRequest>(&m)) return request_json(*r).dump();
  if (auto* r = std::get_if<InferenceResponse>(&m)) return response_json(*r).dump();
  const auto& e = std::get<ErrorMessage>(m);
  return json{{"nonce", e.nonce}, {"kind", e.kind}, {"message", e.message}}.dump();
}

Message parse_message_body(FrameType type, std::string_view body) {
  json j;
  try {
    j = json::parse(body.begin(), body.end());
  } catch (const json::parse_error& e) {
    throw FrameError("body", std::string("malformed message body: ") + e.what());
  }
  try {
    switch (type) {
      case FrameType::Request: return parse_request(j);
      case FrameType::Response: return parse_response(j);
      case FrameType::Error: {
        ErrorMessage e;
        e.nonce = get_nonce(j);
        e.kind = detail::get_string(detail::require(j, "kind", "error"), "error.kind");
        e.message = detail::get_string(detail::require(j, "message", "error"), "error.message");
        return e;
      }
    }
  } catch (const SchemaError& e) {
    throw FrameError(e.field(), e.what());
  }
  throw FrameError("type", "unknown message type " + std::to_string(static_cast<int>(type)));
}

namespace {

FrameType check_type(std::uint8_t t) {
  if (t < 1 || t > 3) throw FrameError("type", "unknown message type " + std::to_string(t));
  return static_cast<FrameType>(t);
}

std::uint32_t read_length(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

}  // namespace

std::vector<std::uint8_t> frame_encode(const Message& m) {
  const std::string body = message_body(m);
  if (body.size() > kMaxFrameBody) throw FrameError("body", "message too large");
  const auto len = static_cast<std::uint32_t>(body.size());
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + body.size());
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.push_back(static_cast<std::uint8_t>(type_of(m)));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Message frame_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw FrameError("frame", "truncated header");
  const std::uint32_t len = read_length(bytes.data());
  if (len > kMaxFrameBody) throw FrameError("frame", "body length exceeds limit");
  const FrameType type = check_type(bytes[4]);
  if (bytes.size() < kFrameHeaderSize + len) throw FrameError("frame", "truncated body");
  if (bytes.size() > kFrameHeaderSize + len) throw FrameError("frame", "trailing bytes after frame");
  const auto* body = reinterpret_cast<const char*>(bytes.data() + kFrameHeaderSize);
  return parse_message_body(type, {body, len});
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
  if (buffer_.size() < kFrameHeaderSize) return std::nullopt;
  const std::uint32_t len = read_length(buffer_.data());
  if (len > kMaxFrameBody) throw FrameError("frame", "body length exceeds limit");
  check_type(buffer_[4]);
  const std::size_t total = kFrameHeaderSize + len;
  if (buffer_.size() < total) return std::nullopt;
  Message m = frame_decode({buffer_.data(), total});
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(total));
  return m;
}

// ---------------------------------------------------------------------------
// Client

ClientManifest manifest_of(const Circuit& c, std::string model_id) {
  ClientManifest m;
  m.model_id = std::move(model_id);
  m.input_shape = c.input_shape;
  m.front_end = c.front_end;
  m.classes = c.classes();
  m.weight_bits = c.quant.bits;
  m.scale = c.quant.scale;
  return m;
}

namespace {

void check_setting(const FrontEnd& fe, Setting setting) {
  const bool split = fe.kind == FrontEnd::Kind::PrecomputedBinary;
  if (split != (setting == Setting::SplitFeatures)) {
    throw ShapeError("setting", std::string("model expects the ") +
                                    (split ? "split" : "full") + " setting, request declares " +
                                    setting_name(setting));
  }
}

void check_width(std::size_t actual, const InputShape& shape) {
  if (actual != static_cast<std::size_t>(shape.size())) {
    throw ShapeError("payload", "expected " + std::to_string(shape.size()) + " bits, got " +
                                    std::to_string(actual));
  }
}

}  // namespace

InferenceRequest client_encode_bits(std::span<const std::uint8_t> bits,
                                    const ClientManifest& manifest, Setting setting,
                                    std::uint64_t nonce) {
  check_setting(manifest.front_end, setting);
  check_width(bits.size(), manifest.input_shape);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw ShapeError("payload[" + std::to_string(i) + "]", "not a binary value");
  }
  InferenceRequest r;
  r.model_id = manifest.model_id;
  r.setting = setting;
  r.payload.assign(bits.begin(), bits.end());
  r.nonce = nonce;
  return r;
}

InferenceRequest client_encode(std::span<const double> input, const ClientManifest& manifest,
                               Setting setting, std::uint64_t nonce) {
  check_setting(manifest.front_end, setting);
  check_width(input.size(), manifest.input_shape);
  std::vector<std::uint8_t> bits;
  if (setting == Setting::FullPr) {
    bits = binarize_input(manifest.front_end, input);
  } else {
    for (std::size_t i = 0; i < input.size(); ++i) {
      if (input[i] != 0.0 && input[i] != 1.0) {
        throw ShapeError("input[" + std::to_string(i) + "]", "precomputed features must be 0 or 1");
      }
      bits.push_back(input[i] == 1.0 ? 1 : 0);
    }
  }
  return client_encode_bits(bits, manifest, setting, nonce);
}

ClientResult client_finalize(const InferenceResponse& resp, double scale) {
  if (resp.partials.empty()) throw ShapeError("partials", "response carries no planes");
  const std::size_t classes = resp.partials.front().size();
  if (classes == 0) throw ShapeError("partials", "response carries no classes");
  ClientResult r;
  r.int_scores = recombine_integer(resp.partials);
  r.scores.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) r.scores[c] = scale * static_cast<double>(r.int_scores[c]);
  r.label = argmax(r.scores);
  return r;
}

ClientResult client_finalize(const InferenceResponse& resp, const ClientManifest& manifest) {
  if (resp.partials.size() != static_cast<std::size_t>(manifest.weight_bits)) {
    throw ShapeError("partials", "expected " + std::to_string(manifest.weight_bits) + " planes, got " +
                                     std::to_string(resp.partials.size()));
  }
  for (const auto& plane : resp.partials) {
    if (plane.size() != static_cast<std::size_t>(manifest.classes)) {
      throw ShapeError("partials", "expected " + std::to_string(manifest.classes) + " classes per plane");
    }
  }
  return client_finalize(resp, manifest.scale);
}

// ---------------------------------------------------------------------------
// Server

void ModelRegistry::add(std::string id, Circuit circuit) {
  auto entry = std::make_shared<Entry>();
  entry->version = circuit_version(circuit);
  entry->circuit = std::move(circuit);
  models_[std::move(id)] = std::move(entry);
}

const Circuit* ModelRegistry::find(const std::string& id) const {
  auto it = models_.find(id);
  return it == models_.end() ? nullptr : &it->second->circuit;
}

const std::string& ModelRegistry::version(const std::string& id) const {
  auto it = models_.find(id);
  if (it == models_.end()) throw UnknownModel("model_id", "no model '" + id + "'");
  return it->second->version;
}

std::vector<std::string> ModelRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, e] : models_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

Circuit load_model_or_circuit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const json j = detail::parse_json(text, path.string());
  if (j.is_object() && j.contains("format") && j["format"] == "ttc-circuit") return parse_circuit(text);
  return compile(parse_model(text));
}

ModelRegistry ModelRegistry::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw SchemaError(dir.string(), "not a directory");
  ModelRegistry reg;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) reg.add(f.stem().string(), load_model_or_circuit(f));
  return reg;
}

InferenceResponse server_infer(const ModelRegistry& registry, const InferenceRequest& req) {
  const Circuit* c = registry.find(req.model_id);
  if (!c) throw UnknownModel("model_id", "no model '" + req.model_id + "'");
  check_setting(c->front_end, req.setting);
  check_width(req.payload.size(), c->input_shape);

  StubBackend backend;
  const auto inputs = backend.encode(req.payload);
  const EncryptedPartials enc = eval_backend(*c, backend, inputs);

  InferenceResponse r;
  r.nonce = req.nonce;
  r.model_id = req.model_id;
  r.model_version = registry.version(req.model_id);
  r.partials.assign(enc.planes.size(), std::vector<std::int64_t>());
  for (std::size_t p = 0; p < enc.planes.size(); ++p) {
    for (const Ciphertext& ct : enc.planes[p]) r.partials[p].push_back(backend.decode(ct));
  }
  r.trace.lut_calls_by_bitwidth = enc.trace.lut_calls_by_bitwidth;
  r.trace.max_bitwidth = enc.trace.max_bitwidth_touched;
  r.trace.max_accumulator = enc.trace.max_accumulator_value;
  return r;
}

Message server_handle(const ModelRegistry& registry, const Message& incoming) {
  const auto* req = std::get_if<InferenceRequest>(&incoming);
  if (!req) {
    std::uint64_t nonce = 0;
    if (auto* r = std::get_if<InferenceResponse>(&incoming)) nonce = r->nonce;
    if (auto* e = std::get_if<ErrorMessage>(&incoming)) nonce = e->nonce;
    return ErrorMessage{nonce, "FrameError", "server accepts only inference requests"};
  }
  try {
    return server_infer(registry, *req);
  } catch (const Error& e) {
    return ErrorMessage{req->nonce, e.kind(), e.what()};
  }
}

}  // namespace ttc
