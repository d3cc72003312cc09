#pragma once

// Client/server split inference. The client binarizes (or supplies
// precomputed bits), the server evaluates the circuit and returns plane
// partial sums, and the client recombines with the scale it holds.
//
// Frames: 4-byte big-endian body length, 1-byte type, JSON body.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ttc/circuit.hpp"
#include "ttc/quant.hpp"

namespace ttc {

enum class Setting { FullPr, SplitFeatures };

const char* setting_name(Setting s);
Setting parse_setting(const std::string& s);

struct InferenceRequest {
  std::string model_id;
  Setting setting = Setting::FullPr;
  std::vector<std::uint8_t> payload;  // one bit per input element
  std::uint64_t nonce = 0;
  bool operator==(const InferenceRequest&) const = default;
};

struct TraceSummary {
  std::map<int, std::uint64_t> lut_calls_by_bitwidth;
  int max_bitwidth = 0;
  std::int64_t max_accumulator = 0;
  bool operator==(const TraceSummary&) const = default;
};

struct InferenceResponse {
  std::uint64_t nonce = 0;
  std::string model_id;
  std::string model_version;
  Partials partials;  // [plane][class]
  TraceSummary trace;
  bool operator==(const InferenceResponse&) const = default;
};

struct ErrorMessage {
  std::uint64_t nonce = 0;
  std::string kind;
  std::string message;
  bool operator==(const ErrorMessage&) const = default;
};

using Message = std::variant<InferenceRequest, InferenceResponse, ErrorMessage>;

enum class FrameType : std::uint8_t { Request = 1, Response = 2, Error = 3 };

inline constexpr std::size_t kFrameHeaderSize = 5;
inline constexpr std::uint32_t kMaxFrameBody = 64u << 20;

std::string message_body(const Message& m);
Message parse_message_body(FrameType type, std::string_view body);

std::vector<std::uint8_t> frame_encode(const Message& m);
// Decodes exactly one frame; throws FrameError on truncation, trailing bytes
// or an unknown type byte.
Message frame_decode(std::span<const std::uint8_t> bytes);

// Incremental decoder for stream transports.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Message> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::vector<std::uint8_t> buffer_;
};

// What the client needs to encode inputs and finish inference.
struct ClientManifest {
  std::string model_id;
  InputShape input_shape;
  FrontEnd front_end;
  int classes = 0;
  int weight_bits = kDefaultWeightBits;
  double scale = 1.0;
};

ClientManifest manifest_of(const Circuit& c, std::string model_id);

InferenceRequest client_encode(std::span<const double> input, const ClientManifest& manifest,
                               Setting setting, std::uint64_t nonce);
InferenceRequest client_encode_bits(std::span<const std::uint8_t> bits,
                                    const ClientManifest& manifest, Setting setting,
                                    std::uint64_t nonce);

struct ClientResult {
  std::vector<double> scores;
  std::vector<std::int64_t> int_scores;
  int label = 0;
};

ClientResult client_finalize(const InferenceResponse& resp, double scale);
ClientResult client_finalize(const InferenceResponse& resp, const ClientManifest& manifest);

// Read-only after startup.
class ModelRegistry {
 public:
  void add(std::string id, Circuit circuit);
  const Circuit* find(const std::string& id) const;
  const std::string& version(const std::string& id) const;
  std::vector<std::string> ids() const;
  std::size_t size() const { return models_.size(); }

  // Loads every *.json model or circuit file in `dir`; id is the file stem.
  static ModelRegistry load_dir(const std::filesystem::path& dir);

 private:
  struct Entry {
    Circuit circuit;
    std::string version;
  };
  std::unordered_map<std::string, std::shared_ptr<const Entry>> models_;
};

InferenceResponse server_infer(const ModelRegistry& registry, const InferenceRequest& req);

// Dispatches one decoded message; errors come back as ErrorMessage.
Message server_handle(const ModelRegistry& registry, const Message& incoming);

// Loads a model or compiled circuit file; model files are compiled.
Circuit load_model_or_circuit(const std::filesystem::path& path);

}  // namespace ttc
