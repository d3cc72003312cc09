#pragma once

// Model intermediate representation: the binarization front end, a single
// layer of parallel heads (LTT blocks or identity), and the final float
// linear layer. Immutable after parse.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ttc {

struct Extent2 {
  int h = 1;
  int w = 1;

  int area() const { return h * w; }
  bool operator==(const Extent2&) const = default;
};

struct ConvLayerSpec {
  int in_channels = 1;
  int out_channels = 1;
  Extent2 kernel;
  Extent2 stride;
  int groups = 1;
  int padding = 0;  // zero fill; along h only when dims == 1
  int dims = 1;
  std::vector<double> weights;  // [out][in / groups][kh][kw], row-major

  int in_per_group() const { return in_channels / groups; }
  int out_per_group() const { return out_channels / groups; }
  std::size_t expected_weight_count() const;
  double weight(int out, int in_local, int ky, int kx) const {
    return weights[((static_cast<std::size_t>(out) * in_per_group() + in_local) *
                        kernel.h + ky) * kernel.w + kx];
  }
  bool operator==(const ConvLayerSpec&) const = default;
};

struct BatchNormSpec {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;

  std::size_t channels() const { return gamma.size(); }
  // Inference-mode normalization of channel `c`.
  double apply(int c, double x) const;
  bool operator==(const BatchNormSpec&) const = default;

  static BatchNormSpec identity(int channels, double epsilon = 0.0);
};

// conv1 -> bn1 -> SeLU -> conv2 -> bn2 -> bin_act
struct LTTBlockSpec {
  ConvLayerSpec layer1;
  BatchNormSpec bn1;
  ConvLayerSpec layer2;
  BatchNormSpec bn2;

  int expansion() const { return layer1.out_channels / layer1.in_channels; }
  int out_channels() const { return layer2.out_channels; }
  bool operator==(const LTTBlockSpec&) const = default;
};

struct IdentityHead {
  bool operator==(const IdentityHead&) const = default;
};

struct HeadSpec {
  std::variant<LTTBlockSpec, IdentityHead> body;
  // Output channel c of the head is pre-shuffle channel shuffle[c].
  std::vector<int> shuffle;

  bool is_identity() const { return std::holds_alternative<IdentityHead>(body); }
  const LTTBlockSpec& block() const { return std::get<LTTBlockSpec>(body); }
  bool operator==(const HeadSpec&) const = default;
};

struct LinearLayerSpec {
  int classes = 0;
  int features = 0;
  std::vector<double> weights;  // [classes][features]

  double at(int c, int f) const {
    return weights[static_cast<std::size_t>(c) * features + f];
  }
  bool operator==(const LinearLayerSpec&) const = default;
};

struct InputShape {
  int channels = 1;
  int h = 1;
  int w = 1;

  int size() const { return channels * h * w; }
  bool operator==(const InputShape&) const = default;
};

struct FrontEnd {
  enum class Kind { Binarize, PrecomputedBinary };
  Kind kind = Kind::Binarize;
  // One threshold per input element; empty means all zeros.
  std::vector<double> thresholds;

  bool operator==(const FrontEnd&) const = default;
};

struct ModelMetadata {
  std::string name;
  std::string dataset;
  bool operator==(const ModelMetadata&) const = default;
};

struct ModelSpec {
  InputShape input_shape;
  FrontEnd front_end;
  std::vector<HeadSpec> heads;
  LinearLayerSpec linear;
  ModelMetadata metadata;

  bool operator==(const ModelSpec&) const = default;
};

// Output geometry of one head on a given input shape.
struct HeadShape {
  int channels = 0;
  int patches_h = 0;
  int patches_w = 0;

  int patch_count() const { return patches_h * patches_w; }
  int features() const { return channels * patch_count(); }
};

// Receptive field of a two-layer block composed onto the input:
// window = (k2 - 1) * s1 + k1 and stride = s1 * s2 per spatial dim.
struct ComposedWindow {
  Extent2 window;
  Extent2 stride;
  int pad_h = 0;
  int pad_w = 0;
};
ComposedWindow compose_window(const LTTBlockSpec& block);

HeadShape head_shape(const HeadSpec& head, const InputShape& input);
int total_head_features(const ModelSpec& m);

// Checks every model invariant; throws InvariantError / ConstraintError
// naming the offending field.
void validate_model(const ModelSpec& m);

// Structural checks on a block in isolation. With `strict_kernel_one`, the
// amplification layer must be a 1x1 convolution as required for models.
void validate_block(const LTTBlockSpec& block, const std::string& where,
                    bool strict_kernel_one = true);

ModelSpec parse_model(std::string_view text);
std::string serialize_model(const ModelSpec& m);

ModelSpec load_model(const std::filesystem::path& path);
void save_model(const ModelSpec& m, const std::filesystem::path& path);

// bin_act(x - threshold) elementwise.
std::vector<std::uint8_t> binarize_input(const FrontEnd& fe,
                                          std::span<const double> input);

}  // namespace ttc
