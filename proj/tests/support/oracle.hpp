#pragma once

// Reference computations written directly from the layer definitions,
// without the library's patch geometry, table store or chunk plans.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ttc/ttir.hpp"

namespace oracle {

// Whole-tensor forward of conv1 -> bn1 -> SeLU -> conv2 -> bn2 -> step on a
// [C][H][W] bit tensor; returns bits [out_ch][oh][ow] and the output dims.
struct HeadOutput {
  std::vector<std::uint8_t> bits;
  std::vector<double> pre;
  int channels = 0;
  int h = 0;
  int w = 0;
};
HeadOutput block_forward(const ttc::LTTBlockSpec& b, const ttc::InputShape& in,
                         std::span<const std::uint8_t> x);

// Concatenated features of every head in flatten order, shuffle applied.
std::vector<std::uint8_t> model_features(const ttc::ModelSpec& m, std::span<const std::uint8_t> x);

// sign(w) * floor(|w| / scale + 1/2), clamped to [-8, 7].
int quantize_4bit(double w, double scale);

// Integer scores sum_f q[c][f] * feature[f] from 4-bit quantized weights.
std::vector<std::int64_t> int_scores(const ttc::LinearLayerSpec& lin, std::span<const std::uint8_t> f);
double scale_4bit(const ttc::LinearLayerSpec& lin);

struct RandomModelOptions {
  int min_n = 2;
  int max_n = 6;
  int max_heads = 3;
  bool allow_identity = true;
  bool allow_shuffle = true;
  int classes_max = 4;
};

ttc::LTTBlockSpec random_block_with_n(std::mt19937_64& rng, int n, int in_channels, int dims);
ttc::ModelSpec random_model(std::mt19937_64& rng, const RandomModelOptions& opt = {});
std::vector<std::uint8_t> random_bits(std::mt19937_64& rng, std::size_t n);

}  // namespace oracle
