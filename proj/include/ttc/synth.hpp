#pragma once

// Randomly weighted models with the layer shapes of the reference
// architectures. Used by the CLI, benchmarks and property tests; the
// weights carry no trained meaning.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ttc/ttir.hpp"

namespace ttc {

struct BlockShape {
  int dims = 2;
  int in_channels = 1;
  int hidden_channels = 4;  // layer1 out_channels
  int out_channels = 1;
  Extent2 kernel{2, 2};
  Extent2 stride{1, 1};
  int groups = 1;           // shared by both layers
  int padding = 0;
  Extent2 kernel2{1, 1};
};

LTTBlockSpec random_block(const BlockShape& shape, std::mt19937_64& rng);

// Weights of magnitude [0.1, 1] with random sign; `active` features
// (0 = all) keep nonzero columns.
LinearLayerSpec random_linear(int classes, int features, int active, std::mt19937_64& rng);

std::vector<std::string> synth_architectures();
// Throws SchemaError for an unknown name.
ModelSpec synth_model(const std::string& arch, std::uint64_t seed);

}  // namespace ttc
