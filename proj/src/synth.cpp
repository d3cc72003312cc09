#include "ttc/synth.hpp"

#include <algorithm>
#include <numeric>

#include "ttc/error.hpp"

namespace ttc {

namespace {

ConvLayerSpec conv(int dims, int in, int out, Extent2 k, Extent2 s, int groups, int padding,
                   std::mt19937_64& rng) {
  ConvLayerSpec l;
  l.dims = dims;
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = k;
  l.stride = s;
  l.groups = groups;
  l.padding = padding;
  std::normal_distribution<double> w(0.0, 1.0);
  l.weights.resize(l.expected_weight_count());
  for (double& v : l.weights) v = w(rng);
  return l;
}

BatchNormSpec bn(int channels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  std::normal_distribution<double> shift(0.0, 0.5);
  BatchNormSpec b;
  b.epsilon = 1e-5;
  for (int c = 0; c < channels; ++c) {
    b.gamma.push_back(pos(rng));
    b.beta.push_back(shift(rng));
    b.running_mean.push_back(shift(rng));
    b.running_var.push_back(pos(rng));
  }
  return b;
}

HeadSpec ltt_head(const BlockShape& s, std::mt19937_64& rng) {
  HeadSpec h;
  h.body = random_block(s, rng);
  return h;
}

ModelSpec finish(ModelSpec m, int classes, int active, double threshold, std::mt19937_64& rng) {
  if (m.front_end.kind == FrontEnd::Kind::Binarize) {
    m.front_end.thresholds.assign(m.input_shape.size(), threshold);
  }
  m.linear = random_linear(classes, total_head_features(m), active, rng);
  validate_model(m);
  return m;
}

}  // namespace

LTTBlockSpec random_block(const BlockShape& s, std::mt19937_64& rng) {
  LTTBlockSpec b;
  const Extent2 unit{1, 1};
  b.layer1 = conv(s.dims, s.in_channels, s.hidden_channels, s.kernel, s.stride, s.groups,
                  s.padding, rng);
  b.bn1 = bn(s.hidden_channels, rng);
  b.layer2 = conv(s.dims, s.hidden_channels, s.out_channels, s.kernel2, unit, s.groups, 0, rng);
  b.bn2 = bn(s.out_channels, rng);
  return b;
}

LinearLayerSpec random_linear(int classes, int features, int active, std::mt19937_64& rng) {
  LinearLayerSpec lin;
  lin.classes = classes;
  lin.features = features;
  // |w| >= 0.1 stays above half a 4-bit step (max / 14), so every kept
  // weight survives quantization.
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  lin.weights.resize(static_cast<std::size_t>(classes) * features);
  for (double& v : lin.weights) v = (rng() & 1 ? 1.0 : -1.0) * mag(rng);
  if (active > 0 && active < features) {
    std::vector<int> order(features);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = active; k < features; ++k) {
      for (int c = 0; c < classes; ++c) lin.weights[static_cast<std::size_t>(c) * features + order[k]] = 0.0;
    }
  }
  return lin;
}

std::vector<std::string> synth_architectures() {
  return {"adult", "cancer", "diabetes", "mnist_fullpr", "mnist_vgg1l_tt", "mnist_vgg1b_tt"};
}

ModelSpec synth_model(const std::string& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelSpec m;
  m.metadata.name = arch;

  auto tabular = [&](const char* dataset, int inputs, int kernel, int stride, int channels,
                     int classes, int active) {
    m.metadata.dataset = dataset;
    m.input_shape = {1, inputs, 1};
    BlockShape s;
    s.dims = 1;
    s.in_channels = 1;
    s.hidden_channels = 4 * channels;
    s.out_channels = channels;
    s.kernel = {kernel, 1};
    s.stride = {stride, 1};
    m.heads.push_back(ltt_head(s, rng));
    return finish(std::move(m), classes, active, 0.5, rng);
  };

  if (arch == "adult") return tabular("adult", 18, 5, 4, 70, 2, 274);
  if (arch == "cancer") return tabular("cancer", 81, 5, 4, 4, 2, 80);
  if (arch == "diabetes") return tabular("diabetes", 296, 6, 5, 5, 3, 295);

  if (arch == "mnist_fullpr") {
    m.metadata.dataset = "mnist";
    m.input_shape = {1, 20, 20};
    BlockShape s;
    s.in_channels = 1;
    s.hidden_channels = 80;
    s.out_channels = 20;
    s.kernel = {6, 1};
    s.stride = {2, 2};
    m.heads.push_back(ltt_head(s, rng));
    return finish(std::move(m), 10, 0, 0.5, rng);
  }
  if (arch == "mnist_vgg1l_tt" || arch == "mnist_vgg1b_tt") {
    const bool layer = arch == "mnist_vgg1l_tt";
    const int channels = layer ? 24 : 16;
    const int side = layer ? 8 : 7;
    m.metadata.dataset = "mnist";
    m.input_shape = {channels, side, side};
    m.front_end.kind = FrontEnd::Kind::PrecomputedBinary;
    BlockShape s;
    s.in_channels = channels;
    s.hidden_channels = 4 * channels;
    s.out_channels = channels;
    s.kernel = {2, 2};
    s.groups = channels;
    m.heads.push_back(ltt_head(s, rng));
    return finish(std::move(m), 10, 0, 0.0, rng);
  }
  throw SchemaError("arch", "unknown architecture '" + arch + "'");
}

}  // namespace ttc
