#include "ttc/engine.hpp"

#include <algorithm>

#include "ttc/error.hpp"
#include "ttc/kernels.hpp"
#include "ttc/ltt.hpp"

namespace ttc {

std::uint64_t EvalTrace::total_calls() const {
  std::uint64_t n = 0;
  for (const auto& [bits, calls] : lut_calls_by_bitwidth) n += calls;
  return n;
}

int argmax(std::span<const double> scores) {
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best;
}

namespace {

void check_bits(std::span<const std::uint8_t> bits, std::size_t expected) {
  if (bits.size() != expected) {
    throw ShapeError("input", "expected " + std::to_string(expected) + " bits, got " +
                                  std::to_string(bits.size()));
  }
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] > 1) throw ShapeError("input[" + std::to_string(i) + "]", "not a binary value");
  }
}

}  // namespace

std::vector<std::uint8_t> float_features(const ModelSpec& m,
                                         std::span<const std::uint8_t> input_bits) {
  const InputShape& in = m.input_shape;
  check_bits(input_bits, static_cast<std::size_t>(in.size()));
  std::vector<std::uint8_t> features(static_cast<std::size_t>(m.linear.features), 0);
  int offset = 0;
  for (const HeadSpec& head : m.heads) {
    const HeadShape hs = head_shape(head, in);
    const int patches = hs.patch_count();
    auto source = [&](int ch) { return head.shuffle.empty() ? ch : head.shuffle[ch]; };
    if (head.is_identity()) {
      for (int ch = 0; ch < hs.channels; ++ch) {
        for (int p = 0; p < patches; ++p) {
          features[offset + ch * patches + p] = input_bits[source(ch) * patches + p];
        }
      }
    } else {
      const LTTBlockSpec& b = head.block();
      const ComposedWindow cw = compose_window(b);
      std::vector<std::uint8_t> patch(static_cast<std::size_t>(in.channels) * cw.window.area());
      for (int py = 0; py < hs.patches_h; ++py) {
        for (int px = 0; px < hs.patches_w; ++px) {
          const int y0 = py * cw.stride.h - cw.pad_h;
          const int x0 = px * cw.stride.w - cw.pad_w;
          for (int c = 0; c < in.channels; ++c) {
            for (int y = 0; y < cw.window.h; ++y) {
              for (int x = 0; x < cw.window.w; ++x) {
                const int yy = y0 + y;
                const int xx = x0 + x;
                const bool inside = yy >= 0 && yy < in.h && xx >= 0 && xx < in.w;
                patch[(c * cw.window.h + y) * cw.window.w + x] =
                    inside ? input_bits[(c * in.h + yy) * in.w + xx] : 0;
              }
            }
          }
          const auto out = ltt_forward(b, patch);
          const int p = py * hs.patches_w + px;
          for (int ch = 0; ch < hs.channels; ++ch) {
            features[offset + ch * patches + p] = out[source(ch)];
          }
        }
      }
    }
    offset += hs.features();
  }
  return features;
}

std::vector<double> eval_float_bits(const ModelSpec& m, std::span<const std::uint8_t> input_bits) {
  const auto f = float_features(m, input_bits);
  const auto& lin = m.linear;
  std::vector<double> scores(lin.classes, 0.0);
  for (int c = 0; c < lin.classes; ++c) {
    double s = 0.0;
    for (int k = 0; k < lin.features; ++k) s += lin.at(c, k) * f[k];
    scores[c] = s;
  }
  return scores;
}

std::vector<double> eval_float(const ModelSpec& m, std::span<const double> input) {
  if (input.size() != static_cast<std::size_t>(m.input_shape.size())) {
    throw ShapeError("input", "expected " + std::to_string(m.input_shape.size()) +
                                  " values, got " + std::to_string(input.size()));
  }
  std::vector<std::uint8_t> bits;
  if (m.front_end.kind == FrontEnd::Kind::PrecomputedBinary) {
    for (double v : input) {
      if (v != 0.0 && v != 1.0) throw ShapeError("input", "precomputed input must be 0 or 1");
      bits.push_back(v == 1.0 ? 1 : 0);
    }
  } else {
    bits = binarize_input(m.front_end, input);
  }
  return eval_float_bits(m, bits);
}

std::vector<std::uint8_t> circuit_features(const Circuit& c,
                                           std::span<const std::uint8_t> input_bits,
                                           const EvalOptions& options) {
  check_bits(input_bits, static_cast<std::size_t>(c.input_bits()));
  std::vector<std::uint8_t> features(static_cast<std::size_t>(c.feature_count()), 0);
  if (options.parallel) {
    kernels::lut_layer_omp(c, input_bits, features, options.threads);
  } else {
    kernels::lut_layer_serial(c, input_bits, features);
  }
  return features;
}

namespace {

InferenceResult run(const Circuit& c, std::span<const std::uint8_t> input_bits,
                    const EvalOptions& options, kernels::AccumulatorStats* stats) {
  const auto features = circuit_features(c, input_bits, options);
  InferenceResult r;
  r.partials = options.parallel ? kernels::accumulate_omp(c, features, stats, options.threads)
                                : kernels::accumulate_serial(c, features, stats);
  if (options.compute_scores) {
    r.int_scores = recombine_integer(r.partials);
    r.scores.resize(r.int_scores.size());
    for (std::size_t k = 0; k < r.scores.size(); ++k) {
      r.scores[k] = c.quant.scale * static_cast<double>(r.int_scores[k]);
    }
    r.label = argmax(r.scores);
  }
  return r;
}

}  // namespace

InferenceResult eval_cleartext(const Circuit& c, std::span<const std::uint8_t> input_bits,
                               const EvalOptions& options) {
  return run(c, input_bits, options, nullptr);
}

EvalTrace static_trace(const Circuit& c) {
  EvalTrace t;
  for (const LutCall& call : c.lut_calls) ++t.lut_calls_by_bitwidth[call.n];
  t.max_bitwidth_touched = c.max_bitwidth;
  t.acc_bits = c.chunk_plan.acc_bits;
  t.patches_evaluated = c.lut_calls.size();
  return t;
}

std::pair<InferenceResult, EvalTrace> eval_simulated(const Circuit& c,
                                                     std::span<const std::uint8_t> input_bits,
                                                     const SimulateOptions& options) {
  kernels::AccumulatorStats stats;
  InferenceResult r = run(c, input_bits, options.eval, &stats);
  EvalTrace t = static_trace(c);
  t.max_accumulator_value = stats.max_chunk_sum;
  t.violations = stats.violations;
  if (stats.violations > 0 && options.on_violation == OnViolation::Throw) {
    throw ConstraintViolation("chunk_plan.acc_bits",
                              "sub-sum of " + std::to_string(stats.max_chunk_sum) +
                                  " exceeds the " + std::to_string(t.acc_bits) +
                                  "-bit accumulator (max " +
                                  std::to_string(c.chunk_plan.accumulator_limit()) + ")");
  }
  return {std::move(r), t};
}

}  // namespace ttc
