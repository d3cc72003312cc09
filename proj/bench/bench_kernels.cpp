// Serial reference vs OpenMP for the three hot loops.
#include <benchmark/benchmark.h>

#include <random>

#include "ttc/circuit.hpp"
#include "ttc/kernels.hpp"
#include "ttc/synth.hpp"

using namespace ttc;

namespace {

LTTBlockSpec block_with_n(int n) {
  BlockShape s;
  s.dims = 1;
  s.hidden_channels = 8;
  s.out_channels = 2;
  s.kernel = {n, 1};
  std::mt19937_64 rng(n);
  return random_block(s, rng);
}

const Circuit& circuit() {
  static const Circuit c = compile(synth_model("mnist_fullpr", 1));
  return c;
}

std::vector<std::uint8_t> random_input(std::size_t n) {
  std::mt19937_64 rng(7);
  std::vector<std::uint8_t> x(n);
  for (auto& b : x) b = rng() & 1;
  return x;
}

void BM_EnumerateSerial(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const LTTBlockSpec b = block_with_n(n);
  std::vector<int> pos(n);
  for (int i = 0; i < n; ++i) pos[i] = i;
  for (auto _ : st) benchmark::DoNotOptimize(kernels::enumerate_serial(b, 0, pos, n));
  st.SetItemsProcessed(st.iterations() * (int64_t{1} << n));
}

void BM_EnumerateOmp(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  const LTTBlockSpec b = block_with_n(n);
  std::vector<int> pos(n);
  for (int i = 0; i < n; ++i) pos[i] = i;
  for (auto _ : st) benchmark::DoNotOptimize(kernels::enumerate_omp(b, 0, pos, n, 0));
  st.SetItemsProcessed(st.iterations() * (int64_t{1} << n));
}

void BM_LutLayerSerial(benchmark::State& st) {
  const Circuit& c = circuit();
  const auto x = random_input(c.input_bits());
  std::vector<std::uint8_t> f(c.feature_count());
  for (auto _ : st) {
    kernels::lut_layer_serial(c, x, f);
    benchmark::ClobberMemory();
  }
}

void BM_LutLayerOmp(benchmark::State& st) {
  const Circuit& c = circuit();
  const auto x = random_input(c.input_bits());
  std::vector<std::uint8_t> f(c.feature_count());
  for (auto _ : st) {
    kernels::lut_layer_omp(c, x, f, 0);
    benchmark::ClobberMemory();
  }
}

void BM_AccumulateSerial(benchmark::State& st) {
  const Circuit& c = circuit();
  const auto f = random_input(c.feature_count());
  for (auto _ : st) benchmark::DoNotOptimize(kernels::accumulate_serial(c, f, nullptr));
}

void BM_AccumulateOmp(benchmark::State& st) {
  const Circuit& c = circuit();
  const auto f = random_input(c.feature_count());
  for (auto _ : st) benchmark::DoNotOptimize(kernels::accumulate_omp(c, f, nullptr, 0));
}

}  // namespace

BENCHMARK(BM_EnumerateSerial)->DenseRange(8, 14, 2);
BENCHMARK(BM_EnumerateOmp)->DenseRange(8, 14, 2);
BENCHMARK(BM_LutLayerSerial);
BENCHMARK(BM_LutLayerOmp);
BENCHMARK(BM_AccumulateSerial);
BENCHMARK(BM_AccumulateOmp);

BENCHMARK_MAIN();
