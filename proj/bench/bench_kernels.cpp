// Fast vs reference kernels at tracker resolution (125x125).

#include <benchmark/benchmark.h>

#include <random>

#include "corrtrack/kernels.hpp"
#include "corrtrack/runtime.hpp"
#include "corrtrack/spectral.hpp"

using namespace corrtrack;
using namespace corrtrack::kernels;

namespace {

constexpr std::size_t kSide = 125;

FeatureMap random_map(std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMap f(kSide, kSide, c);
  for (double& v : f.values()) v = u(rng);
  return f;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// range(0): input channels, range(1): output channels
ConvShape conv_shape(const benchmark::State& st) {
  return {static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(1)), 1};
}

void BM_ConvForwardReference(benchmark::State& st) {
  const auto shape = conv_shape(st);
  const auto x = random_map(shape.in_channels, 1);
  const auto k = random_vec(shape.kernel_size(), 2);
  const std::vector<double> b(shape.out_channels, 0.1);
  for (auto _ : st) benchmark::DoNotOptimize(conv2d_forward_reference(x, shape, k, b));
}

template <Precision P>
void BM_ConvForward(benchmark::State& st) {
  const auto shape = conv_shape(st);
  const auto x = random_map(shape.in_channels, 1);
  const auto k = random_vec(shape.kernel_size(), 2);
  const std::vector<double> b(shape.out_channels, 0.1);
  for (auto _ : st) benchmark::DoNotOptimize(conv2d_forward(x, shape, k, b, P));
}

void BM_ConvBackwardReference(benchmark::State& st) {
  const auto shape = conv_shape(st);
  const auto x = random_map(shape.in_channels, 1);
  const auto dy = random_map(shape.out_channels, 3);
  const auto k = random_vec(shape.kernel_size(), 2);
  for (auto _ : st) benchmark::DoNotOptimize(conv2d_backward_reference(x, dy, shape, k));
}

template <Precision P>
void BM_ConvBackward(benchmark::State& st) {
  const auto shape = conv_shape(st);
  const auto x = random_map(shape.in_channels, 1);
  const auto dy = random_map(shape.out_channels, 3);
  const auto k = random_vec(shape.kernel_size(), 2);
  for (auto _ : st) benchmark::DoNotOptimize(conv2d_backward(x, dy, shape, k, P));
}

void BM_LrnForwardReference(benchmark::State& st) {
  const auto x = random_map(32, 4);
  for (auto _ : st) benchmark::DoNotOptimize(lrn_forward_reference(x, {}));
}

void BM_LrnForward(benchmark::State& st) {
  const auto x = random_map(32, 4);
  for (auto _ : st) benchmark::DoNotOptimize(lrn_forward(x, {}));
}

void BM_LrnBackwardReference(benchmark::State& st) {
  const auto x = random_map(32, 4);
  const auto dy = random_map(32, 5);
  for (auto _ : st) benchmark::DoNotOptimize(lrn_backward_reference(x, dy, {}));
}

void BM_LrnBackward(benchmark::State& st) {
  const auto x = random_map(32, 4);
  const auto dy = random_map(32, 5);
  for (auto _ : st) benchmark::DoNotOptimize(lrn_backward(x, dy, {}));
}

void BM_Fft2Stack(benchmark::State& st) {
  const auto x = random_map(32, 6);
  for (auto _ : st) benchmark::DoNotOptimize(fft2(x));
}

void BM_Ifft2RealStack(benchmark::State& st) {
  const auto spec = fft2(random_map(32, 6));
  for (auto _ : st) benchmark::DoNotOptimize(ifft2_real(spec, 1e-8, "bench"));
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({3, 64})->Args({64, 32})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ConvForwardReference)->Apply(conv_args);
BENCHMARK(BM_ConvForward<Precision::Double>)->Apply(conv_args);
BENCHMARK(BM_ConvForward<Precision::Single>)->Apply(conv_args);
BENCHMARK(BM_ConvBackwardReference)->Apply(conv_args);
BENCHMARK(BM_ConvBackward<Precision::Double>)->Apply(conv_args);
BENCHMARK(BM_ConvBackward<Precision::Single>)->Apply(conv_args);
BENCHMARK(BM_LrnForwardReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LrnForward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LrnBackwardReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LrnBackward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fft2Stack)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ifft2RealStack)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  keep_heap_resident();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
