// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// OpenMP/Eigen kernels against the serial loop references, at the full-size model
// shapes for 1 s of audio (100 frames). The argument of the OpenMP variants
// is the thread count, 0 meaning whatever OMP_NUM_THREADS gives.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "dcaec/engine.hpp"
#include "dcaec/model.hpp"
#include "reference/reference.hpp"

using namespace dcaec;

namespace {

constexpr std::size_t kFrames = 100;

const ModelConfig& cfg() {
  static const ModelConfig c = ModelConfig::paper();
  return c;
}

const NetworkParams<double>& params() {
  static const NetworkParams<double> p = from_store<double>(cfg(), init_weights(cfg()));
  return p;
}

ComplexPair<double> random_pair(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  ComplexPair<double> x(shape);
  for (auto& v : x.re.values()) v = u(rng);
  for (auto& v : x.im.values()) v = u(rng);
  return x;
}

void set_threads(benchmark::State& st) {
  if (st.range(0) > 0) omp_set_num_threads(static_cast<int>(st.range(0)));
}

// ---------------------------------------------------------------------------

void BM_Enc2Conv(benchmark::State& st) {
  set_threads(st);
  const auto x = random_pair({cfg().enc1_channels, kFrames, cfg().encoded_bins()}, 1);
  for (auto _ : st) benchmark::DoNotOptimize(nn::complex_conv2d(x, params().enc2.conv, cfg().enc2()));
}

void BM_Enc2Conv_Ref(benchmark::State& st) {
  const auto x = random_pair({cfg().enc1_channels, kFrames, cfg().encoded_bins()}, 1);
  for (auto _ : st) benchmark::DoNotOptimize(ref::complex_conv2d(x, params().enc2.conv, cfg().enc2()));
}

void BM_FtBranch(benchmark::State& st) {
  set_threads(st);
  const auto h = random_pair({cfg().enc2_channels, kFrames, cfg().enc2().out_bins(cfg().encoded_bins())}, 2).re;
  for (auto _ : st) benchmark::DoNotOptimize(nn::ft_lstm_branch(h, params().ft_re));
}

void BM_FtBranch_Ref(benchmark::State& st) {
  const auto h = random_pair({cfg().enc2_channels, kFrames, cfg().enc2().out_bins(cfg().encoded_bins())}, 2).re;
  for (auto _ : st) benchmark::DoNotOptimize(ref::ft_lstm_branch(h, params().ft_re));
}

void BM_ComplexLstm(benchmark::State& st) {
  set_threads(st);
  const auto x = random_pair({kFrames, cfg().bins()}, 3);
  for (auto _ : st) benchmark::DoNotOptimize(nn::complex_lstm(x, params().clstm));
}

void BM_ComplexLstm_Ref(benchmark::State& st) {
  const auto x = random_pair({kFrames, cfg().bins()}, 3);
  for (auto _ : st) benchmark::DoNotOptimize(ref::complex_lstm(x, params().clstm));
}

void BM_DeepFilter(benchmark::State& st) {
  set_threads(st);
  const auto coef = random_pair({9, kFrames, cfg().bins()}, 4);
  const auto target = random_pair({1, kFrames, cfg().bins()}, 5);
  for (auto _ : st) benchmark::DoNotOptimize(nn::deep_filter_apply(coef, target));
}

void BM_DeepFilter_Ref(benchmark::State& st) {
  const auto coef = random_pair({9, kFrames, cfg().bins()}, 4);
  const auto target = random_pair({1, kFrames, cfg().bins()}, 5);
  for (auto _ : st) benchmark::DoNotOptimize(ref::deep_filter(coef, target));
}

void BM_Stft(benchmark::State& st) {
  set_threads(st);
  const SpectralKernels<double> k(cfg().stft);
  const std::size_t n = kFrames * cfg().stft.hop;
  const auto sig = random_pair({n}, 6).re;
  Tensor<double> re, im;
  for (auto _ : st) {
    k.analyze(sig.data(), n, re, im);
    benchmark::DoNotOptimize(re.data());
  }
}

void BM_Stft_Ref(benchmark::State& st) {
  const StftConfig& c = cfg().stft;
  const std::size_t n = kFrames * c.hop;
  const auto sig = random_pair({n + c.win_len}, 6).re;
  const std::vector<double>& win = c.analysis_window;
  ref::Vec frame(c.win_len), re, im;
  for (auto _ : st) {
    for (std::size_t t = 0; t < kFrames; ++t) {
      for (std::size_t i = 0; i < c.win_len; ++i) frame[i] = sig[t * c.hop + i] * win[i];
      ref::dft_frame(frame, c.fft_size, re, im);
    }
    benchmark::DoNotOptimize(re.data());
  }
}

// Whole model on 1 s, float inference path.
void BM_ModelForward(benchmark::State& st) {
  set_threads(st);
  static const AecModel model(cfg(), init_weights(cfg()));
  double rtf = 0;
  for (auto _ : st) rtf = bench_rtf(model, 1.0, 1, false, omp_get_max_threads()).rtf;
  st.counters["rtf"] = rtf;
}

}  // namespace

BENCHMARK(BM_Enc2Conv)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Enc2Conv_Ref)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FtBranch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FtBranch_Ref)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComplexLstm)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ComplexLstm_Ref)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DeepFilter)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_DeepFilter_Ref)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Stft)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Stft_Ref)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ModelForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
