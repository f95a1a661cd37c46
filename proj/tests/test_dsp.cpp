// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dcaec/dsp.hpp"
#include "reference/reference.hpp"
#include "support.hpp"

using namespace dcaec;
using dcaec::testing::Rng;

namespace {

AudioBuffer noise(Rng& rng, std::size_t n, double scale = 0.5) {
  std::normal_distribution<double> g(0.0, scale);
  AudioBuffer x = AudioBuffer::zeros(n);
  for (auto& v : x.samples) v = g(rng);
  return x;
}

double interior_rel_err(const AudioBuffer& a, const AudioBuffer& b,
                        std::size_t margin) {
  double num = 0, den = 0;
  for (std::size_t n = margin; n + margin < a.size(); ++n) {
    num += (a.samples[n] - b.samples[n]) * (a.samples[n] - b.samples[n]);
    den += a.samples[n] * a.samples[n];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("stft framing: 1 s of zeros gives 99 zero frames") {
  const auto cfg = StftConfig::paper();
  ComplexSpec S = stft(AudioBuffer::zeros(16000), cfg);
  CHECK(S.frames() == 99);
  CHECK(S.bins() == 161);
  for (std::size_t i = 0; i < S.re.size(); ++i) {
    REQUIRE(S.re[i] == 0.0);
    REQUIRE(S.im[i] == 0.0);
  }
}

TEST_CASE("frame counts") {
  const auto cfg = StftConfig::paper();
  CHECK(cfg.frames_for(0) == 0);
  CHECK(cfg.frames_for(1) == 1);
  CHECK(cfg.frames_for(320) == 1);
  CHECK(cfg.frames_for(321) == 2);
  CHECK(cfg.frames_for(480) == 2);
  CHECK(cfg.samples_for(99) == 16000);
  CHECK(stft(AudioBuffer{}, cfg).frames() == 0);
}

TEST_CASE("COLA holds for the sqrt-Hann pair") {
  CHECK(StftConfig::paper().cola_deviation() < 1e-10);
  CHECK_THROWS_AS(StftConfig::make(320, 100, 320), std::invalid_argument);
  CHECK_THROWS_AS(StftConfig::make(320, 160, 256), std::invalid_argument);
}

TEST_CASE("stft matches a direct DFT of each windowed frame") {
  const auto cfg = StftConfig::paper();
  const std::size_t k = 20;  // 1 kHz, exactly on a bin
  AudioBuffer x = AudioBuffer::zeros(4000);
  for (std::size_t n = 0; n < x.size(); ++n) {
    x.samples[n] = std::cos(2 * std::numbers::pi * double(k) * n / 320.0);
  }
  ComplexSpec S = stft(x, cfg);
  for (std::size_t t : {0ul, 5ul, 10ul}) {
    ref::Vec frame(320), re, im;
    for (std::size_t n = 0; n < 320; ++n) {
      frame[n] = x.samples[t * 160 + n] * cfg.analysis_window[n];
    }
    ref::dft_frame(frame, 320, re, im);
    std::size_t peak = 0;
    double best = -1;
    for (std::size_t f = 0; f < 161; ++f) {
      CHECK(std::abs(S.re(t, f) - re[f]) < 1e-9);
      CHECK(std::abs(S.im(t, f) - im[f]) < 1e-9);
      const double mag = std::hypot(S.re(t, f), S.im(t, f));
      if (mag > best) {
        best = mag;
        peak = f;
      }
    }
    CHECK(peak == k);
    // sine window spreads a line over k-1..k+1 only to first order; the
    // remaining leakage decays as 1/(4m^2-1)
    double far = 0, total = 0;
    for (std::size_t f = 0; f < 161; ++f) {
      const double e = S.re(t, f) * S.re(t, f) + S.im(t, f) * S.im(t, f);
      total += e;
      if (f + 1 < k || f > k + 1) far += e;
    }
    CHECK(10 * std::log10(far / total) < -20.0);
  }
}

TEST_CASE("round trip reconstructs interior samples") {
  Rng rng(7);
  const auto cfg = StftConfig::paper();
  for (std::size_t n : {16000ul, 32000ul, 16123ul}) {
    AudioBuffer x = noise(rng, n);
    AudioBuffer y = istft(stft(x, cfg));
    REQUIRE(y.size() >= n);
    CHECK(y.size() < n + cfg.hop + cfg.win_len);
    CHECK(interior_rel_err(x, y, cfg.win_len) < 1e-6);
  }
}

TEST_CASE("empty spectrogram gives an empty buffer") {
  ComplexSpec S;
  S.cfg = StftConfig::paper();
  CHECK(istft(S).empty());
}

TEST_CASE("conjugated spectrum still synthesizes a finite real signal") {
  Rng rng(8);
  const auto cfg = StftConfig::paper();
  AudioBuffer x = noise(rng, 8000);
  ComplexSpec S = stft(x, cfg);
  ComplexSpec C = S;
  C.im *= -1.0;
  AudioBuffer y = istft(C);
  CHECK(y.size() == cfg.samples_for(S.frames()));
  for (double v : y.samples) REQUIRE(std::isfinite(v));
  // conjugating twice is the identity
  C.im *= -1.0;
  CHECK(interior_rel_err(istft(S), istft(C), 0) == 0.0);
}

TEST_CASE("linearity") {
  Rng rng(9);
  const auto cfg = StftConfig::paper();
  AudioBuffer a = noise(rng, 5000), b = noise(rng, 5000), mix = a;
  const double ca = 0.37, cb = -1.9;
  for (std::size_t n = 0; n < mix.size(); ++n) {
    mix.samples[n] = ca * a.samples[n] + cb * b.samples[n];
  }
  ComplexSpec Sa = stft(a, cfg), Sb = stft(b, cfg), Sm = stft(mix, cfg);
  double err = 0;
  for (std::size_t i = 0; i < Sm.re.size(); ++i) {
    err = std::max(err, std::abs(Sm.re[i] - ca * Sa.re[i] - cb * Sb.re[i]));
    err = std::max(err, std::abs(Sm.im[i] - ca * Sa.im[i] - cb * Sb.im[i]));
  }
  CHECK(err < 1e-10);
}

TEST_CASE("windowed Parseval per frame") {
  Rng rng(10);
  const auto cfg = StftConfig::paper();
  AudioBuffer x = noise(rng, 3200);
  ComplexSpec S = stft(x, cfg);
  for (std::size_t t = 0; t + 1 < S.frames(); ++t) {
    double time_e = 0;
    for (std::size_t n = 0; n < 320; ++n) {
      const double v = x.samples[t * 160 + n] * cfg.analysis_window[n];
      time_e += v * v;
    }
    double freq_e = 0;
    for (std::size_t f = 0; f < 161; ++f) {
      const double e = S.re(t, f) * S.re(t, f) + S.im(t, f) * S.im(t, f);
      freq_e += (f == 0 || f == 160) ? e : 2 * e;
    }
    CHECK(std::abs(freq_e / 320.0 - time_e) / time_e < 1e-8);
  }
}

TEST_CASE("sample rate is enforced") {
  AudioBuffer x(std::vector<double>(1000, 0.0), 8000);
  CHECK_THROWS_AS(stft(x, StftConfig::paper()), InputError);
}

TEST_CASE("apply_delay") {
  Rng rng(11);
  AudioBuffer x = noise(rng, 16000);
  CHECK(apply_delay(x, 0).samples == x.samples);
  AudioBuffer y = apply_delay(x, 1600);
  REQUIRE(y.size() == 17600);
  for (std::size_t n = 0; n < 1600; ++n) REQUIRE(y.samples[n] == 0.0);
  // brute-force cross-correlation peak
  const std::size_t d = 237;
  AudioBuffer z = apply_delay(x, d);
  std::size_t arg = 0;
  double best = -1e300;
  for (std::size_t lag = 0; lag < 400; ++lag) {
    double acc = 0;
    for (std::size_t n = 0; n < x.size(); ++n) acc += x.samples[n] * z.samples[n + lag];
    if (acc > best) {
      best = acc;
      arg = lag;
    }
  }
  CHECK(arg == d);
}

TEST_CASE("fft_convolve matches direct convolution") {
  Rng rng(12);
  for (std::size_t nb : {5ul, 33ul, 700ul}) {
    std::vector<double> a(1000), b(nb);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    auto c = fft_convolve(a, b);
    REQUIRE(c.size() == a.size() + b.size() - 1);
    double err = 0;
    for (std::size_t n = 0; n < c.size(); ++n) {
      double acc = 0;
      for (std::size_t k = 0; k < b.size(); ++k) {
        if (n >= k && n - k < a.size()) acc += a[n - k] * b[k];
      }
      err = std::max(err, std::abs(acc - c[n]));
    }
    CHECK(err < 1e-9);
  }
}

TEST_CASE("streaming frame analysis equals batch analysis") {
  Rng rng(13);
  const auto cfg = StftConfig::paper();
  SpectralKernels<double> k(cfg);
  AudioBuffer x = noise(rng, 1600);
  Tensor<double> re, im;
  k.analyze(x.samples.data(), x.size(), re, im);
  std::vector<double> fr(161), fi(161);
  for (std::size_t t = 0; t < 9; ++t) {
    k.analyze_frame(x.samples.data() + t * 160, fr.data(), fi.data());
    for (std::size_t f = 0; f < 161; ++f) {
      REQUIRE(std::abs(fr[f] - re(t, f)) < 1e-12);
      REQUIRE(std::abs(fi[f] - im(t, f)) < 1e-12);
    }
  }
}

TEST_CASE("synthesis adjoint identity") {
  Rng rng(14);
  SpectralKernels<double> k(StftConfig::paper());
  auto re = testing::random_tensor(rng, {6, 161});
  auto im = testing::random_tensor(rng, {6, 161});
  // imaginary parts of DC and Nyquist are ignored by a real inverse
  for (std::size_t t = 0; t < 6; ++t) im(t, 0) = im(t, 160) = 0.0;
  std::vector<double> sig = k.synthesize(re, im);
  std::vector<double> g(sig.size());
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : g) v = u(rng);
  Tensor<double> dre, dim;
  k.synthesize_adjoint(g, 6, dre, dim);
  double lhs = 0;
  for (std::size_t n = 0; n < g.size(); ++n) lhs += g[n] * sig[n];
  const double rhs = testing::dot(re, dre) + testing::dot(im, dim);
  CHECK(std::abs(lhs - rhs) < 1e-9 * std::max(1.0, std::abs(lhs)));
}
