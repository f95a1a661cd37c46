// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dcaec/tensor.hpp"

namespace dcaec {

inline constexpr int kSampleRate = 16000;

/// Mono time-domain signal.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  AudioBuffer() = default;
  explicit AudioBuffer(std::vector<double> s, int rate = kSampleRate)
      : samples(std::move(s)), sample_rate(rate) {}
  static AudioBuffer zeros(std::size_t n, int rate = kSampleRate) {
    return AudioBuffer(std::vector<double>(n, 0.0), rate);
  }

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Throws InputError unless the buffer is at the processing rate.
void require_processing_rate(const AudioBuffer& x);

/// Framing and transform parameters. Construction via `paper()` or `make()`
/// validates the constant-overlap-add property of the window pair.
struct StftConfig {
  std::size_t win_len = 320;
  std::size_t hop = 160;
  std::size_t fft_size = 320;
  int sample_rate = kSampleRate;
  std::vector<double> analysis_window;
  std::vector<double> synthesis_window;

  std::size_t bins() const noexcept { return fft_size / 2 + 1; }

  /// 20 ms window, 10 ms hop, 320-point transform, square-root Hann.
  static StftConfig paper();
  /// Periodic square-root Hann pair with the given geometry.
  static StftConfig make(std::size_t win_len, std::size_t hop,
                         std::size_t fft_size, int sample_rate = kSampleRate);

  /// Number of frames produced for `n` input samples (tail zero-padded).
  std::size_t frames_for(std::size_t n) const noexcept;
  /// Length of the overlap-add output for `frames` frames.
  std::size_t samples_for(std::size_t frames) const noexcept;

  /// Max relative deviation of sum_k wa*ws(n - k*hop) from its mean.
  double cola_deviation() const;
  void validate() const;
};

/// One-sided complex spectrogram, re/im shaped (T, F).
struct ComplexSpec {
  Tensor<double> re;
  Tensor<double> im;
  StftConfig cfg;

  std::size_t frames() const { return re.rank() ? re.dim(0) : 0; }
  std::size_t bins() const { return re.rank() ? re.dim(1) : cfg.bins(); }
};

ComplexSpec stft(const AudioBuffer& x, const StftConfig& cfg);
AudioBuffer istft(const ComplexSpec& spec);

/// `delay` zeros followed by x.
AudioBuffer apply_delay(const AudioBuffer& x, std::size_t delay);

/// Full linear convolution, computed by FFT.
std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b);

// Matrix-form transform kernels used by the network and by stft/istft.
// Frames are windowed, zero-padded to fft_size and multiplied by explicit
// DFT matrices, so the transform length is exact and the adjoint is a
// transpose.
template <typename T>
class SpectralKernels {
 public:
  explicit SpectralKernels(const StftConfig& cfg);

  const StftConfig& config() const noexcept { return cfg_; }

  /// Signal (n samples) -> re/im (T, F). Tail zero-padded.
  void analyze(const T* x, std::size_t n, Tensor<T>& re, Tensor<T>& im) const;
  /// Single frame of win_len samples -> re/im (F).
  void analyze_frame(const T* frame, T* re, T* im) const;

  /// re/im (T, F) -> overlap-added signal of samples_for(T) samples.
  std::vector<T> synthesize(const Tensor<T>& re, const Tensor<T>& im) const;
  /// Adjoint of synthesize: signal gradient -> re/im gradients (T, F).
  void synthesize_adjoint(const std::vector<T>& dsignal, std::size_t frames,
                          Tensor<T>& dre, Tensor<T>& dim) const;
  /// Windowed inverse of one frame (win_len samples, before overlap-add).
  void synthesize_frame(const T* re, const T* im, T* out) const;

 private:
  StftConfig cfg_;
  // forward: (fft_size x F) cos and -sin; inverse: (F x fft_size)
  std::vector<T> fwd_cos_, fwd_sin_, inv_cos_, inv_sin_;
  std::vector<T> wa_, ws_;
};

}  // namespace dcaec
