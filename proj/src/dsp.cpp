// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "eigen_util.hpp"

namespace dcaec {

void require_processing_rate(const AudioBuffer& x) {
  if (x.sample_rate != kSampleRate) {
    throw InputError("sample rate " + std::to_string(x.sample_rate) +
                     " Hz not supported; expected " +
                     std::to_string(kSampleRate) + " Hz");
  }
}

StftConfig StftConfig::paper() { return make(320, 160, 320, kSampleRate); }

StftConfig StftConfig::make(std::size_t win_len, std::size_t hop,
                            std::size_t fft_size, int sample_rate) {
  StftConfig cfg;
  cfg.win_len = win_len;
  cfg.hop = hop;
  cfg.fft_size = fft_size;
  cfg.sample_rate = sample_rate;
  cfg.analysis_window.resize(win_len);
  for (std::size_t n = 0; n < win_len; ++n) {
    // periodic sqrt-Hann: w^2 = sin^2(pi n / N) sums to 1 at 50% overlap
    cfg.analysis_window[n] =
        std::sin(std::numbers::pi * static_cast<double>(n) / win_len);
  }
  cfg.synthesis_window = cfg.analysis_window;
  cfg.validate();
  return cfg;
}

std::size_t StftConfig::frames_for(std::size_t n) const noexcept {
  if (n == 0) return 0;
  if (n <= win_len) return 1;
  return (n - win_len + hop - 1) / hop + 1;
}

std::size_t StftConfig::samples_for(std::size_t frames) const noexcept {
  return frames == 0 ? 0 : (frames - 1) * hop + win_len;
}

double StftConfig::cola_deviation() const {
  std::vector<double> acc(hop, 0.0);
  for (std::size_t n = 0; n < win_len; ++n) {
    acc[n % hop] += analysis_window[n] * synthesis_window[n];
  }
  double mean = 0.0;
  for (double v : acc) mean += v;
  mean /= static_cast<double>(hop);
  double dev = 0.0;
  for (double v : acc) dev = std::max(dev, std::abs(v - mean));
  return mean == 0.0 ? 1.0 : dev / std::abs(mean);
}

void StftConfig::validate() const {
  if (win_len == 0 || hop == 0 || fft_size == 0) {
    throw std::invalid_argument("stft: zero-sized geometry");
  }
  if (fft_size < win_len) {
    throw std::invalid_argument("stft: fft_size must be >= win_len");
  }
  if (win_len % hop != 0) {
    throw std::invalid_argument("stft: hop must divide win_len");
  }
  if (analysis_window.size() != win_len || synthesis_window.size() != win_len) {
    throw std::invalid_argument("stft: window length mismatch");
  }
  if (cola_deviation() > 1e-10) {
    throw std::invalid_argument("stft: window pair is not COLA at this hop");
  }
}

// ---------------------------------------------------------------------------

template <typename T>
SpectralKernels<T>::SpectralKernels(const StftConfig& cfg) : cfg_(cfg) {
  const std::size_t n_fft = cfg.fft_size;
  const std::size_t bins = cfg.bins();
  fwd_cos_.resize(n_fft * bins);
  fwd_sin_.resize(n_fft * bins);
  inv_cos_.resize(bins * n_fft);
  inv_sin_.resize(bins * n_fft);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = (k == 0) || (n_fft % 2 == 0 && k == n_fft / 2);
    const double gain = (edge ? 1.0 : 2.0) / static_cast<double>(n_fft);
    for (std::size_t n = 0; n < n_fft; ++n) {
      // reduce k*n mod N before scaling so the phase stays exact
      const double phase = 2.0 * std::numbers::pi *
                           static_cast<double>((k * n) % n_fft) /
                           static_cast<double>(n_fft);
      const double c = std::cos(phase), s = std::sin(phase);
      fwd_cos_[n * bins + k] = static_cast<T>(c);
      fwd_sin_[n * bins + k] = static_cast<T>(-s);
      inv_cos_[k * n_fft + n] = static_cast<T>(gain * c);
      inv_sin_[k * n_fft + n] = static_cast<T>(-gain * s);
    }
  }
  wa_.assign(cfg.analysis_window.begin(), cfg.analysis_window.end());
  ws_.assign(cfg.synthesis_window.begin(), cfg.synthesis_window.end());
}

template <typename T>
void SpectralKernels<T>::analyze(const T* x, std::size_t n, Tensor<T>& re,
                                 Tensor<T>& im) const {
  using detail::ConstMatMap;
  using detail::MatMap;
  const std::size_t frames = cfg_.frames_for(n);
  const std::size_t n_fft = cfg_.fft_size, bins = cfg_.bins();
  re = Tensor<T>({frames, bins});
  im = Tensor<T>({frames, bins});
  if (frames == 0) return;
  std::vector<T> buf(frames * n_fft, T(0));
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * cfg_.hop;
    for (std::size_t i = 0; i < cfg_.win_len && start + i < n; ++i) {
      buf[t * n_fft + i] = x[start + i] * wa_[i];
    }
  }
  ConstMatMap<T> fr(buf.data(), frames, n_fft);
  MatMap<T>(re.data(), frames, bins).noalias() =
      fr * ConstMatMap<T>(fwd_cos_.data(), n_fft, bins);
  MatMap<T>(im.data(), frames, bins).noalias() =
      fr * ConstMatMap<T>(fwd_sin_.data(), n_fft, bins);
}

template <typename T>
void SpectralKernels<T>::analyze_frame(const T* frame, T* re, T* im) const {
  const std::size_t n_fft = cfg_.fft_size, bins = cfg_.bins();
  std::vector<T> buf(n_fft, T(0));
  for (std::size_t i = 0; i < cfg_.win_len; ++i) buf[i] = frame[i] * wa_[i];
  detail::ConstMatMap<T> fr(buf.data(), 1, n_fft);
  detail::MatMap<T>(re, 1, bins).noalias() =
      fr * detail::ConstMatMap<T>(fwd_cos_.data(), n_fft, bins);
  detail::MatMap<T>(im, 1, bins).noalias() =
      fr * detail::ConstMatMap<T>(fwd_sin_.data(), n_fft, bins);
}

template <typename T>
std::vector<T> SpectralKernels<T>::synthesize(const Tensor<T>& re,
                                              const Tensor<T>& im) const {
  using detail::ConstMatMap;
  const std::size_t bins = cfg_.bins(), n_fft = cfg_.fft_size;
  if (re.rank() != 2 || re.dim(1) != bins || !re.same_shape(im)) {
    throw ShapeError("istft: expected (T, " + std::to_string(bins) +
                     ") spectra, got " + to_string(re.shape()));
  }
  const std::size_t frames = re.dim(0);
  std::vector<T> out(cfg_.samples_for(frames), T(0));
  if (frames == 0) return out;
  detail::RowMat<T> fr =
      ConstMatMap<T>(re.data(), frames, bins) *
          ConstMatMap<T>(inv_cos_.data(), bins, n_fft) +
      ConstMatMap<T>(im.data(), frames, bins) *
          ConstMatMap<T>(inv_sin_.data(), bins, n_fft);
  // overlap-add is a scatter; frames sharing a hop slot are serialized
  for (std::size_t t = 0; t < frames; ++t) {
    T* dst = out.data() + t * cfg_.hop;
    const T* src = fr.data() + t * n_fft;
    for (std::size_t i = 0; i < cfg_.win_len; ++i) dst[i] += src[i] * ws_[i];
  }
  return out;
}

template <typename T>
void SpectralKernels<T>::synthesize_adjoint(const std::vector<T>& dsignal,
                                            std::size_t frames, Tensor<T>& dre,
                                            Tensor<T>& dim) const {
  using detail::ConstMatMap;
  using detail::MatMap;
  const std::size_t bins = cfg_.bins(), n_fft = cfg_.fft_size;
  if (dsignal.size() != cfg_.samples_for(frames)) {
    throw ShapeError("istft adjoint: signal length mismatch");
  }
  dre = Tensor<T>({frames, bins});
  dim = Tensor<T>({frames, bins});
  if (frames == 0) return;
  std::vector<T> buf(frames * n_fft, T(0));
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < cfg_.win_len; ++i) {
      buf[t * n_fft + i] = dsignal[t * cfg_.hop + i] * ws_[i];
    }
  }
  ConstMatMap<T> fr(buf.data(), frames, n_fft);
  MatMap<T>(dre.data(), frames, bins).noalias() =
      fr * ConstMatMap<T>(inv_cos_.data(), bins, n_fft).transpose();
  MatMap<T>(dim.data(), frames, bins).noalias() =
      fr * ConstMatMap<T>(inv_sin_.data(), bins, n_fft).transpose();
}

template <typename T>
void SpectralKernels<T>::synthesize_frame(const T* re, const T* im,
                                          T* out) const {
  using detail::ConstMatMap;
  const std::size_t bins = cfg_.bins(), n_fft = cfg_.fft_size;
  detail::RowMat<T> fr =
      ConstMatMap<T>(re, 1, bins) * ConstMatMap<T>(inv_cos_.data(), bins, n_fft) +
      ConstMatMap<T>(im, 1, bins) * ConstMatMap<T>(inv_sin_.data(), bins, n_fft);
  for (std::size_t i = 0; i < cfg_.win_len; ++i) out[i] = fr(0, i) * ws_[i];
}

template class SpectralKernels<float>;
template class SpectralKernels<double>;

// ---------------------------------------------------------------------------

ComplexSpec stft(const AudioBuffer& x, const StftConfig& cfg) {
  if (x.sample_rate != cfg.sample_rate) {
    throw InputError("stft: buffer rate " + std::to_string(x.sample_rate) +
                     " Hz does not match config rate " +
                     std::to_string(cfg.sample_rate) + " Hz");
  }
  ComplexSpec out;
  out.cfg = cfg;
  SpectralKernels<double>(cfg).analyze(x.samples.data(), x.size(), out.re,
                                       out.im);
  return out;
}

AudioBuffer istft(const ComplexSpec& spec) {
  if (spec.re.empty() && spec.im.empty()) {
    return AudioBuffer({}, spec.cfg.sample_rate);
  }
  return AudioBuffer(
      SpectralKernels<double>(spec.cfg).synthesize(spec.re, spec.im),
      spec.cfg.sample_rate);
}

AudioBuffer apply_delay(const AudioBuffer& x, std::size_t delay) {
  std::vector<double> out(delay, 0.0);
  out.insert(out.end(), x.samples.begin(), x.samples.end());
  return AudioBuffer(std::move(out), x.sample_rate);
}

std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  if (std::min(a.size(), b.size()) <= 32) {
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
  }
  std::size_t n = 1;
  while (n < out_len) n <<= 1;
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> out;
  fft.inv(out, fa);
  out.resize(out_len);
  return out;
}

}  // namespace dcaec
