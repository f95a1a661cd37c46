// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "dcaec/dsp.hpp"
#include "dcaec/nn.hpp"

namespace dcaec::testing {

using Rng = std::mt19937_64;

template <typename T = double>
Tensor<T> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T = double>
ComplexPair<T> random_pair(Rng& rng, const Shape& shape, double scale = 1.0) {
  return ComplexPair<T>(random_tensor<T>(rng, shape, scale),
                        random_tensor<T>(rng, shape, scale));
}

inline AudioBuffer random_audio(Rng& rng, std::size_t n, double scale = 0.3) {
  std::uniform_real_distribution<double> u(-scale, scale);
  AudioBuffer b = AudioBuffer::zeros(n);
  for (auto& v : b.samples) v = u(rng);
  return b;
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <typename T = double>
nn::LstmParams<T> random_lstm_params(Rng& rng, std::size_t in,
                                     std::size_t hidden, double scale = 0.5) {
  return {random_tensor<T>(rng, {4 * hidden, in}, scale),
          random_tensor<T>(rng, {4 * hidden, hidden}, scale),
          random_tensor<T>(rng, {4 * hidden}, scale)};
}

template <typename T = double>
nn::LstmSpec<T> random_lstm(Rng& rng, std::size_t in, std::size_t hidden,
                            bool bidirectional, double scale = 0.5) {
  nn::LstmSpec<T> s;
  s.input_dim = in;
  s.hidden_dim = hidden;
  s.bidirectional = bidirectional;
  s.fwd = random_lstm_params<T>(rng, in, hidden, scale);
  if (bidirectional) s.bwd = random_lstm_params<T>(rng, in, hidden, scale);
  return s;
}

template <typename T = double>
nn::DenseParams<T> random_dense(Rng& rng, std::size_t in, std::size_t out,
                                double scale = 0.5) {
  return {random_tensor<T>(rng, {out, in}, scale),
          random_tensor<T>(rng, {out}, scale)};
}

template <typename T = double>
nn::FtLstmParams<T> random_ft(Rng& rng, std::size_t ch, std::size_t hidden,
                              double scale = 0.5) {
  return {random_lstm<T>(rng, ch, hidden, true, scale),
          random_dense<T>(rng, 2 * hidden, ch, scale),
          random_lstm<T>(rng, ch, hidden, false, scale),
          random_dense<T>(rng, hidden, ch, scale)};
}

template <typename T = double>
nn::ComplexLstmParams<T> random_clstm(Rng& rng, std::size_t in,
                                      std::size_t hidden, std::size_t layers,
                                      std::size_t out, double scale = 0.5) {
  nn::ComplexLstmParams<T> p;
  std::size_t d = in;
  for (std::size_t l = 0; l < layers; ++l) {
    p.layers.push_back({random_lstm<T>(rng, d, hidden, false, scale),
                        random_lstm<T>(rng, d, hidden, false, scale)});
    d = hidden;
  }
  p.proj_re = random_dense<T>(rng, hidden, out, scale);
  p.proj_im = random_dense<T>(rng, hidden, out, scale);
  return p;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <typename T>
double max_abs_diff(const ComplexPair<T>& a, const ComplexPair<T>& b) {
  return std::max(max_abs_diff(a.re, b.re), max_abs_diff(a.im, b.im));
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

}  // namespace dcaec::testing
