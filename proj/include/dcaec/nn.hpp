// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Forward kernels and their vector-Jacobian products for every layer type
// in the network. Feature maps are laid out (channels, frames, bins).
// Kernels are templated on the scalar type; float and double are
// instantiated. Inner loops are OpenMP-parallel where the work is
// data-parallel; matrix products go through Eigen.

#pragma once

#include <cstddef>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "dcaec/tensor.hpp"

namespace dcaec::nn {

// Keeps optional state/cache pointers out of template deduction so callers
// can pass nullptr.
template <typename T>
using NoDeduce = std::type_identity_t<T>;

// ---------------------------------------------------------------------------
// Convolution

/// Geometry of a (complex or real) 2-D convolution over (frames, bins).
/// Kernel tensors are (out_ch, in_ch, kernel_t, kernel_f) for ordinary
/// convolutions and (in_ch, out_ch, kernel_t, kernel_f) when transposed,
/// so a transposed layer is the exact adjoint of the ordinary layer that
/// shares its kernel.
struct ConvSpec {
  std::size_t kernel_t = 1;
  std::size_t kernel_f = 1;
  std::size_t stride_t = 1;
  std::size_t stride_f = 1;
  std::size_t pad_t = 0;
  std::size_t pad_f = 0;
  std::size_t in_ch = 1;
  std::size_t out_ch = 1;
  bool transposed = false;

  void validate() const;
  Shape kernel_shape() const;
  std::size_t out_frames(std::size_t frames_in) const;
  std::size_t out_bins(std::size_t bins_in) const;
  /// The same layer with the roles of input/output swapped (conv <-> deconv).
  ConvSpec adjoint() const;
};

/// Real cross-correlation (or its transpose when spec.transposed).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                 const ConvSpec& spec);

template <typename T>
struct ConvGrads {
  Tensor<T> dx;
  Tensor<T> dkernel;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& dy, const Tensor<T>& x,
                             const Tensor<T>& kernel, const ConvSpec& spec);

template <typename T>
struct ComplexConvParams {
  Tensor<T> k_re;
  Tensor<T> k_im;
  Tensor<T> b_re;  // (out_ch) or empty for no bias
  Tensor<T> b_im;
};

/// H = (K_r*W_r - K_i*W_i) + j(K_r*W_i + K_i*W_r), plus an optional
/// per-part bias. Evaluated as one real convolution with a 2x2 block kernel
/// over the stacked [re; im] channels.
template <typename T>
ComplexPair<T> complex_conv2d(const ComplexPair<T>& x,
                              const ComplexConvParams<T>& p,
                              const ConvSpec& spec);

template <typename T>
ComplexPair<T> complex_conv2d(const ComplexPair<T>& x, const ComplexPair<T>& k,
                              const ConvSpec& spec) {
  return complex_conv2d(x, ComplexConvParams<T>{k.re, k.im, {}, {}}, spec);
}

/// Spec-level alias for the transposed form; `spec.transposed` must be set.
template <typename T>
ComplexPair<T> complex_deconv2d(const ComplexPair<T>& x,
                                const ComplexConvParams<T>& p,
                                const ConvSpec& spec);

template <typename T>
struct ComplexConvGrads {
  ComplexPair<T> dx;
  Tensor<T> dk_re, dk_im, db_re, db_im;
};

template <typename T>
ComplexConvGrads<T> complex_conv2d_backward(const ComplexPair<T>& dy,
                                            const ComplexPair<T>& x,
                                            const ComplexConvParams<T>& p,
                                            const ConvSpec& spec);

// ---------------------------------------------------------------------------
// Elementwise

enum class Activation { kPrelu, kIdentity };

/// Per-channel PReLU; alpha has one entry per leading-axis channel.
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& alpha);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> prelu_backward(const Tensor<T>& dy,
                                               const Tensor<T>& x,
                                               const Tensor<T>& alpha);

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind,
                     const Tensor<T>& alpha) {
  return kind == Activation::kPrelu ? prelu(x, alpha) : x;
}

/// Elementwise complex product.
template <typename T>
ComplexPair<T> complex_multiply(const ComplexPair<T>& a,
                                const ComplexPair<T>& b);

// ---------------------------------------------------------------------------
// Dense

template <typename T>
struct DenseParams {
  Tensor<T> w;  // (out, in)
  Tensor<T> b;  // (out)
  std::size_t in_dim() const { return w.dim(1); }
  std::size_t out_dim() const { return w.dim(0); }
};

/// Applies y = x W^T + b over the last axis.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const DenseParams<T>& p);

template <typename T>
struct DenseGrads {
  Tensor<T> dx, dw, db;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& dy, const Tensor<T>& x,
                             const DenseParams<T>& p);

// ---------------------------------------------------------------------------
// LSTM
//
// Gate order in all weight tensors is (input, forget, cell, output):
//   i = sig(.), f = sig(.), g = tanh(.), o = sig(.)
//   c' = f*c + i*g,  h' = o*tanh(c')

template <typename T>
struct LstmParams {
  Tensor<T> w_ih;  // (4H, D)
  Tensor<T> w_hh;  // (4H, H)
  Tensor<T> b;     // (4H)
  std::size_t hidden() const { return w_hh.dim(1); }
  std::size_t input() const { return w_ih.dim(1); }
  void validate() const;
};

template <typename T>
struct LstmSpec {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  bool bidirectional = false;
  LstmParams<T> fwd;
  LstmParams<T> bwd;  // used only when bidirectional

  std::size_t output_dim() const {
    return bidirectional ? 2 * hidden_dim : hidden_dim;
  }
  void validate() const;
};

/// Recurrent state for a batch of sequences, h and c shaped (B, H).
template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;
  static LstmState zeros(std::size_t batch, std::size_t hidden) {
    return {Tensor<T>({batch, hidden}), Tensor<T>({batch, hidden})};
  }
};

/// Describes how a batch of sequences is stored: (batch, steps, dim) when
/// batch_major, else (steps, batch, dim).
struct SeqLayout {
  std::size_t steps = 0;
  std::size_t batch = 1;
  bool batch_major = false;
};

template <typename T>
struct LstmCache {
  Tensor<T> x;
  SeqLayout layout;
  bool reverse = false;
  Tensor<T> gates;   // (S, B, 4H), post-activation, indexed by step
  Tensor<T> cells;   // (S, B, H)
  Tensor<T> hidden;  // (S, B, H)
  LstmState<T> init;
};

/// Runs one direction over every sequence in `x`. Output shares the layout
/// of `x` with last dim H. When `state` is given it seeds the recurrence and
/// receives the final state.
template <typename T>
Tensor<T> lstm_scan(const Tensor<T>& x, const SeqLayout& layout,
                    const LstmParams<T>& p, bool reverse,
                    NoDeduce<LstmState<T>>* state = nullptr,
                    NoDeduce<LstmCache<T>>* cache = nullptr);

template <typename T>
struct LstmGrads {
  Tensor<T> dx;
  Tensor<T> dw_ih, dw_hh, db;
};

template <typename T>
LstmGrads<T> lstm_scan_backward(const Tensor<T>& dy, const LstmCache<T>& cache,
                                const LstmParams<T>& p);

template <typename T>
struct LstmLayerCache {
  LstmCache<T> fwd, bwd;
};

/// Uni- or bidirectional layer; bidirectional output is [forward, backward]
/// concatenated on the last axis. State is only carried for the
/// unidirectional case.
template <typename T>
Tensor<T> lstm_layer(const Tensor<T>& x, const SeqLayout& layout,
                     const LstmSpec<T>& spec, NoDeduce<LstmState<T>>* state = nullptr,
                     NoDeduce<LstmLayerCache<T>>* cache = nullptr);

template <typename T>
struct LstmLayerGrads {
  Tensor<T> dx;
  LstmGrads<T> fwd, bwd;
};

template <typename T>
LstmLayerGrads<T> lstm_layer_backward(const Tensor<T>& dy,
                                      const LstmLayerCache<T>& cache,
                                      const LstmSpec<T>& spec);

/// Single sequence (steps, input_dim) -> (steps, output_dim).
template <typename T>
std::pair<Tensor<T>, LstmState<T>> lstm_forward(
    const Tensor<T>& x, const LstmSpec<T>& spec,
    const NoDeduce<LstmState<T>>* state = nullptr);

// ---------------------------------------------------------------------------
// Frequency-time LSTM block (one real part)

template <typename T>
struct FtLstmParams {
  LstmSpec<T> f_lstm;  // bidirectional, along bins
  DenseParams<T> f_proj;
  LstmSpec<T> t_lstm;  // unidirectional, along frames
  DenseParams<T> t_proj;
};

/// Shapes of the reshaped intermediates, for conformance reporting.
struct FtLstmTrace {
  Shape h_reshape;  // (T, F, C)
  Shape u;          // (T, F, C)
  Shape v_reshape;  // (F, T, C)
  Shape z;          // (F, T, C)
};

template <typename T>
struct FtLstmCache {
  Tensor<T> h_reshape;
  Tensor<T> f_out;
  LstmLayerCache<T> f_cache;
  Tensor<T> t_in;
  Tensor<T> t_out;
  LstmLayerCache<T> t_cache;
};

/// V = H + F-stage(H); Z_out = V + T-stage(V), H shaped (C, T, F).
/// `t_state` (batch = F) carries the time recurrence across calls.
template <typename T>
Tensor<T> ft_lstm_branch(const Tensor<T>& h, const FtLstmParams<T>& p,
                         NoDeduce<LstmState<T>>* t_state = nullptr,
                         NoDeduce<FtLstmCache<T>>* cache = nullptr,
                         FtLstmTrace* trace = nullptr);

template <typename T>
struct FtLstmGrads {
  Tensor<T> dh;
  LstmLayerGrads<T> f_lstm, t_lstm;
  DenseGrads<T> f_proj, t_proj;
};

template <typename T>
FtLstmGrads<T> ft_lstm_branch_backward(const Tensor<T>& dz,
                                       const FtLstmCache<T>& cache,
                                       const FtLstmParams<T>& p);

/// Real and imaginary parts run through separate parameter sets.
template <typename T>
ComplexPair<T> ft_lstm_block(const ComplexPair<T>& h,
                             const FtLstmParams<T>& re,
                             const FtLstmParams<T>& im);

// ---------------------------------------------------------------------------
// Complex LSTM
//
//   out_re = LSTM_r(x_re) - LSTM_i(x_im)
//   out_im = LSTM_r(x_im) + LSTM_i(x_re)
// stacked; the last layer is followed by a per-part dense projection.

template <typename T>
struct ComplexLstmLayer {
  LstmSpec<T> real;
  LstmSpec<T> imag;
};

template <typename T>
struct ComplexLstmParams {
  std::vector<ComplexLstmLayer<T>> layers;
  DenseParams<T> proj_re;
  DenseParams<T> proj_im;
  bool has_proj = true;
};

/// Per-layer state for the (re, im) batch of two sequences.
template <typename T>
struct ComplexLstmState {
  std::vector<LstmState<T>> real;
  std::vector<LstmState<T>> imag;
  static ComplexLstmState zeros(const ComplexLstmParams<T>& p);
};

template <typename T>
struct ComplexLstmCache {
  std::vector<Tensor<T>> inputs;  // stacked (2, T, D) per layer
  std::vector<LstmLayerCache<T>> real, imag;
  Tensor<T> last_re, last_im;
};

/// x re/im shaped (T, D).
template <typename T>
ComplexPair<T> complex_lstm(const ComplexPair<T>& x,
                            const ComplexLstmParams<T>& p,
                            NoDeduce<ComplexLstmState<T>>* state = nullptr,
                            NoDeduce<ComplexLstmCache<T>>* cache = nullptr);

template <typename T>
struct ComplexLstmGrads {
  ComplexPair<T> dx;
  std::vector<LstmLayerGrads<T>> real, imag;
  DenseGrads<T> proj_re, proj_im;
};

template <typename T>
ComplexLstmGrads<T> complex_lstm_backward(const ComplexPair<T>& dy,
                                          const ComplexLstmCache<T>& cache,
                                          const ComplexLstmParams<T>& p);

// ---------------------------------------------------------------------------
// Deep filter

inline constexpr std::size_t kDeepFilterTaps = 9;

/// Channel index of the tap at frequency offset df and time offset dt,
/// both in {-1, 0, +1}.
constexpr std::size_t deep_filter_channel(int df, int dt) {
  return static_cast<std::size_t>(3 * (df + 1) + (dt + 1));
}

/// out(t,f) = sum_{df,dt} coef_{df,dt}(t,f) * target(t+dt, f+df),
/// complex products, zero outside the map. coef (9,T,F), target (1,T,F).
template <typename T>
ComplexPair<T> deep_filter_apply(const ComplexPair<T>& coef,
                                 const ComplexPair<T>& target);

template <typename T>
struct DeepFilterGrads {
  ComplexPair<T> dcoef, dtarget;
};

template <typename T>
DeepFilterGrads<T> deep_filter_backward(const ComplexPair<T>& dy,
                                        const ComplexPair<T>& coef,
                                        const ComplexPair<T>& target);

}  // namespace dcaec::nn
