// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdint>

#include "dcaec/nn.hpp"
#include "eigen_util.hpp"

namespace dcaec::nn {

void ConvSpec::validate() const {
  if (kernel_t == 0 || kernel_f == 0 || stride_t == 0 || stride_f == 0 ||
      in_ch == 0 || out_ch == 0) {
    throw ShapeError("conv spec: all extents must be positive");
  }
}

Shape ConvSpec::kernel_shape() const {
  return transposed ? Shape{in_ch, out_ch, kernel_t, kernel_f}
                    : Shape{out_ch, in_ch, kernel_t, kernel_f};
}

namespace {

std::size_t conv_extent(std::size_t n, std::size_t k, std::size_t s,
                        std::size_t p, bool transposed, const char* axis) {
  if (transposed) {
    const long long out = static_cast<long long>(n - 1) * s + k -
                          2 * static_cast<long long>(p);
    if (n == 0 || out < 1) {
      throw ShapeError(std::string("transposed conv: empty output along ") +
                       axis);
    }
    return static_cast<std::size_t>(out);
  }
  if (n + 2 * p < k) {
    throw ShapeError(std::string("conv: kernel larger than padded input along ") +
                     axis);
  }
  return (n + 2 * p - k) / s + 1;
}

}  // namespace

std::size_t ConvSpec::out_frames(std::size_t frames_in) const {
  return conv_extent(frames_in, kernel_t, stride_t, pad_t, transposed, "time");
}

std::size_t ConvSpec::out_bins(std::size_t bins_in) const {
  return conv_extent(bins_in, kernel_f, stride_f, pad_f, transposed,
                     "frequency");
}

ConvSpec ConvSpec::adjoint() const {
  ConvSpec a = *this;
  a.in_ch = out_ch;
  a.out_ch = in_ch;
  a.transposed = !transposed;
  return a;
}

namespace {

using detail::ConstMatMap;
using detail::MatMap;
using detail::RowMat;

// Geometry of an ordinary (non-transposed) convolution.
struct Geo {
  std::size_t c_in, t_in, f_in;
  std::size_t c_out, t_out, f_out;
  std::size_t kt, kf, st, sf, pt, pf;
  std::size_t rows() const { return c_in * kt * kf; }
  std::size_t cols() const { return t_out * f_out; }
};

template <typename T>
RowMat<T> im2col(const T* x, const Geo& g) {
  RowMat<T> cols(g.rows(), g.cols());
  const std::size_t rows = g.rows();
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t ci = r / (g.kt * g.kf);
    const std::size_t dt = (r / g.kf) % g.kt;
    const std::size_t df = r % g.kf;
    T* dst = cols.data() + r * g.cols();
    for (std::size_t to = 0; to < g.t_out; ++to) {
      const std::int64_t ti = static_cast<std::int64_t>(to * g.st + dt) -
                              static_cast<std::int64_t>(g.pt);
      T* row = dst + to * g.f_out;
      if (ti < 0 || ti >= static_cast<std::int64_t>(g.t_in)) {
        std::fill(row, row + g.f_out, T(0));
        continue;
      }
      const T* src = x + (ci * g.t_in + static_cast<std::size_t>(ti)) * g.f_in;
      for (std::size_t fo = 0; fo < g.f_out; ++fo) {
        const std::int64_t fi = static_cast<std::int64_t>(fo * g.sf + df) -
                                static_cast<std::int64_t>(g.pf);
        row[fo] = (fi < 0 || fi >= static_cast<std::int64_t>(g.f_in))
                      ? T(0)
                      : src[fi];
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add columns back onto the input map.
template <typename T>
Tensor<T> col2im(const RowMat<T>& cols, const Geo& g) {
  Tensor<T> x({g.c_in, g.t_in, g.f_in});
  T* xd = x.data();
  // each input channel owns a disjoint block of rows
#pragma omp parallel for schedule(static)
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t dt = 0; dt < g.kt; ++dt) {
      for (std::size_t df = 0; df < g.kf; ++df) {
        const std::size_t r = (ci * g.kt + dt) * g.kf + df;
        const T* src = cols.data() + r * g.cols();
        for (std::size_t to = 0; to < g.t_out; ++to) {
          const std::int64_t ti = static_cast<std::int64_t>(to * g.st + dt) -
                                  static_cast<std::int64_t>(g.pt);
          if (ti < 0 || ti >= static_cast<std::int64_t>(g.t_in)) continue;
          T* dst = xd + (ci * g.t_in + static_cast<std::size_t>(ti)) * g.f_in;
          const T* row = src + to * g.f_out;
          for (std::size_t fo = 0; fo < g.f_out; ++fo) {
            const std::int64_t fi = static_cast<std::int64_t>(fo * g.sf + df) -
                                    static_cast<std::int64_t>(g.pf);
            if (fi >= 0 && fi < static_cast<std::int64_t>(g.f_in)) {
              dst[fi] += row[fo];
            }
          }
        }
      }
    }
  }
  return x;
}

// Ordinary-conv geometry for `spec` given the *layer* input extents.
// For a transposed layer this is the underlying conv mapping layer output
// back to layer input.
Geo geometry(const ConvSpec& spec, std::size_t frames, std::size_t bins) {
  Geo g{};
  g.kt = spec.kernel_t;
  g.kf = spec.kernel_f;
  g.st = spec.stride_t;
  g.sf = spec.stride_f;
  g.pt = spec.pad_t;
  g.pf = spec.pad_f;
  if (!spec.transposed) {
    g.c_in = spec.in_ch;
    g.t_in = frames;
    g.f_in = bins;
    g.c_out = spec.out_ch;
    g.t_out = spec.out_frames(frames);
    g.f_out = spec.out_bins(bins);
  } else {
    g.c_in = spec.out_ch;
    g.t_in = spec.out_frames(frames);
    g.f_in = spec.out_bins(bins);
    g.c_out = spec.in_ch;
    g.t_out = frames;
    g.f_out = bins;
  }
  return g;
}

template <typename T>
void check_input(const Tensor<T>& x, const Tensor<T>& kernel,
                 const ConvSpec& spec) {
  spec.validate();
  if (x.rank() != 3 || x.dim(0) != spec.in_ch) {
    throw ShapeError("conv: input " + to_string(x.shape()) + " does not have " +
                     std::to_string(spec.in_ch) + " channels");
  }
  require_shape(kernel, spec.kernel_shape(), "conv kernel");
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                 const ConvSpec& spec) {
  check_input(x, kernel, spec);
  const Geo g = geometry(spec, x.dim(1), x.dim(2));
  if (!spec.transposed) {
    const RowMat<T> cols = im2col(x.data(), g);
    Tensor<T> y({g.c_out, g.t_out, g.f_out});
    MatMap<T>(y.data(), g.c_out, g.cols()).noalias() =
        ConstMatMap<T>(kernel.data(), g.c_out, g.rows()) * cols;
    return y;
  }
  const RowMat<T> cols =
      ConstMatMap<T>(kernel.data(), g.c_out, g.rows()).transpose() *
      ConstMatMap<T>(x.data(), g.c_out, g.cols());
  return col2im(cols, g);
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& dy, const Tensor<T>& x,
                             const Tensor<T>& kernel, const ConvSpec& spec) {
  check_input(x, kernel, spec);
  const Geo g = geometry(spec, x.dim(1), x.dim(2));
  ConvGrads<T> out;
  out.dkernel = Tensor<T>(kernel.shape());
  if (!spec.transposed) {
    require_shape(dy, {g.c_out, g.t_out, g.f_out}, "conv output grad");
    ConstMatMap<T> dym(dy.data(), g.c_out, g.cols());
    const RowMat<T> cols = im2col(x.data(), g);
    MatMap<T>(out.dkernel.data(), g.c_out, g.rows()).noalias() =
        dym * cols.transpose();
    const RowMat<T> dcols =
        ConstMatMap<T>(kernel.data(), g.c_out, g.rows()).transpose() * dym;
    out.dx = col2im(dcols, g);
    return out;
  }
  require_shape(dy, {g.c_in, g.t_in, g.f_in}, "deconv output grad");
  const RowMat<T> cols = im2col(dy.data(), g);
  ConstMatMap<T> xm(x.data(), g.c_out, g.cols());
  MatMap<T>(out.dkernel.data(), g.c_out, g.rows()).noalias() =
      xm * cols.transpose();
  out.dx = Tensor<T>(x.shape());
  MatMap<T>(out.dx.data(), g.c_out, g.cols()).noalias() =
      ConstMatMap<T>(kernel.data(), g.c_out, g.rows()) * cols;
  return out;
}

// ---------------------------------------------------------------------------
// Complex convolution through a 2x2 real block kernel.

namespace {

// Block entry for (output part, input part): re/re and im/im take K_r,
// im/re takes +K_i, re/im takes -K_i.
template <typename T>
Tensor<T> block_kernel(const Tensor<T>& k_re, const Tensor<T>& k_im,
                       const ConvSpec& spec) {
  const std::size_t ci = spec.in_ch, co = spec.out_ch;
  const std::size_t taps = spec.kernel_t * spec.kernel_f;
  ConvSpec block = spec;
  block.in_ch = 2 * ci;
  block.out_ch = 2 * co;
  Tensor<T> b(block.kernel_shape());
  for (std::size_t po = 0; po < 2; ++po) {
    for (std::size_t pi = 0; pi < 2; ++pi) {
      const Tensor<T>& src = (po == pi) ? k_re : k_im;
      const T sign = (po == 0 && pi == 1) ? T(-1) : T(1);
      for (std::size_t o = 0; o < co; ++o) {
        for (std::size_t i = 0; i < ci; ++i) {
          const std::size_t src_off =
              (spec.transposed ? (i * co + o) : (o * ci + i)) * taps;
          const std::size_t dst_off =
              (spec.transposed ? ((pi * ci + i) * 2 * co + po * co + o)
                               : ((po * co + o) * 2 * ci + pi * ci + i)) *
              taps;
          for (std::size_t k = 0; k < taps; ++k) {
            b[dst_off + k] = sign * src[src_off + k];
          }
        }
      }
    }
  }
  return b;
}

template <typename T>
void unblock_grad(const Tensor<T>& db, const ConvSpec& spec, Tensor<T>& dk_re,
                  Tensor<T>& dk_im) {
  const std::size_t ci = spec.in_ch, co = spec.out_ch;
  const std::size_t taps = spec.kernel_t * spec.kernel_f;
  dk_re = Tensor<T>(spec.kernel_shape());
  dk_im = Tensor<T>(spec.kernel_shape());
  for (std::size_t po = 0; po < 2; ++po) {
    for (std::size_t pi = 0; pi < 2; ++pi) {
      Tensor<T>& dst = (po == pi) ? dk_re : dk_im;
      const T sign = (po == 0 && pi == 1) ? T(-1) : T(1);
      for (std::size_t o = 0; o < co; ++o) {
        for (std::size_t i = 0; i < ci; ++i) {
          const std::size_t dst_off =
              (spec.transposed ? (i * co + o) : (o * ci + i)) * taps;
          const std::size_t src_off =
              (spec.transposed ? ((pi * ci + i) * 2 * co + po * co + o)
                               : ((po * co + o) * 2 * ci + pi * ci + i)) *
              taps;
          for (std::size_t k = 0; k < taps; ++k) {
            dst[dst_off + k] += sign * db[src_off + k];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> stack_parts(const Tensor<T>& re, const Tensor<T>& im) {
  Tensor<T> s({2 * re.dim(0), re.dim(1), re.dim(2)});
  std::copy(re.values().begin(), re.values().end(), s.data());
  std::copy(im.values().begin(), im.values().end(), s.data() + re.size());
  return s;
}

template <typename T>
ComplexPair<T> split_parts(const Tensor<T>& s) {
  const Shape half{s.dim(0) / 2, s.dim(1), s.dim(2)};
  const std::size_t n = numel(half);
  Tensor<T> re(half), im(half);
  std::copy(s.data(), s.data() + n, re.data());
  std::copy(s.data() + n, s.data() + 2 * n, im.data());
  return {std::move(re), std::move(im)};
}

ConvSpec block_spec(const ConvSpec& spec) {
  ConvSpec b = spec;
  b.in_ch = 2 * spec.in_ch;
  b.out_ch = 2 * spec.out_ch;
  return b;
}

template <typename T>
void add_bias(Tensor<T>& y, const Tensor<T>& b) {
  if (b.empty()) return;
  if (b.rank() != 1 || b.dim(0) != y.dim(0)) {
    throw ShapeError("conv bias " + to_string(b.shape()) +
                     " does not match output " + to_string(y.shape()));
  }
  const std::size_t plane = y.dim(1) * y.dim(2);
  for (std::size_t c = 0; c < y.dim(0); ++c) {
    T* p = y.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
  }
}

template <typename T>
Tensor<T> bias_grad(const Tensor<T>& dy) {
  Tensor<T> db({dy.dim(0)});
  const std::size_t plane = dy.dim(1) * dy.dim(2);
  for (std::size_t c = 0; c < dy.dim(0); ++c) {
    T acc = 0;
    const T* p = dy.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    db[c] = acc;
  }
  return db;
}

}  // namespace

template <typename T>
ComplexPair<T> complex_conv2d(const ComplexPair<T>& x,
                              const ComplexConvParams<T>& p,
                              const ConvSpec& spec) {
  x.validate();
  spec.validate();
  require_shape(p.k_re, spec.kernel_shape(), "complex conv kernel (re)");
  require_shape(p.k_im, spec.kernel_shape(), "complex conv kernel (im)");
  const ConvSpec bs = block_spec(spec);
  ComplexPair<T> y = split_parts(
      conv2d(stack_parts(x.re, x.im), block_kernel(p.k_re, p.k_im, spec), bs));
  add_bias(y.re, p.b_re);
  add_bias(y.im, p.b_im);
  return y;
}

template <typename T>
ComplexPair<T> complex_deconv2d(const ComplexPair<T>& x,
                                const ComplexConvParams<T>& p,
                                const ConvSpec& spec) {
  if (!spec.transposed) {
    throw std::invalid_argument("complex_deconv2d: spec must be transposed");
  }
  return complex_conv2d(x, p, spec);
}

template <typename T>
ComplexConvGrads<T> complex_conv2d_backward(const ComplexPair<T>& dy,
                                            const ComplexPair<T>& x,
                                            const ComplexConvParams<T>& p,
                                            const ConvSpec& spec) {
  dy.validate();
  const ConvSpec bs = block_spec(spec);
  ConvGrads<T> g =
      conv2d_backward(stack_parts(dy.re, dy.im), stack_parts(x.re, x.im),
                      block_kernel(p.k_re, p.k_im, spec), bs);
  ComplexConvGrads<T> out;
  out.dx = split_parts(g.dx);
  unblock_grad(g.dkernel, spec, out.dk_re, out.dk_im);
  if (!p.b_re.empty()) out.db_re = bias_grad(dy.re);
  if (!p.b_im.empty()) out.db_im = bias_grad(dy.im);
  return out;
}

#define DCAEC_INSTANTIATE_CONV(T)                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&,               \
                            const ConvSpec&);                                 \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&,   \
                                        const Tensor<T>&, const ConvSpec&);   \
  template ComplexPair<T> complex_conv2d(                                     \
      const ComplexPair<T>&, const ComplexConvParams<T>&, const ConvSpec&);   \
  template ComplexPair<T> complex_deconv2d(                                   \
      const ComplexPair<T>&, const ComplexConvParams<T>&, const ConvSpec&);   \
  template ComplexConvGrads<T> complex_conv2d_backward(                       \
      const ComplexPair<T>&, const ComplexPair<T>&,                           \
      const ComplexConvParams<T>&, const ConvSpec&);

DCAEC_INSTANTIATE_CONV(float)
DCAEC_INSTANTIATE_CONV(double)

}  // namespace dcaec::nn
