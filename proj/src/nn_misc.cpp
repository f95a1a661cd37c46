// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/nn.hpp"
#include "eigen_util.hpp"

namespace dcaec::nn {

using detail::ConstMatMap;
using detail::MatMap;

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& alpha) {
  if (x.rank() == 0 || alpha.rank() != 1 || alpha.dim(0) != x.dim(0)) {
    throw ShapeError("prelu: alpha " + to_string(alpha.shape()) +
                     " does not match channels of " + to_string(x.shape()));
  }
  Tensor<T> y(x.shape());
  const std::size_t channels = x.dim(0), plane = x.size() / channels;
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    const T a = alpha[c];
    const T* src = x.data() + c * plane;
    T* dst = y.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = src[i] >= T(0) ? src[i] : a * src[i];
    }
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> prelu_backward(const Tensor<T>& dy,
                                               const Tensor<T>& x,
                                               const Tensor<T>& alpha) {
  require_shape(dy, x.shape(), "prelu grad");
  Tensor<T> dx(x.shape()), dalpha(alpha.shape());
  const std::size_t channels = x.dim(0), plane = x.size() / channels;
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    const T a = alpha[c];
    T acc = 0;
    for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
      if (x[i] >= T(0)) {
        dx[i] = dy[i];
      } else {
        dx[i] = a * dy[i];
        acc += dy[i] * x[i];
      }
    }
    dalpha[c] = acc;
  }
  return {std::move(dx), std::move(dalpha)};
}

template <typename T>
ComplexPair<T> complex_multiply(const ComplexPair<T>& a,
                                const ComplexPair<T>& b) {
  a.validate();
  b.validate();
  if (a.shape() != b.shape()) {
    throw ShapeError("complex multiply: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  ComplexPair<T> out(a.shape());
  const std::size_t n = a.re.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    out.re[i] = a.re[i] * b.re[i] - a.im[i] * b.im[i];
    out.im[i] = a.re[i] * b.im[i] + a.im[i] * b.re[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void check_dense(const Tensor<T>& x, const DenseParams<T>& p) {
  if (p.w.rank() != 2 || p.b.rank() != 1 || p.b.dim(0) != p.w.dim(0)) {
    throw ShapeError("dense: malformed parameters " + to_string(p.w.shape()) +
                     " / " + to_string(p.b.shape()));
  }
  if (x.rank() == 0 || x.shape().back() != p.in_dim()) {
    throw ShapeError("dense: input " + to_string(x.shape()) +
                     " last axis != " + std::to_string(p.in_dim()));
  }
}

}  // namespace

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const DenseParams<T>& p) {
  check_dense(x, p);
  const std::size_t rows = x.size() / p.in_dim();
  Shape out_shape = x.shape();
  out_shape.back() = p.out_dim();
  Tensor<T> y(out_shape);
  MatMap<T> ym(y.data(), rows, p.out_dim());
  ym.noalias() = ConstMatMap<T>(x.data(), rows, p.in_dim()) *
                 ConstMatMap<T>(p.w.data(), p.out_dim(), p.in_dim()).transpose();
  ym.rowwise() += detail::ConstVecMap<T>(p.b.data(), p.out_dim()).transpose();
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& dy, const Tensor<T>& x,
                             const DenseParams<T>& p) {
  check_dense(x, p);
  const std::size_t rows = x.size() / p.in_dim();
  if (dy.size() != rows * p.out_dim()) {
    throw ShapeError("dense grad: output gradient has wrong size");
  }
  ConstMatMap<T> dym(dy.data(), rows, p.out_dim());
  DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(p.w.shape()),
                  Tensor<T>(p.b.shape())};
  MatMap<T>(g.dx.data(), rows, p.in_dim()).noalias() =
      dym * ConstMatMap<T>(p.w.data(), p.out_dim(), p.in_dim());
  MatMap<T>(g.dw.data(), p.out_dim(), p.in_dim()).noalias() =
      dym.transpose() * ConstMatMap<T>(x.data(), rows, p.in_dim());
  // fixed-order sum, see lstm_layer_backward
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < p.out_dim(); ++j) g.db[j] += dy[r * p.out_dim() + j];
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void check_deep_filter(const ComplexPair<T>& coef,
                       const ComplexPair<T>& target) {
  coef.validate();
  target.validate();
  if (coef.re.rank() != 3 || coef.re.dim(0) != kDeepFilterTaps) {
    throw ShapeError("deep filter: expected 9 coefficient channels, got " +
                     to_string(coef.shape()));
  }
  if (target.re.rank() != 3 || target.re.dim(0) != 1 ||
      target.re.dim(1) != coef.re.dim(1) ||
      target.re.dim(2) != coef.re.dim(2)) {
    throw ShapeError("deep filter: target " + to_string(target.shape()) +
                     " does not match coefficients " + to_string(coef.shape()));
  }
}

}  // namespace

template <typename T>
ComplexPair<T> deep_filter_apply(const ComplexPair<T>& coef,
                                 const ComplexPair<T>& target) {
  check_deep_filter(coef, target);
  const std::size_t frames = coef.re.dim(1), bins = coef.re.dim(2);
  const std::size_t plane = frames * bins;
  ComplexPair<T> out(Shape{1, frames, bins});
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t f = 0; f < bins; ++f) {
      T acc_re = 0, acc_im = 0;
      for (int df = -1; df <= 1; ++df) {
        const long long fi = static_cast<long long>(f) + df;
        if (fi < 0 || fi >= static_cast<long long>(bins)) continue;
        for (int dt = -1; dt <= 1; ++dt) {
          const long long ti = static_cast<long long>(t) + dt;
          if (ti < 0 || ti >= static_cast<long long>(frames)) continue;
          const std::size_t k = deep_filter_channel(df, dt) * plane + t * bins + f;
          const std::size_t s = static_cast<std::size_t>(ti) * bins +
                                static_cast<std::size_t>(fi);
          const T cr = coef.re[k], ci = coef.im[k];
          const T xr = target.re[s], xi = target.im[s];
          acc_re += cr * xr - ci * xi;
          acc_im += cr * xi + ci * xr;
        }
      }
      out.re[t * bins + f] = acc_re;
      out.im[t * bins + f] = acc_im;
    }
  }
  return out;
}

template <typename T>
DeepFilterGrads<T> deep_filter_backward(const ComplexPair<T>& dy,
                                        const ComplexPair<T>& coef,
                                        const ComplexPair<T>& target) {
  check_deep_filter(coef, target);
  const std::size_t frames = coef.re.dim(1), bins = coef.re.dim(2);
  const std::size_t plane = frames * bins;
  require_shape(dy.re, {1, frames, bins}, "deep filter grad");
  DeepFilterGrads<T> g{ComplexPair<T>(coef.shape()),
                       ComplexPair<T>(target.shape())};
  // target gradient is a gather over outputs that read (t, f), which keeps
  // the loop race-free when parallel over frames
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t f = 0; f < bins; ++f) {
      const T gr = dy.re[t * bins + f], gi = dy.im[t * bins + f];
      T tr = 0, ti_acc = 0;
      for (int df = -1; df <= 1; ++df) {
        const long long fi = static_cast<long long>(f) + df;
        const long long fo = static_cast<long long>(f) - df;
        for (int dt = -1; dt <= 1; ++dt) {
          const std::size_t ch = deep_filter_channel(df, dt);
          const long long tin = static_cast<long long>(t) + dt;
          if (fi >= 0 && fi < static_cast<long long>(bins) && tin >= 0 &&
              tin < static_cast<long long>(frames)) {
            const std::size_t s = static_cast<std::size_t>(tin) * bins +
                                  static_cast<std::size_t>(fi);
            const std::size_t k = ch * plane + t * bins + f;
            const T xr = target.re[s], xi = target.im[s];
            g.dcoef.re[k] = gr * xr + gi * xi;
            g.dcoef.im[k] = -gr * xi + gi * xr;
          }
          // output (t - dt, f - df) read this target cell through tap ch
          const long long tout = static_cast<long long>(t) - dt;
          if (fo >= 0 && fo < static_cast<long long>(bins) && tout >= 0 &&
              tout < static_cast<long long>(frames)) {
            const std::size_t o = static_cast<std::size_t>(tout) * bins +
                                  static_cast<std::size_t>(fo);
            const std::size_t k = ch * plane + o;
            const T cr = coef.re[k], ci = coef.im[k];
            const T hr = dy.re[o], hi = dy.im[o];
            tr += hr * cr + hi * ci;
            ti_acc += -hr * ci + hi * cr;
          }
        }
      }
      g.dtarget.re[t * bins + f] = tr;
      g.dtarget.im[t * bins + f] = ti_acc;
    }
  }
  return g;
}

#define DCAEC_INSTANTIATE_MISC(T)                                              \
  template Tensor<T> prelu(const Tensor<T>&, const Tensor<T>&);               \
  template std::pair<Tensor<T>, Tensor<T>> prelu_backward(                    \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template ComplexPair<T> complex_multiply(const ComplexPair<T>&,             \
                                           const ComplexPair<T>&);            \
  template Tensor<T> dense(const Tensor<T>&, const DenseParams<T>&);          \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&,   \
                                        const DenseParams<T>&);               \
  template ComplexPair<T> deep_filter_apply(const ComplexPair<T>&,            \
                                            const ComplexPair<T>&);           \
  template DeepFilterGrads<T> deep_filter_backward(                           \
      const ComplexPair<T>&, const ComplexPair<T>&, const ComplexPair<T>&);

DCAEC_INSTANTIATE_MISC(float)
DCAEC_INSTANTIATE_MISC(double)

}  // namespace dcaec::nn
