// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/nn.hpp"
#include "eigen_util.hpp"

namespace dcaec::nn {

using detail::ConstMatMap;
using detail::ConstStridedMap;
using detail::MatMap;
using detail::RowMat;
using detail::StridedMap;

template <typename T>
void LstmParams<T>::validate() const {
  if (w_ih.rank() != 2 || w_hh.rank() != 2 || b.rank() != 1) {
    throw ShapeError("lstm: parameters must be (4H,D), (4H,H), (4H)");
  }
  const std::size_t h = w_hh.dim(1);
  if (w_hh.dim(0) != 4 * h || w_ih.dim(0) != 4 * h || b.dim(0) != 4 * h) {
    throw ShapeError("lstm: gate shapes " + to_string(w_ih.shape()) + ", " +
                     to_string(w_hh.shape()) + ", " + to_string(b.shape()) +
                     " inconsistent");
  }
}

template <typename T>
void LstmSpec<T>::validate() const {
  fwd.validate();
  if (fwd.input() != input_dim || fwd.hidden() != hidden_dim) {
    throw ShapeError("lstm spec: forward weights do not match dims");
  }
  if (bidirectional) {
    bwd.validate();
    if (bwd.input() != input_dim || bwd.hidden() != hidden_dim) {
      throw ShapeError("lstm spec: backward weights do not match dims");
    }
  }
}

namespace {

// Row offset and row stride of step s inside a sequence batch.
struct StepRows {
  std::size_t first;
  std::size_t stride;
};

StepRows step_rows(const SeqLayout& l, std::size_t s) {
  return l.batch_major ? StepRows{s, l.steps} : StepRows{s * l.batch, 1};
}

template <typename T>
void check_seq(const Tensor<T>& x, const SeqLayout& l, std::size_t dim,
               const char* what) {
  if (x.rank() == 0 || x.shape().back() != dim ||
      x.size() != l.steps * l.batch * dim) {
    throw ShapeError(std::string(what) + ": tensor " + to_string(x.shape()) +
                     " does not hold " + std::to_string(l.batch) + " x " +
                     std::to_string(l.steps) + " steps of dim " +
                     std::to_string(dim));
  }
}

template <typename Derived>
void sigmoid_inplace(Eigen::MatrixBase<Derived>&& m) {
  using T = typename Derived::Scalar;
  m.array() = T(0.5) * (T(0.5) * m.array()).tanh() + T(0.5);
}

}  // namespace

template <typename T>
Tensor<T> lstm_scan(const Tensor<T>& x, const SeqLayout& layout,
                    const LstmParams<T>& p, bool reverse, NoDeduce<LstmState<T>>* state,
                    NoDeduce<LstmCache<T>>* cache) {
  p.validate();
  const std::size_t S = layout.steps, B = layout.batch;
  const std::size_t D = p.input(), H = p.hidden(), G = 4 * H;
  check_seq(x, layout, D, "lstm input");
  Shape out_shape = x.shape();
  out_shape.back() = H;
  Tensor<T> y(out_shape);

  LstmState<T> init = state ? *state : LstmState<T>::zeros(B, H);
  require_shape(init.h, {B, H}, "lstm state h");
  require_shape(init.c, {B, H}, "lstm state c");

  RowMat<T> xproj(S * B, G);
  xproj.noalias() = ConstMatMap<T>(x.data(), S * B, D) *
                    ConstMatMap<T>(p.w_ih.data(), G, D).transpose();
  xproj.rowwise() += detail::ConstVecMap<T>(p.b.data(), G).transpose();
  ConstMatMap<T> whh(p.w_hh.data(), G, H);

  RowMat<T> h = ConstMatMap<T>(init.h.data(), B, H);
  RowMat<T> c = ConstMatMap<T>(init.c.data(), B, H);
  RowMat<T> gates(B, G);
  if (cache) {
    cache->x = x;
    cache->layout = layout;
    cache->reverse = reverse;
    cache->gates = Tensor<T>({S, B, G});
    cache->cells = Tensor<T>({S, B, H});
    cache->hidden = Tensor<T>({S, B, H});
    cache->init = init;
  }
  for (std::size_t k = 0; k < S; ++k) {
    const std::size_t s = reverse ? S - 1 - k : k;
    const StepRows rows = step_rows(layout, s);
    gates.noalias() = ConstStridedMap<T>(xproj.data() + rows.first * G, B, G,
                                         Eigen::OuterStride<>(rows.stride * G));
    gates.noalias() += h * whh.transpose();
    sigmoid_inplace(gates.leftCols(2 * H));
    gates.middleCols(2 * H, H).array() = gates.middleCols(2 * H, H).array().tanh();
    sigmoid_inplace(gates.rightCols(H));
    c.array() = gates.middleCols(H, H).array() * c.array() +
                gates.leftCols(H).array() * gates.middleCols(2 * H, H).array();
    h.array() = gates.rightCols(H).array() * c.array().tanh();
    StridedMap<T>(y.data() + rows.first * H, B, H,
                  Eigen::OuterStride<>(rows.stride * H)) = h;
    if (cache) {
      MatMap<T>(cache->gates.data() + s * B * G, B, G) = gates;
      MatMap<T>(cache->cells.data() + s * B * H, B, H) = c;
      MatMap<T>(cache->hidden.data() + s * B * H, B, H) = h;
    }
  }
  if (state) {
    MatMap<T>(state->h.data(), B, H) = h;
    MatMap<T>(state->c.data(), B, H) = c;
  }
  return y;
}

template <typename T>
LstmGrads<T> lstm_scan_backward(const Tensor<T>& dy, const LstmCache<T>& cache,
                                const LstmParams<T>& p) {
  const SeqLayout& layout = cache.layout;
  const std::size_t S = layout.steps, B = layout.batch;
  const std::size_t D = p.input(), H = p.hidden(), G = 4 * H;
  check_seq(dy, layout, H, "lstm output grad");

  RowMat<T> dgates_all(S * B, G);
  RowMat<T> dh_next = RowMat<T>::Zero(B, H);
  RowMat<T> dc_next = RowMat<T>::Zero(B, H);
  RowMat<T> dgates(B, G), dh(B, H), dc(B, H), tc(B, H);
  LstmGrads<T> g;
  g.dw_hh = Tensor<T>(p.w_hh.shape());
  MatMap<T> dwhh(g.dw_hh.data(), G, H);
  ConstMatMap<T> whh(p.w_hh.data(), G, H);

  for (std::size_t kk = S; kk-- > 0;) {
    const std::size_t s = cache.reverse ? S - 1 - kk : kk;
    const bool first = (kk == 0);
    const std::size_t prev = cache.reverse ? s + 1 : s - 1;  // valid if !first
    const StepRows rows = step_rows(layout, s);

    ConstMatMap<T> gs(cache.gates.data() + s * B * G, B, G);
    ConstMatMap<T> cs(cache.cells.data() + s * B * H, B, H);
    ConstMatMap<T> c_prev(first ? cache.init.c.data()
                                : cache.cells.data() + prev * B * H,
                          B, H);
    ConstMatMap<T> h_prev(first ? cache.init.h.data()
                                : cache.hidden.data() + prev * B * H,
                          B, H);

    dh = ConstStridedMap<T>(dy.data() + rows.first * H, B, H,
                            Eigen::OuterStride<>(rows.stride * H));
    dh += dh_next;
    tc.array() = cs.array().tanh();
    const auto i = gs.leftCols(H).array();
    const auto f = gs.middleCols(H, H).array();
    const auto gg = gs.middleCols(2 * H, H).array();
    const auto o = gs.rightCols(H).array();
    dc.array() = dc_next.array() +
                 dh.array() * o * (T(1) - tc.array() * tc.array());
    dgates.leftCols(H).array() = dc.array() * gg * i * (T(1) - i);
    dgates.middleCols(H, H).array() =
        dc.array() * c_prev.array() * f * (T(1) - f);
    dgates.middleCols(2 * H, H).array() = dc.array() * i * (T(1) - gg * gg);
    dgates.rightCols(H).array() = dh.array() * tc.array() * o * (T(1) - o);
    dc_next.array() = dc.array() * f;

    dh_next.noalias() = dgates * whh;
    dwhh.noalias() += dgates.transpose() * h_prev;
    StridedMap<T>(dgates_all.data() + rows.first * G, B, G,
                  Eigen::OuterStride<>(rows.stride * G)) = dgates;
  }

  ConstMatMap<T> xm(cache.x.data(), S * B, D);
  g.dw_ih = Tensor<T>(p.w_ih.shape());
  MatMap<T>(g.dw_ih.data(), G, D).noalias() = dgates_all.transpose() * xm;
  g.db = Tensor<T>(p.b.shape());
  // plain row loop: Eigen's vectorized colwise sum picks its summation order
  // from the buffer alignment, which made training traces differ run to run
  for (std::size_t r = 0; r < S * B; ++r) {
    const T* row = dgates_all.data() + r * G;
    for (std::size_t j = 0; j < G; ++j) g.db[j] += row[j];
  }
  g.dx = Tensor<T>(cache.x.shape());
  MatMap<T>(g.dx.data(), S * B, D).noalias() =
      dgates_all * ConstMatMap<T>(p.w_ih.data(), G, D);
  return g;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t ha = a.shape().back(), hb = b.shape().back();
  const std::size_t rows = a.size() / ha;
  Shape s = a.shape();
  s.back() = ha + hb;
  Tensor<T> out(s);
  MatMap<T> om(out.data(), rows, ha + hb);
  om.leftCols(ha) = ConstMatMap<T>(a.data(), rows, ha);
  om.rightCols(hb) = ConstMatMap<T>(b.data(), rows, hb);
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_last(const Tensor<T>& x,
                                           std::size_t left) {
  const std::size_t width = x.shape().back(), right = width - left;
  const std::size_t rows = x.size() / width;
  Shape sl = x.shape(), sr = x.shape();
  sl.back() = left;
  sr.back() = right;
  Tensor<T> a(sl), b(sr);
  ConstMatMap<T> xm(x.data(), rows, width);
  MatMap<T>(a.data(), rows, left) = xm.leftCols(left);
  MatMap<T>(b.data(), rows, right) = xm.rightCols(right);
  return {std::move(a), std::move(b)};
}

}  // namespace

template <typename T>
Tensor<T> lstm_layer(const Tensor<T>& x, const SeqLayout& layout,
                     const LstmSpec<T>& spec, NoDeduce<LstmState<T>>* state,
                     NoDeduce<LstmLayerCache<T>>* cache) {
  spec.validate();
  if (!spec.bidirectional) {
    return lstm_scan(x, layout, spec.fwd, false, state,
                     cache ? &cache->fwd : nullptr);
  }
  if (state) {
    throw std::invalid_argument(
        "lstm: bidirectional layers run full sequences only (no carried state)");
  }
  Tensor<T> yf =
      lstm_scan<T>(x, layout, spec.fwd, false, nullptr, cache ? &cache->fwd : nullptr);
  Tensor<T> yb =
      lstm_scan<T>(x, layout, spec.bwd, true, nullptr, cache ? &cache->bwd : nullptr);
  return concat_last(yf, yb);
}

template <typename T>
LstmLayerGrads<T> lstm_layer_backward(const Tensor<T>& dy,
                                      const LstmLayerCache<T>& cache,
                                      const LstmSpec<T>& spec) {
  LstmLayerGrads<T> g;
  if (!spec.bidirectional) {
    g.fwd = lstm_scan_backward(dy, cache.fwd, spec.fwd);
    g.dx = g.fwd.dx;
    return g;
  }
  auto [dyf, dyb] = split_last(dy, spec.hidden_dim);
  g.fwd = lstm_scan_backward(dyf, cache.fwd, spec.fwd);
  g.bwd = lstm_scan_backward(dyb, cache.bwd, spec.bwd);
  g.dx = g.fwd.dx;
  g.dx += g.bwd.dx;
  return g;
}

template <typename T>
std::pair<Tensor<T>, LstmState<T>> lstm_forward(const Tensor<T>& x,
                                                const LstmSpec<T>& spec,
                                                const NoDeduce<LstmState<T>>* state) {
  if (x.rank() != 2) throw ShapeError("lstm_forward: expected (steps, dim)");
  const SeqLayout layout{x.dim(0), 1, false};
  if (spec.bidirectional) {
    return {lstm_layer(x, layout, spec), LstmState<T>{}};
  }
  LstmState<T> st =
      state ? *state : LstmState<T>::zeros(1, spec.hidden_dim);
  Tensor<T> y = lstm_layer(x, layout, spec, &st);
  return {std::move(y), std::move(st)};
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> ft_lstm_branch(const Tensor<T>& h, const FtLstmParams<T>& p,
                         NoDeduce<LstmState<T>>* t_state, NoDeduce<FtLstmCache<T>>* cache,
                         FtLstmTrace* trace) {
  if (h.rank() != 3) throw ShapeError("ft-lstm: expected (C, T, F) input");
  const std::size_t C = h.dim(0), T_ = h.dim(1), F = h.dim(2);
  if (p.f_lstm.input_dim != C || p.t_lstm.input_dim != C ||
      !p.f_lstm.bidirectional || p.t_lstm.bidirectional ||
      p.f_proj.out_dim() != C || p.t_proj.out_dim() != C ||
      p.f_proj.in_dim() != p.f_lstm.output_dim() ||
      p.t_proj.in_dim() != p.t_lstm.output_dim()) {
    throw ShapeError("ft-lstm: parameters do not match " + std::to_string(C) +
                     " channels");
  }
  // frequency stage: one sequence along F per frame
  Tensor<T> hr = permute3(h, {1, 2, 0});  // (T, F, C)
  LstmLayerCache<T>* fc = cache ? &cache->f_cache : nullptr;
  Tensor<T> f_out = lstm_layer<T>(hr, SeqLayout{F, T_, true}, p.f_lstm, nullptr, fc);
  Tensor<T> u = dense(f_out, p.f_proj);  // (T, F, C)
  Tensor<T> v = permute3(u, {2, 0, 1});  // (C, T, F)
  v += h;
  // time stage: one sequence along T per bin
  Tensor<T> vr = permute3(v, {2, 1, 0});  // (F, T, C)
  LstmLayerCache<T>* tc = cache ? &cache->t_cache : nullptr;
  Tensor<T> t_out = lstm_layer(vr, SeqLayout{T_, F, true}, p.t_lstm, t_state, tc);
  Tensor<T> z = dense(t_out, p.t_proj);  // (F, T, C)
  Tensor<T> out = permute3(z, {2, 1, 0});
  out += v;
  if (trace) *trace = FtLstmTrace{hr.shape(), u.shape(), vr.shape(), z.shape()};
  if (cache) {
    cache->h_reshape = std::move(hr);
    cache->f_out = std::move(f_out);
    cache->t_in = std::move(vr);
    cache->t_out = std::move(t_out);
  }
  return out;
}

template <typename T>
FtLstmGrads<T> ft_lstm_branch_backward(const Tensor<T>& dz,
                                       const FtLstmCache<T>& cache,
                                       const FtLstmParams<T>& p) {
  FtLstmGrads<T> g;
  Tensor<T> dv = dz;
  // time stage
  Tensor<T> dzr = permute3(dz, {2, 1, 0});
  g.t_proj = dense_backward(dzr, cache.t_out, p.t_proj);
  g.t_lstm = lstm_layer_backward(g.t_proj.dx, cache.t_cache, p.t_lstm);
  dv += permute3(g.t_lstm.dx, {2, 1, 0});
  // frequency stage
  Tensor<T> du = permute3(dv, {1, 2, 0});
  g.f_proj = dense_backward(du, cache.f_out, p.f_proj);
  g.f_lstm = lstm_layer_backward(g.f_proj.dx, cache.f_cache, p.f_lstm);
  g.dh = std::move(dv);
  g.dh += permute3(g.f_lstm.dx, {2, 0, 1});
  return g;
}

template <typename T>
ComplexPair<T> ft_lstm_block(const ComplexPair<T>& h, const FtLstmParams<T>& re,
                             const FtLstmParams<T>& im) {
  h.validate();
  return {ft_lstm_branch(h.re, re), ft_lstm_branch(h.im, im)};
}

// ---------------------------------------------------------------------------

template <typename T>
ComplexLstmState<T> ComplexLstmState<T>::zeros(const ComplexLstmParams<T>& p) {
  ComplexLstmState<T> s;
  for (const auto& layer : p.layers) {
    s.real.push_back(LstmState<T>::zeros(2, layer.real.hidden_dim));
    s.imag.push_back(LstmState<T>::zeros(2, layer.imag.hidden_dim));
  }
  return s;
}

namespace {

template <typename T>
Tensor<T> stack_two(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> s({2, a.dim(0), a.dim(1)});
  std::copy(a.values().begin(), a.values().end(), s.data());
  std::copy(b.values().begin(), b.values().end(), s.data() + a.size());
  return s;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> unstack_two(const Tensor<T>& s) {
  const Shape half{s.dim(1), s.dim(2)};
  const std::size_t n = numel(half);
  Tensor<T> a(half), b(half);
  std::copy(s.data(), s.data() + n, a.data());
  std::copy(s.data() + n, s.data() + 2 * n, b.data());
  return {std::move(a), std::move(b)};
}

}  // namespace

template <typename T>
ComplexPair<T> complex_lstm(const ComplexPair<T>& x,
                            const ComplexLstmParams<T>& p,
                            NoDeduce<ComplexLstmState<T>>* state,
                            NoDeduce<ComplexLstmCache<T>>* cache) {
  x.validate();
  if (x.re.rank() != 2) throw ShapeError("complex lstm: expected (T, D) input");
  if (p.layers.empty()) throw std::invalid_argument("complex lstm: no layers");
  if (state && (state->real.size() != p.layers.size() ||
                state->imag.size() != p.layers.size())) {
    throw std::invalid_argument("complex lstm: state depth mismatch");
  }
  const std::size_t steps = x.re.dim(0);
  const SeqLayout layout{steps, 2, true};
  Tensor<T> stack = stack_two(x.re, x.im);
  if (cache) {
    cache->inputs.clear();
    cache->real.assign(p.layers.size(), {});
    cache->imag.assign(p.layers.size(), {});
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    if (layer.real.bidirectional || layer.imag.bidirectional) {
      throw std::invalid_argument("complex lstm: layers must be unidirectional");
    }
    Tensor<T> a = lstm_layer(stack, layout, layer.real,
                             state ? &state->real[l] : nullptr,
                             cache ? &cache->real[l] : nullptr);
    Tensor<T> b = lstm_layer(stack, layout, layer.imag,
                             state ? &state->imag[l] : nullptr,
                             cache ? &cache->imag[l] : nullptr);
    const std::size_t half = a.size() / 2;
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < half; ++i) {
      out[i] = a[i] - b[half + i];         // r2r - i2i
      out[half + i] = a[half + i] + b[i];  // i2r + r2i
    }
    if (cache) cache->inputs.push_back(std::move(stack));
    stack = std::move(out);
  }
  auto [re, im] = unstack_two(stack);
  if (!p.has_proj) return {std::move(re), std::move(im)};
  ComplexPair<T> y(dense(re, p.proj_re), dense(im, p.proj_im));
  if (cache) {
    cache->last_re = std::move(re);
    cache->last_im = std::move(im);
  }
  return y;
}

template <typename T>
ComplexLstmGrads<T> complex_lstm_backward(const ComplexPair<T>& dy,
                                          const ComplexLstmCache<T>& cache,
                                          const ComplexLstmParams<T>& p) {
  ComplexLstmGrads<T> g;
  Tensor<T> dre = dy.re, dim = dy.im;
  if (p.has_proj) {
    g.proj_re = dense_backward(dy.re, cache.last_re, p.proj_re);
    g.proj_im = dense_backward(dy.im, cache.last_im, p.proj_im);
    dre = g.proj_re.dx;
    dim = g.proj_im.dx;
  }
  Tensor<T> dstack = stack_two(dre, dim);
  g.real.resize(p.layers.size());
  g.imag.resize(p.layers.size());
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const std::size_t half = dstack.size() / 2;
    // out_re = A_re - B_im, out_im = A_im + B_re
    Tensor<T> db(dstack.shape());
    for (std::size_t i = 0; i < half; ++i) {
      db[i] = dstack[half + i];
      db[half + i] = -dstack[i];
    }
    g.real[l] = lstm_layer_backward(dstack, cache.real[l], p.layers[l].real);
    g.imag[l] = lstm_layer_backward(db, cache.imag[l], p.layers[l].imag);
    dstack = g.real[l].dx;
    dstack += g.imag[l].dx;
  }
  auto [dxr, dxi] = unstack_two(dstack);
  g.dx = ComplexPair<T>(std::move(dxr), std::move(dxi));
  return g;
}

#define DCAEC_INSTANTIATE_LSTM(T)                                              \
  template struct LstmParams<T>;                                              \
  template struct LstmSpec<T>;                                                \
  template struct ComplexLstmState<T>;                                        \
  template Tensor<T> lstm_scan(const Tensor<T>&, const SeqLayout&,            \
                               const LstmParams<T>&, bool, LstmState<T>*,     \
                               LstmCache<T>*);                                \
  template LstmGrads<T> lstm_scan_backward(                                   \
      const Tensor<T>&, const LstmCache<T>&, const LstmParams<T>&);           \
  template Tensor<T> lstm_layer(const Tensor<T>&, const SeqLayout&,           \
                                const LstmSpec<T>&, LstmState<T>*,            \
                                LstmLayerCache<T>*);                          \
  template LstmLayerGrads<T> lstm_layer_backward(                             \
      const Tensor<T>&, const LstmLayerCache<T>&, const LstmSpec<T>&);        \
  template std::pair<Tensor<T>, LstmState<T>> lstm_forward(                   \
      const Tensor<T>&, const LstmSpec<T>&, const LstmState<T>*);             \
  template Tensor<T> ft_lstm_branch(const Tensor<T>&, const FtLstmParams<T>&, \
                                    LstmState<T>*, FtLstmCache<T>*,           \
                                    FtLstmTrace*);                            \
  template FtLstmGrads<T> ft_lstm_branch_backward(                            \
      const Tensor<T>&, const FtLstmCache<T>&, const FtLstmParams<T>&);       \
  template ComplexPair<T> ft_lstm_block(                                      \
      const ComplexPair<T>&, const FtLstmParams<T>&, const FtLstmParams<T>&); \
  template ComplexPair<T> complex_lstm(const ComplexPair<T>&,                 \
                                       const ComplexLstmParams<T>&,           \
                                       ComplexLstmState<T>*,                  \
                                       ComplexLstmCache<T>*);                 \
  template ComplexLstmGrads<T> complex_lstm_backward(                         \
      const ComplexPair<T>&, const ComplexLstmCache<T>&,                      \
      const ComplexLstmParams<T>&);

DCAEC_INSTANTIATE_LSTM(float)
DCAEC_INSTANTIATE_LSTM(double)

}  // namespace dcaec::nn
