// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace dcaec::ag {

namespace {

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& what) {
  if (!all_finite(t)) throw NumericError("non-finite values in " + what);
}

}  // namespace

template <typename T>
Var Tape<T>::constant(Tensor<T> value, std::string op) {
  return record(std::move(op), std::move(value), {});
}

template <typename T>
Var Tape<T>::variable(const std::string& name, Tensor<T> value) {
  if (variables_.count(name)) {
    throw std::invalid_argument("tape: duplicate variable " + name);
  }
  const Var v = record(name, std::move(value), {});
  variables_[name] = v;
  return v;
}

template <typename T>
void Tape<T>::bind(const std::string& name, const Tensor<T>& storage) {
  if (bound_index_.count(&storage)) {
    throw std::invalid_argument("tape: tensor bound twice (" + name + ")");
  }
  bound_index_[&storage] = bound_.size();
  bound_.push_back({name, &storage, Tensor<T>()});
}

template <typename T>
bool Tape<T>::is_bound(const Tensor<T>& storage) const {
  return bound_index_.count(&storage) > 0;
}

template <typename T>
void Tape<T>::accumulate_param(const Tensor<T>& storage, const Tensor<T>& g) {
  auto it = bound_index_.find(&storage);
  if (it == bound_index_.end()) return;
  Bound& b = bound_[it->second];
  require_finite(g, "gradient of " + b.name);
  if (b.grad.empty() && !storage.empty()) b.grad = Tensor<T>(storage.shape());
  b.grad += g;
}

template <typename T>
Var Tape<T>::record(std::string op, Tensor<T> value, std::vector<Var> inputs,
                    Backward backward) {
  require_finite(value, op);
  nodes_.push_back({std::move(op), std::move(value), Tensor<T>(),
                    std::move(inputs),
                    grad_enabled_ ? std::move(backward) : Backward{}});
  return nodes_.size() - 1;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) {
  Node& n = nodes_.at(v);
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::accumulate(Var v, const Tensor<T>& g) {
  Node& n = nodes_.at(v);
  require_finite(g, "gradient into " + n.op);
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor<T>(n.value.shape());
  if (g.size() != n.grad.size()) {
    throw ShapeError("tape: gradient for " + n.op + " has shape " +
                     to_string(g.shape()) + ", value " +
                     to_string(n.value.shape()));
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (!grad_enabled_) throw std::logic_error("tape: gradients are disabled");
  if (value(loss).size() != 1) {
    throw std::invalid_argument("tape: loss must be a scalar, got " +
                                to_string(shape(loss)));
  }
  for (auto& n : nodes_) n.grad = Tensor<T>();
  for (auto& b : bound_) b.grad = Tensor<T>();
  nodes_[loss].grad = Tensor<T>(nodes_[loss].value.shape(), T(1));
  visits_ = 0;
  for (Var v = loss + 1; v-- > 0;) {
    if (!nodes_[v].backward) continue;
    nodes_[v].backward(*this);
    ++visits_;
  }
}

template <typename T>
std::map<std::string, Tensor<T>> Tape<T>::gradients() {
  std::map<std::string, Tensor<T>> out;
  for (const auto& [name, v] : variables_) out[name] = grad(v);
  for (const auto& b : bound_) {
    out[b.name] = b.grad.empty() ? Tensor<T>(b.storage->shape()) : b.grad;
  }
  return out;
}

template <typename T>
std::size_t Tape<T>::op_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += node.backward ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
ComplexPair<T> pair_of(Tape<T>& t, CVar v) {
  return ComplexPair<T>(t.value(v.re), t.value(v.im));
}

template <typename T>
ComplexPair<T> grad_of(Tape<T>& t, Var re_id) {
  return ComplexPair<T>(t.grad(re_id), t.grad(re_id + 1));
}

template <typename T>
CVar record_pair(Tape<T>& t, const std::string& name, ComplexPair<T> value,
                 std::vector<Var> inputs, typename Tape<T>::Backward bw) {
  CVar out;
  out.re = t.record(name + ".re", std::move(value.re), inputs, std::move(bw));
  out.im = t.record(name + ".im", std::move(value.im), std::move(inputs));
  return out;
}

template <typename T>
void accumulate_pair(Tape<T>& t, CVar v, const ComplexPair<T>& g) {
  t.accumulate(v.re, g.re);
  t.accumulate(v.im, g.im);
}

template <typename T>
void accumulate_lstm(Tape<T>& t, const nn::LstmParams<T>& p,
                     const nn::LstmGrads<T>& g) {
  t.accumulate_param(p.w_ih, g.dw_ih);
  t.accumulate_param(p.w_hh, g.dw_hh);
  t.accumulate_param(p.b, g.db);
}

template <typename T>
void accumulate_layer(Tape<T>& t, const nn::LstmSpec<T>& s,
                      const nn::LstmLayerGrads<T>& g) {
  accumulate_lstm(t, s.fwd, g.fwd);
  if (s.bidirectional) accumulate_lstm(t, s.bwd, g.bwd);
}

template <typename T>
void accumulate_dense(Tape<T>& t, const nn::DenseParams<T>& p,
                      const nn::DenseGrads<T>& g) {
  t.accumulate_param(p.w, g.dw);
  t.accumulate_param(p.b, g.db);
}

}  // namespace

template <typename T>
Var add(Tape<T>& tape, Var a, Var b, const std::string& name) {
  Tensor<T> v = tape.value(a);
  v += tape.value(b);
  const Var out = tape.size();
  return tape.record(name, std::move(v), {a, b}, [=](Tape<T>& t) {
    const Tensor<T> g = t.grad(out);
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename T>
Var reshape(Tape<T>& tape, Var a, Shape shape, const std::string& name) {
  Tensor<T> v = tape.value(a).reshaped(std::move(shape));
  const Var out = tape.size();
  return tape.record(name, std::move(v), {a}, [=](Tape<T>& t) {
    t.accumulate(a, t.grad(out).reshaped(t.shape(a)));
  });
}

template <typename T>
CVar reshape(Tape<T>& tape, CVar a, const Shape& shape, const std::string& name) {
  return {reshape(tape, a.re, shape, name + ".re"),
          reshape(tape, a.im, shape, name + ".im")};
}

template <typename T>
Var concat0(Tape<T>& tape, const std::vector<Var>& parts,
            const std::string& name) {
  if (parts.empty()) throw ShapeError(name + ": nothing to concatenate");
  Shape tail(tape.shape(parts[0]).begin() + 1, tape.shape(parts[0]).end());
  std::size_t lead = 0;
  for (Var p : parts) {
    const Shape& s = tape.shape(p);
    if (s.empty() || Shape(s.begin() + 1, s.end()) != tail) {
      throw ShapeError(name + ": cannot concatenate " + to_string(s) +
                       " onto (.., " + to_string(tail) + ")");
    }
    lead += s[0];
  }
  Shape shape{lead};
  shape.insert(shape.end(), tail.begin(), tail.end());
  Tensor<T> v(shape);
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor<T>& src = tape.value(p);
    std::copy(src.data(), src.data() + src.size(), v.data() + off);
    off += src.size();
  }
  const Var out = tape.size();
  return tape.record(name, std::move(v), parts, [=](Tape<T>& t) {
    const Tensor<T>& g = t.grad(out);
    std::size_t at = 0;
    for (Var p : parts) {
      Tensor<T> part(t.shape(p));
      std::copy(g.data() + at, g.data() + at + part.size(), part.data());
      at += part.size();
      t.accumulate(p, part);
    }
  });
}

template <typename T>
CVar concat0(Tape<T>& tape, const std::vector<CVar>& parts,
             const std::string& name) {
  std::vector<Var> re, im;
  for (const CVar& p : parts) {
    re.push_back(p.re);
    im.push_back(p.im);
  }
  return {concat0(tape, re, name + ".re"), concat0(tape, im, name + ".im")};
}

template <typename T>
Var sum_squares(Tape<T>& tape, Var a, const std::string& name) {
  T s = 0;
  for (T v : tape.value(a).values()) s += v * v;
  const Var out = tape.size();
  return tape.record(name, Tensor<T>({1}, s), {a}, [=](Tape<T>& t) {
    Tensor<T> g = t.value(a);
    g *= T(2) * t.grad(out)[0];
    t.accumulate(a, g);
  });
}

template <typename T>
Var dot(Tape<T>& tape, Var a, const Tensor<T>& w, const std::string& name) {
  require_shape(w, tape.shape(a), "dot weight");
  T s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s += tape.value(a)[i] * w[i];
  const Var out = tape.size();
  return tape.record(name, Tensor<T>({1}, s), {a}, [=](Tape<T>& t) {
    Tensor<T> g = w;
    g *= t.grad(out)[0];
    t.accumulate(a, g);
  });
}

template <typename T>
CVar complex_conv(Tape<T>& tape, CVar x, const nn::ComplexConvParams<T>& p,
                  const nn::ConvSpec& spec, const std::string& name) {
  ComplexPair<T> y = nn::complex_conv2d(pair_of(tape, x), p, spec);
  const Var out = tape.size();
  return record_pair<T>(tape, name, std::move(y), {x.re, x.im},
                        [=, &p](Tape<T>& t) {
    auto g = nn::complex_conv2d_backward(grad_of(t, out), pair_of(t, x), p, spec);
    accumulate_pair(t, x, g.dx);
    t.accumulate_param(p.k_re, g.dk_re);
    t.accumulate_param(p.k_im, g.dk_im);
    if (!p.b_re.empty()) {
      t.accumulate_param(p.b_re, g.db_re);
      t.accumulate_param(p.b_im, g.db_im);
    }
  });
}

template <typename T>
CVar complex_prelu(Tape<T>& tape, CVar x, const Tensor<T>& alpha_re,
                   const Tensor<T>& alpha_im, const std::string& name) {
  ComplexPair<T> y(nn::prelu(tape.value(x.re), alpha_re),
                   nn::prelu(tape.value(x.im), alpha_im));
  if (tape.tracking_branches()) {
    for (T v : tape.value(x.re).values()) tape.note_branch(v >= T(0));
    for (T v : tape.value(x.im).values()) tape.note_branch(v >= T(0));
  }
  const Var out = tape.size();
  return record_pair<T>(tape, name, std::move(y), {x.re, x.im},
                        [=, &alpha_re, &alpha_im](Tape<T>& t) {
    auto [dr, dar] = nn::prelu_backward(t.grad(out), t.value(x.re), alpha_re);
    auto [di, dai] = nn::prelu_backward(t.grad(out + 1), t.value(x.im), alpha_im);
    t.accumulate(x.re, dr);
    t.accumulate(x.im, di);
    t.accumulate_param(alpha_re, dar);
    t.accumulate_param(alpha_im, dai);
  });
}

template <typename T>
Var ft_branch(Tape<T>& tape, Var h, const nn::FtLstmParams<T>& p,
              const std::string& name, nn::FtLstmTrace* trace) {
  std::shared_ptr<nn::FtLstmCache<T>> cache;
  if (tape.grad_enabled()) cache = std::make_shared<nn::FtLstmCache<T>>();
  Tensor<T> z = nn::ft_lstm_branch<T>(tape.value(h), p, nullptr, cache.get(), trace);
  const Var out = tape.size();
  return tape.record(name, std::move(z), {h}, [=, &p](Tape<T>& t) {
    auto g = nn::ft_lstm_branch_backward(t.grad(out), *cache, p);
    t.accumulate(h, g.dh);
    accumulate_layer(t, p.f_lstm, g.f_lstm);
    accumulate_layer(t, p.t_lstm, g.t_lstm);
    accumulate_dense(t, p.f_proj, g.f_proj);
    accumulate_dense(t, p.t_proj, g.t_proj);
  });
}

template <typename T>
CVar complex_lstm(Tape<T>& tape, CVar x, const nn::ComplexLstmParams<T>& p,
                  const std::string& name) {
  std::shared_ptr<nn::ComplexLstmCache<T>> cache;
  if (tape.grad_enabled()) cache = std::make_shared<nn::ComplexLstmCache<T>>();
  ComplexPair<T> y = nn::complex_lstm<T>(pair_of(tape, x), p, nullptr, cache.get());
  const Var out = tape.size();
  return record_pair<T>(tape, name, std::move(y), {x.re, x.im},
                        [=, &p](Tape<T>& t) {
    auto g = nn::complex_lstm_backward(grad_of(t, out), *cache, p);
    accumulate_pair(t, x, g.dx);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      accumulate_layer(t, p.layers[l].real, g.real[l]);
      accumulate_layer(t, p.layers[l].imag, g.imag[l]);
    }
    if (p.has_proj) {
      accumulate_dense(t, p.proj_re, g.proj_re);
      accumulate_dense(t, p.proj_im, g.proj_im);
    }
  });
}

template <typename T>
CVar deep_filter(Tape<T>& tape, CVar coef, CVar target, const std::string& name) {
  ComplexPair<T> y = nn::deep_filter_apply(pair_of(tape, coef), pair_of(tape, target));
  const Var out = tape.size();
  return record_pair<T>(tape, name, std::move(y),
                        {coef.re, coef.im, target.re, target.im},
                        [=](Tape<T>& t) {
    auto g = nn::deep_filter_backward(grad_of(t, out), pair_of(t, coef),
                                      pair_of(t, target));
    accumulate_pair(t, coef, g.dcoef);
    accumulate_pair(t, target, g.dtarget);
  });
}

template <typename T>
CVar apply_mask(Tape<T>& tape, CVar y, CVar mask, double limit,
                const std::string& name, std::size_t* clamped) {
  const Tensor<T>& yr = tape.value(y.re);
  const Tensor<T>& yi = tape.value(y.im);
  const Tensor<T>& mr = tape.value(mask.re);
  const Tensor<T>& mi = tape.value(mask.im);
  require_shape(mr, yr.shape(), name + " mask");
  ComplexPair<T> s(yr.shape());
  std::size_t count = 0;
  for (std::size_t i = 0; i < yr.size(); ++i) {
    T a = mr[i], b = mi[i];
    const double r = std::hypot(double(a), double(b));
    tape.note_branch(r > limit);
    if (r > limit) {
      a = static_cast<T>(a * (limit / r));
      b = static_cast<T>(b * (limit / r));
      ++count;
    }
    s.re[i] = yr[i] * a - yi[i] * b;
    s.im[i] = yr[i] * b + yi[i] * a;
  }
  if (clamped) *clamped = count;
  const Var out = tape.size();
  return record_pair<T>(tape, name, std::move(s),
                        {y.re, y.im, mask.re, mask.im}, [=](Tape<T>& t) {
    const Tensor<T>& gr = t.grad(out);
    const Tensor<T>& gi = t.grad(out + 1);
    const Tensor<T>& yr = t.value(y.re);
    const Tensor<T>& yi = t.value(y.im);
    const Tensor<T>& mr = t.value(mask.re);
    const Tensor<T>& mi = t.value(mask.im);
    ComplexPair<T> dy(yr.shape()), dm(yr.shape());
    for (std::size_t i = 0; i < yr.size(); ++i) {
      double a = mr[i], b = mi[i];
      const double r = std::hypot(a, b);
      const bool clip = r > limit;
      if (clip) {
        a *= limit / r;
        b *= limit / r;
      }
      dy.re[i] = static_cast<T>(gr[i] * a + gi[i] * b);
      dy.im[i] = static_cast<T>(-gr[i] * b + gi[i] * a);
      double da = gr[i] * yr[i] + gi[i] * yi[i];
      double db = -gr[i] * yi[i] + gi[i] * yr[i];
      if (clip) {
        // d(limit * m / |m|)/dm = limit / r (I - m m^T / r^2)
        const double m0 = mr[i], m1 = mi[i];
        const double proj = (m0 * da + m1 * db) / (r * r);
        da = limit / r * (da - m0 * proj);
        db = limit / r * (db - m1 * proj);
      }
      dm.re[i] = static_cast<T>(da);
      dm.im[i] = static_cast<T>(db);
    }
    accumulate_pair(t, y, dy);
    accumulate_pair(t, mask, dm);
  });
}

template <typename T>
Var istft(Tape<T>& tape, CVar spec, const SpectralKernels<T>& kernels,
          std::size_t n, const std::string& name) {
  std::vector<T> sig = kernels.synthesize(tape.value(spec.re), tape.value(spec.im));
  const std::size_t full = sig.size();
  sig.resize(n, T(0));
  const Var out = tape.size();
  return tape.record(name, Tensor<T>({n}, std::move(sig)), {spec.re, spec.im},
                     [=, &kernels](Tape<T>& t) {
    const Tensor<T>& g = t.grad(out);
    std::vector<T> ext(full, T(0));
    std::copy(g.data(), g.data() + std::min(full, n), ext.begin());
    Tensor<T> dre, dim;
    kernels.synthesize_adjoint(ext, t.shape(spec.re)[0], dre, dim);
    t.accumulate(spec.re, dre);
    t.accumulate(spec.im, dim);
  });
}

template <typename T>
Var neg_seg_sisnr(Tape<T>& tape, Var s_hat, const std::vector<T>& reference,
                  const ChunkPlan& plan, SiSnrMode mode, const std::string& name) {
  const Tensor<T>& est = tape.value(s_hat);
  if (est.size() != reference.size()) {
    throw ShapeError(name + ": estimate and reference lengths differ");
  }
  double value = 0;
  seg_sisnr_raw(est.data(), reference.data(), est.size(), plan, mode, &value);
  const Var out = tape.size();
  return tape.record(name, Tensor<T>({1}, static_cast<T>(-value)), {s_hat},
                     [=](Tape<T>& t) {
    const Tensor<T>& e = t.value(s_hat);
    Tensor<T> g(e.shape());
    double v = 0;
    seg_sisnr_raw(e.data(), reference.data(), e.size(), plan, mode, &v, g.data());
    g *= -t.grad(out)[0];
    t.accumulate(s_hat, g);
  });
}

#define DCAEC_INSTANTIATE_AG(T)                                                \
  template class Tape<T>;                                                     \
  template Var add(Tape<T>&, Var, Var, const std::string&);                   \
  template Var reshape(Tape<T>&, Var, Shape, const std::string&);             \
  template CVar reshape(Tape<T>&, CVar, const Shape&, const std::string&);    \
  template Var concat0(Tape<T>&, const std::vector<Var>&, const std::string&); \
  template CVar concat0(Tape<T>&, const std::vector<CVar>&,                   \
                        const std::string&);                                  \
  template Var sum_squares(Tape<T>&, Var, const std::string&);                \
  template Var dot(Tape<T>&, Var, const Tensor<T>&, const std::string&);      \
  template CVar complex_conv(Tape<T>&, CVar, const nn::ComplexConvParams<T>&, \
                             const nn::ConvSpec&, const std::string&);        \
  template CVar complex_prelu(Tape<T>&, CVar, const Tensor<T>&,               \
                              const Tensor<T>&, const std::string&);          \
  template Var ft_branch(Tape<T>&, Var, const nn::FtLstmParams<T>&,           \
                         const std::string&, nn::FtLstmTrace*);               \
  template CVar complex_lstm(Tape<T>&, CVar, const nn::ComplexLstmParams<T>&, \
                             const std::string&);                             \
  template CVar deep_filter(Tape<T>&, CVar, CVar, const std::string&);        \
  template CVar apply_mask(Tape<T>&, CVar, CVar, double, const std::string&,  \
                           std::size_t*);                                     \
  template Var istft(Tape<T>&, CVar, const SpectralKernels<T>&, std::size_t,  \
                     const std::string&);                                     \
  template Var neg_seg_sisnr(Tape<T>&, Var, const std::vector<T>&,            \
                             const ChunkPlan&, SiSnrMode, const std::string&);

DCAEC_INSTANTIATE_AG(float)
DCAEC_INSTANTIATE_AG(double)

}  // namespace dcaec::ag
