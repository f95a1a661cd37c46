// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <random>

#include "dcaec/model.hpp"

namespace dcaec {

namespace {

using Rng = std::mt19937_64;

Tensor<double> uniform(Rng& rng, Shape shape, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Loss value, or nothing when the forward pass took other branches than
// `sides`.
std::optional<double> loss_value(const GraphBuilder& build,
                                 const std::vector<bool>& sides) {
  ag::Tape<double> tape(false);
  tape.track_branches(true);
  const double v = tape.value(build(tape))[0];
  if (tape.branches() != sides) return std::nullopt;
  return v;
}

// Indices to probe: all of them, or a seeded sample.
std::vector<std::size_t> probe(std::size_t n, std::size_t max, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n > max) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max);
  }
  return idx;
}

// Sum of <out, w> over both parts, with fixed random w.
ag::Var project(ag::Tape<double>& t, ag::CVar v, const Tensor<double>& wr,
                const Tensor<double>& wi) {
  return ag::add(t, ag::dot(t, v.re, wr), ag::dot(t, v.im, wi));
}

nn::LstmSpec<double> lstm(Rng& rng, std::size_t in, std::size_t hidden, bool bidir) {
  nn::LstmSpec<double> s;
  s.input_dim = in;
  s.hidden_dim = hidden;
  s.bidirectional = bidir;
  auto dir = [&] {
    return nn::LstmParams<double>{uniform(rng, {4 * hidden, in}, 0.5),
                                  uniform(rng, {4 * hidden, hidden}, 0.5),
                                  uniform(rng, {4 * hidden}, 0.5)};
  };
  s.fwd = dir();
  if (bidir) s.bwd = dir();
  return s;
}

nn::DenseParams<double> dense(Rng& rng, std::size_t in, std::size_t out) {
  return {uniform(rng, {out, in}, 0.5), uniform(rng, {out}, 0.5)};
}

void add_lstm(std::vector<GradTarget>& t, const std::string& n, nn::LstmParams<double>& p) {
  t.push_back({n + ".w_ih", &p.w_ih, true});
  t.push_back({n + ".w_hh", &p.w_hh, true});
  t.push_back({n + ".b", &p.b, true});
}

void add_dense(std::vector<GradTarget>& t, const std::string& n, nn::DenseParams<double>& p) {
  t.push_back({n + ".w", &p.w, true});
  t.push_back({n + ".b", &p.b, true});
}

// Keeps entries away from the PReLU kink so +-step never crosses zero.
void push_off_zero(Tensor<double>& t, double margin) {
  for (auto& v : t.values()) {
    if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
  }
}

}  // namespace

GradcheckResult check_gradients(const std::string& name,
                                const std::vector<GradTarget>& targets,
                                const GraphBuilder& build,
                                const GradcheckOptions& opts) {
  if (opts.order != 2 && opts.order != 4) {
    throw std::invalid_argument("gradcheck: order must be 2 or 4");
  }
  GradcheckResult r;
  r.name = name;

  ag::Tape<double> tape(true);
  tape.track_branches(true);
  for (const auto& t : targets) {
    if (t.param) tape.bind(t.name, *t.tensor);
  }
  const ag::Var loss = build(tape);
  tape.backward(loss);
  auto grads = tape.gradients();

  Rng rng(opts.seed ^ std::hash<std::string>{}(name));
  for (const auto& t : targets) {
    auto it = grads.find(t.name);
    if (it == grads.end()) {
      throw std::logic_error("gradcheck " + name + ": no gradient for " + t.name);
    }
    const Tensor<double>& g = it->second;
    std::vector<std::pair<double, double>> pairs;
    double scale = 0;
    for (std::size_t i : probe(t.tensor->size(), opts.max_entries, rng)) {
      double& v = (*t.tensor)[i];
      const double keep = v;
      auto diff = [&](double h) -> std::optional<double> {
        v = keep + h;
        const auto up = loss_value(build, tape.branches());
        v = keep - h;
        const auto down = loss_value(build, tape.branches());
        v = keep;
        if (!up || !down) return std::nullopt;
        return *up - *down;
      };
      const double h = opts.step;
      const auto d1 = diff(h);
      const auto d2 = opts.order == 4 ? diff(2 * h) : std::optional<double>(0.0);
      if (!d1 || !d2) {
        ++r.skipped;
        continue;
      }
      const double fd = opts.order == 4 ? (8 * *d1 - *d2) / (12 * h) : *d1 / (2 * h);
      pairs.emplace_back(g[i], fd);
      scale = std::max(scale, std::abs(fd));
    }
    const double floor = std::max(1e-2 * scale, 1e-10);
    for (auto [a, fd] : pairs) {
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
      r.max_rel_error = std::max(r.max_rel_error, err);
      ++r.checked;
    }
  }
  r.passed = r.max_rel_error < opts.tolerance;
  return r;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts) {
  std::vector<GradcheckResult> out;
  Rng rng(opts.seed);

  {  // complex conv and its transpose, with bias
    for (bool transposed : {false, true}) {
      nn::ConvSpec s;
      s.kernel_t = 2;
      s.kernel_f = 3;
      s.stride_f = 2;
      s.pad_f = 1;
      s.in_ch = 2;
      s.out_ch = 3;
      s.transposed = transposed;
      Tensor<double> xr = uniform(rng, {2, 4, 7}), xi = uniform(rng, {2, 4, 7});
      nn::ComplexConvParams<double> p{uniform(rng, s.kernel_shape()),
                                      uniform(rng, s.kernel_shape()),
                                      uniform(rng, {3}), uniform(rng, {3})};
      const Shape os{3, s.out_frames(4), s.out_bins(7)};
      const Tensor<double> wr = uniform(rng, os), wi = uniform(rng, os);
      out.push_back(check_gradients(
          transposed ? "complex_deconv2d" : "complex_conv2d",
          {{"x.re", &xr, false}, {"x.im", &xi, false}, {"k_re", &p.k_re, true},
           {"k_im", &p.k_im, true}, {"b_re", &p.b_re, true}, {"b_im", &p.b_im, true}},
          [&](ag::Tape<double>& t) {
            ag::CVar x{t.variable("x.re", xr), t.variable("x.im", xi)};
            return project(t, ag::complex_conv(t, x, p, s, "conv"), wr, wi);
          },
          opts));
    }
  }

  {  // prelu
    Tensor<double> xr = uniform(rng, {3, 4, 5}), xi = uniform(rng, {3, 4, 5});
    push_off_zero(xr, 10 * opts.step);
    push_off_zero(xi, 10 * opts.step);
    Tensor<double> ar = uniform(rng, {3}), ai = uniform(rng, {3});
    const Tensor<double> wr = uniform(rng, {3, 4, 5}), wi = uniform(rng, {3, 4, 5});
    out.push_back(check_gradients(
        "prelu",
        {{"x.re", &xr, false}, {"x.im", &xi, false}, {"alpha_re", &ar, true},
         {"alpha_im", &ai, true}},
        [&](ag::Tape<double>& t) {
          ag::CVar x{t.variable("x.re", xr), t.variable("x.im", xi)};
          return project(t, ag::complex_prelu(t, x, ar, ai, "prelu"), wr, wi);
        },
        opts));
  }

  {  // F-T-LSTM branch
    const std::size_t c = 3, frames = 4, bins = 5, hidden = 4;
    nn::FtLstmParams<double> p{lstm(rng, c, hidden, true), dense(rng, 2 * hidden, c),
                               lstm(rng, c, hidden, false), dense(rng, hidden, c)};
    Tensor<double> h = uniform(rng, {c, frames, bins});
    const Tensor<double> w = uniform(rng, {c, frames, bins});
    std::vector<GradTarget> targets{{"h", &h, false}};
    add_lstm(targets, "f_lstm.fwd", p.f_lstm.fwd);
    add_lstm(targets, "f_lstm.bwd", p.f_lstm.bwd);
    add_dense(targets, "f_proj", p.f_proj);
    add_lstm(targets, "t_lstm.fwd", p.t_lstm.fwd);
    add_dense(targets, "t_proj", p.t_proj);
    out.push_back(check_gradients(
        "ft_lstm_branch", targets,
        [&](ag::Tape<double>& t) {
          return ag::dot(t, ag::ft_branch(t, t.variable("h", h), p, "ft"), w);
        },
        opts));
  }

  {  // complex LSTM, two layers with projection
    const std::size_t frames = 5, d = 4, hidden = 3;
    nn::ComplexLstmParams<double> p;
    p.layers.push_back({lstm(rng, d, hidden, false), lstm(rng, d, hidden, false)});
    p.layers.push_back({lstm(rng, hidden, hidden, false), lstm(rng, hidden, hidden, false)});
    p.proj_re = dense(rng, hidden, d);
    p.proj_im = dense(rng, hidden, d);
    Tensor<double> xr = uniform(rng, {frames, d}), xi = uniform(rng, {frames, d});
    const Tensor<double> wr = uniform(rng, {frames, d}), wi = uniform(rng, {frames, d});
    std::vector<GradTarget> targets{{"x.re", &xr, false}, {"x.im", &xi, false}};
    for (std::size_t l = 0; l < 2; ++l) {
      add_lstm(targets, "l" + std::to_string(l) + ".real", p.layers[l].real.fwd);
      add_lstm(targets, "l" + std::to_string(l) + ".imag", p.layers[l].imag.fwd);
    }
    add_dense(targets, "proj_re", p.proj_re);
    add_dense(targets, "proj_im", p.proj_im);
    out.push_back(check_gradients(
        "complex_lstm", targets,
        [&](ag::Tape<double>& t) {
          ag::CVar x{t.variable("x.re", xr), t.variable("x.im", xi)};
          return project(t, ag::complex_lstm(t, x, p, "clstm"), wr, wi);
        },
        opts));
  }

  {  // deep filter
    Tensor<double> cr = uniform(rng, {9, 4, 5}), ci = uniform(rng, {9, 4, 5});
    Tensor<double> tr = uniform(rng, {1, 4, 5}), ti = uniform(rng, {1, 4, 5});
    const Tensor<double> wr = uniform(rng, {1, 4, 5}), wi = uniform(rng, {1, 4, 5});
    out.push_back(check_gradients(
        "deep_filter",
        {{"coef.re", &cr, false}, {"coef.im", &ci, false},
         {"target.re", &tr, false}, {"target.im", &ti, false}},
        [&](ag::Tape<double>& t) {
          ag::CVar c{t.variable("coef.re", cr), t.variable("coef.im", ci)};
          ag::CVar x{t.variable("target.re", tr), t.variable("target.im", ti)};
          return project(t, ag::deep_filter(t, c, x, "df"), wr, wi);
        },
        opts));
  }

  {  // mask application; about half of the bins exceed the clamp
    Tensor<double> yr = uniform(rng, {4, 6}), yi = uniform(rng, {4, 6});
    Tensor<double> mr = uniform(rng, {4, 6}, 2.0), mi = uniform(rng, {4, 6}, 2.0);
    const double limit = 1.5;
    for (std::size_t i = 0; i < mr.size(); ++i) {
      // keep |m| clear of the clamp boundary
      const double r = std::hypot(mr[i], mi[i]);
      if (std::abs(r - limit) < 0.05) {
        mr[i] *= 1.2;
        mi[i] *= 1.2;
      }
    }
    const Tensor<double> wr = uniform(rng, {4, 6}), wi = uniform(rng, {4, 6});
    out.push_back(check_gradients(
        "apply_mask",
        {{"y.re", &yr, false}, {"y.im", &yi, false}, {"m.re", &mr, false},
         {"m.im", &mi, false}},
        [&](ag::Tape<double>& t) {
          ag::CVar y{t.variable("y.re", yr), t.variable("y.im", yi)};
          ag::CVar m{t.variable("m.re", mr), t.variable("m.im", mi)};
          return project(t, ag::apply_mask(t, y, m, limit, "mask"), wr, wi);
        },
        opts));
  }

  {  // overlap-add synthesis, trimmed below the full length
    const SpectralKernels<double> k(StftConfig::make(16, 8, 16));
    const std::size_t frames = 4, n = k.config().samples_for(frames) - 5;
    Tensor<double> sr = uniform(rng, {frames, 9}), si = uniform(rng, {frames, 9});
    const Tensor<double> w = uniform(rng, {n});
    out.push_back(check_gradients(
        "istft",
        {{"s.re", &sr, false}, {"s.im", &si, false}},
        [&](ag::Tape<double>& t) {
          ag::CVar s{t.variable("s.re", sr), t.variable("s.im", si)};
          return ag::dot(t, ag::istft(t, s, k, n, "istft"), w);
        },
        opts));
  }

  for (SiSnrMode mode : {SiSnrMode::kStandard, SiSnrMode::kLiteral}) {
    const std::size_t n = 240;
    Tensor<double> est = uniform(rng, {n});
    std::vector<double> ref(n);
    for (std::size_t i = 0; i < n; ++i) ref[i] = 0.7 * est[i] + 0.3 * std::sin(0.1 * i);
    for (std::size_t i = 0; i < 12; ++i) ref[i] = 0;  // one silent chunk
    out.push_back(check_gradients(
        mode == SiSnrMode::kStandard ? "seg_sisnr" : "seg_sisnr_literal",
        {{"s_hat", &est, false}},
        [&, mode](ag::Tape<double>& t) {
          return ag::neg_seg_sisnr(t, t.variable("s_hat", est), ref, ChunkPlan::paper(),
                                   mode);
        },
        opts));
  }

  {  // the whole network: spectra -> mask -> istft -> loss, small config
    ModelConfig cfg = ModelConfig::small();
    cfg.seed = opts.seed;
    auto p = std::make_unique<NetworkParams<double>>(
        from_store<double>(cfg, init_weights(cfg)));
    const SpectralKernels<double> k(cfg.stft);
    const std::size_t n = 6 * cfg.stft.hop + 9;
    std::vector<double> y(n), x(n), s(n);
    std::normal_distribution<double> g(0.0, 0.3);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = g(rng);
      x[i] = g(rng);
      y[i] = s[i] + 0.5 * x[i];
    }
    Tensor<double> yr, yi, xr, xi;
    k.analyze(y.data(), n, yr, yi);
    k.analyze(x.data(), n, xr, xi);
    std::vector<GradTarget> targets;
    p->visit([&](const std::string& name, Tensor<double>& t) {
      targets.push_back({name, &t, true});
    });
    out.push_back(check_gradients(
        "network", targets,
        [&](ag::Tape<double>& t) {
          ag::CVar yv{t.constant(yr), t.constant(yi)};
          ag::CVar xv{t.constant(xr), t.constant(xi)};
          GraphOutputs o = build_graph(t, *p, cfg, yv, xv);
          ag::Var sig = ag::istft(t, o.estimate, k, n);
          return ag::neg_seg_sisnr(t, sig, s, ChunkPlan::paper(), SiSnrMode::kStandard);
        },
        opts));
  }
  return out;
}

}  // namespace dcaec
