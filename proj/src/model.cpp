// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/model.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace dcaec {

// ---------------------------------------------------------------------------
// Config

ModelConfig ModelConfig::paper() { return {}; }

ModelConfig ModelConfig::small() {
  ModelConfig c;
  c.stft = StftConfig::make(32, 16, 32);
  c.enc1_channels = 3;
  c.enc2_channels = 4;
  c.ft_hidden = 5;
  c.clstm_hidden = 6;
  c.clstm_layers = 2;
  return c;
}

std::size_t ModelConfig::encoded_bins() const { return enc1().out_bins(bins()); }

nn::ConvSpec ModelConfig::enc1() const {
  nn::ConvSpec s;
  s.kernel_f = 5;
  s.stride_f = 2;
  s.in_ch = 2;
  s.out_ch = enc1_channels;
  return s;
}

nn::ConvSpec ModelConfig::enc2() const {
  nn::ConvSpec s;
  s.kernel_f = 3;
  s.pad_f = 1;
  s.in_ch = enc1_channels;
  s.out_ch = enc2_channels;
  return s;
}

nn::ConvSpec ModelConfig::dec2() const {
  return enc2().adjoint();
}

nn::ConvSpec ModelConfig::dec1() const {
  nn::ConvSpec s = enc1().adjoint();
  s.out_ch = 1;
  return s;
}

nn::ConvSpec ModelConfig::deep_filter() const {
  nn::ConvSpec s;
  s.kernel_t = 3;
  s.kernel_f = 3;
  s.pad_t = 1;
  s.pad_f = 1;
  s.in_ch = 1;
  s.out_ch = nn::kDeepFilterTaps;
  return s;
}

void ModelConfig::validate() const {
  stft.validate();
  if (bins() < 5 || (bins() - 5) % 2 != 0) {
    throw std::invalid_argument("model config: " + std::to_string(bins()) +
                                " bins cannot round-trip the stride-2 encoder");
  }
  if (!enc1_channels || !enc2_channels || !ft_hidden || !clstm_hidden ||
      !clstm_layers) {
    throw std::invalid_argument("model config: sizes must be positive");
  }
  if (!(mask_limit > 0)) throw std::invalid_argument("model config: mask_limit <= 0");
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  char limit[32];
  std::snprintf(limit, sizeof limit, "%.17g", mask_limit);
  os << "win_len=" << stft.win_len << "\n"
     << "hop=" << stft.hop << "\n"
     << "fft_size=" << stft.fft_size << "\n"
     << "sample_rate=" << stft.sample_rate << "\n"
     << "enc1_channels=" << enc1_channels << "\n"
     << "enc2_channels=" << enc2_channels << "\n"
     << "ft_hidden=" << ft_hidden << "\n"
     << "clstm_hidden=" << clstm_hidden << "\n"
     << "clstm_layers=" << clstm_layers << "\n"
     << "activation="
     << (activation == nn::Activation::kPrelu ? "prelu" : "identity") << "\n"
     << "df_target="
     << (df_target == DeepFilterTarget::kDecoder ? "decoder" : "mixture") << "\n"
     << "mask_limit=" << limit << "\n"
     << "seed=" << seed << "\n";
  return os.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  ModelConfig c;
  std::size_t win = c.stft.win_len, hop = c.stft.hop, fft = c.stft.fft_size;
  int rate = c.stft.sample_rate;
  std::istringstream is(text);
  std::string line;
  auto size = [](const std::string& k, const std::string& v) {
    try {
      std::size_t pos = 0;
      const unsigned long long n = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw InputError("model config: bad value for " + k + ": '" + v + "'");
    }
  };
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("model config: bad line '" + line + "'");
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "win_len") win = size(k, v);
    else if (k == "hop") hop = size(k, v);
    else if (k == "fft_size") fft = size(k, v);
    else if (k == "sample_rate") rate = static_cast<int>(size(k, v));
    else if (k == "enc1_channels") c.enc1_channels = size(k, v);
    else if (k == "enc2_channels") c.enc2_channels = size(k, v);
    else if (k == "ft_hidden") c.ft_hidden = size(k, v);
    else if (k == "clstm_hidden") c.clstm_hidden = size(k, v);
    else if (k == "clstm_layers") c.clstm_layers = size(k, v);
    else if (k == "seed") c.seed = size(k, v);
    else if (k == "mask_limit") c.mask_limit = std::stod(v);
    else if (k == "activation") {
      if (v == "prelu") c.activation = nn::Activation::kPrelu;
      else if (v == "identity") c.activation = nn::Activation::kIdentity;
      else throw InputError("model config: unknown activation '" + v + "'");
    } else if (k == "df_target") {
      if (v == "decoder") c.df_target = DeepFilterTarget::kDecoder;
      else if (v == "mixture") c.df_target = DeepFilterTarget::kMixture;
      else throw InputError("model config: unknown df_target '" + v + "'");
    } else {
      throw InputError("model config: unknown key '" + k + "'");
    }
  }
  c.stft = StftConfig::make(win, hop, fft, rate);
  c.validate();
  return c;
}

std::uint64_t ModelConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : serialize()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

template <typename T>
ComplexLayerParams<T> zero_layer(const nn::ConvSpec& s, bool act) {
  ComplexLayerParams<T> l;
  l.conv = {Tensor<T>(s.kernel_shape()), Tensor<T>(s.kernel_shape()),
            Tensor<T>({s.out_ch}), Tensor<T>({s.out_ch})};
  if (act) {
    l.alpha_re = Tensor<T>({s.out_ch});
    l.alpha_im = Tensor<T>({s.out_ch});
  }
  return l;
}

template <typename T>
nn::LstmParams<T> zero_lstm(std::size_t in, std::size_t hidden) {
  return {Tensor<T>({4 * hidden, in}), Tensor<T>({4 * hidden, hidden}),
          Tensor<T>({4 * hidden})};
}

template <typename T>
nn::LstmSpec<T> zero_spec(std::size_t in, std::size_t hidden, bool bidir) {
  nn::LstmSpec<T> s;
  s.input_dim = in;
  s.hidden_dim = hidden;
  s.bidirectional = bidir;
  s.fwd = zero_lstm<T>(in, hidden);
  if (bidir) s.bwd = zero_lstm<T>(in, hidden);
  return s;
}

template <typename T>
nn::DenseParams<T> zero_dense(std::size_t in, std::size_t out) {
  return {Tensor<T>({out, in}), Tensor<T>({out})};
}

template <typename T>
nn::FtLstmParams<T> zero_ft(std::size_t ch, std::size_t hidden) {
  return {zero_spec<T>(ch, hidden, true), zero_dense<T>(2 * hidden, ch),
          zero_spec<T>(ch, hidden, false), zero_dense<T>(hidden, ch)};
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename T>
NetworkParams<T> NetworkParams<T>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const bool act = cfg.activation == nn::Activation::kPrelu;
  NetworkParams<T> p;
  p.enc1 = zero_layer<T>(cfg.enc1(), act);
  p.enc2 = zero_layer<T>(cfg.enc2(), act);
  p.dec2 = zero_layer<T>(cfg.dec2(), act);
  p.dec1 = zero_layer<T>(cfg.dec1(), false);
  p.df = zero_layer<T>(cfg.deep_filter(), false).conv;
  p.ft_re = zero_ft<T>(cfg.enc2_channels, cfg.ft_hidden);
  p.ft_im = zero_ft<T>(cfg.enc2_channels, cfg.ft_hidden);
  std::size_t in = cfg.bins();
  for (std::size_t l = 0; l < cfg.clstm_layers; ++l) {
    p.clstm.layers.push_back({zero_spec<T>(in, cfg.clstm_hidden, false),
                              zero_spec<T>(in, cfg.clstm_hidden, false)});
    in = cfg.clstm_hidden;
  }
  p.clstm.proj_re = zero_dense<T>(cfg.clstm_hidden, cfg.bins());
  p.clstm.proj_im = zero_dense<T>(cfg.clstm_hidden, cfg.bins());
  p.clstm.has_proj = true;
  return p;
}

const Tensor<float>& WeightStore::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InputError("weights: missing tensor " + name);
  return it->second;
}

std::size_t count_params(const WeightStore& w) {
  std::size_t n = 0;
  for (const auto& [name, t] : w.tensors) n += t.size();
  return n;
}

template <typename T>
WeightStore to_store(const ModelConfig& cfg, const NetworkParams<T>& p) {
  WeightStore w;
  p.visit([&](const std::string& name, const Tensor<T>& t) {
    w.tensors[name] = t.template cast<float>();
  });
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg.hash()));
  w.metadata["config"] = cfg.serialize();
  w.metadata["config_hash"] = hash;
  w.metadata["format_version"] = "1";
  w.metadata["input_order"] = "y,x";
  w.metadata["gate_order"] = "i,f,g,o";
  return w;
}

template <typename T>
NetworkParams<T> from_store(const ModelConfig& cfg, const WeightStore& w) {
  auto it = w.metadata.find("config");
  if (it != w.metadata.end()) {
    ModelConfig stored = ModelConfig::parse(it->second);
    stored.seed = cfg.seed;
    if (stored.serialize() != cfg.serialize()) {
      throw InputError("weights: stored config does not match the model config");
    }
  }
  NetworkParams<T> p = NetworkParams<T>::zeros(cfg);
  std::size_t used = 0;
  p.visit([&](const std::string& name, Tensor<T>& t) {
    const Tensor<float>& src = w.at(name);
    if (src.shape() != t.shape()) {
      throw InputError("weights: " + name + " has shape " + to_string(src.shape()) +
                       ", expected " + to_string(t.shape()));
    }
    t = src.template cast<T>();
    ++used;
  });
  if (used != w.tensors.size()) {
    for (const auto& [name, t] : w.tensors) {
      bool known = false;
      p.visit([&](const std::string& n, const Tensor<T>&) { known |= n == name; });
      if (!known) throw InputError("weights: unexpected tensor " + name);
    }
  }
  return p;
}

WeightStore init_weights(const ModelConfig& cfg) {
  NetworkParams<float> p = NetworkParams<float>::zeros(cfg);
  std::mt19937_64 rng(cfg.seed);
  double k = 1.0;
  p.visit([&](const std::string& name, Tensor<float>& t) {
    const Shape& s = t.shape();
    bool lstm_bias = false;
    if (ends_with(name, ".alpha_re") || ends_with(name, ".alpha_im")) {
      t.fill(0.25f);
      return;
    }
    if (s.size() == 4) {
      k = 1.0 / std::sqrt(static_cast<double>(s[1] * s[2] * s[3]));
    } else if (ends_with(name, ".w_ih")) {
      k = 1.0 / std::sqrt(static_cast<double>(s[0] / 4));
    } else if (ends_with(name, ".b") && (ends_with(name, ".fwd.b") ||
                                         ends_with(name, ".bwd.b") ||
                                         ends_with(name, ".real.b") ||
                                         ends_with(name, ".imag.b"))) {
      lstm_bias = true;
    } else if (s.size() == 2 && ends_with(name, ".w")) {
      k = 1.0 / std::sqrt(static_cast<double>(s[1]));
    }
    // biases reuse k of the weight visited just before them
    std::uniform_real_distribution<double> u(-k, k);
    for (auto& v : t.values()) v = static_cast<float>(u(rng));
    if (lstm_bias) {
      const std::size_t h = t.size() / 4;
      for (std::size_t i = h; i < 2 * h; ++i) t[i] += 1.0f;
    }
  });
  return to_store(cfg, p);
}

std::vector<std::pair<std::string, std::size_t>> param_breakdown(const WeightStore& w) {
  static const char* kGroups[] = {"enc1", "enc2", "ft.re", "ft.im", "dec2",
                                  "dec1", "df",   "clstm"};
  std::vector<std::pair<std::string, std::size_t>> out;
  std::size_t alphas = 0;
  for (const char* g : kGroups) {
    const std::string prefix = std::string(g) + ".";
    std::size_t n = 0;
    for (const auto& [name, t] : w.tensors) {
      if (name.compare(0, prefix.size(), prefix) != 0) continue;
      if (name.find(".alpha_") != std::string::npos) {
        alphas += t.size();
      } else {
        n += t.size();
      }
    }
    out.emplace_back(g, n);
  }
  out.emplace_back("prelu", alphas);
  return out;
}

// ---------------------------------------------------------------------------
// Masks

namespace {

void require_same(const Tensor<double>& a, const Tensor<double>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

}  // namespace

ComplexSpec apply_mask(const ComplexSpec& y, const MaskSpec& m) {
  require_same(y.re, m.re, "apply_mask");
  require_same(m.re, m.im, "apply_mask");
  ComplexSpec s{Tensor<double>(y.re.shape()), Tensor<double>(y.re.shape()), y.cfg};
  for (std::size_t i = 0; i < y.re.size(); ++i) {
    s.re[i] = y.re[i] * m.re[i] - y.im[i] * m.im[i];
    s.im[i] = y.re[i] * m.im[i] + y.im[i] * m.re[i];
  }
  return s;
}

ComplexSpec apply_mask_polar(const ComplexSpec& y, const MaskSpec& m) {
  require_same(y.re, m.re, "apply_mask_polar");
  ComplexSpec s{Tensor<double>(y.re.shape()), Tensor<double>(y.re.shape()), y.cfg};
  for (std::size_t i = 0; i < y.re.size(); ++i) {
    const double mag = std::hypot(y.re[i], y.im[i]) * std::hypot(m.re[i], m.im[i]);
    const double phase = std::atan2(y.im[i], y.re[i]) + std::atan2(m.im[i], m.re[i]);
    s.re[i] = mag * std::cos(phase);
    s.im[i] = mag * std::sin(phase);
  }
  return s;
}

MaskSpec ideal_crm(const ComplexSpec& y, const ComplexSpec& s, double eps) {
  require_same(y.re, s.re, "ideal_crm");
  MaskSpec m{Tensor<double>(y.re.shape()), Tensor<double>(y.re.shape())};
  for (std::size_t i = 0; i < y.re.size(); ++i) {
    const double den = y.re[i] * y.re[i] + y.im[i] * y.im[i] + eps;
    m.re[i] = (y.re[i] * s.re[i] + y.im[i] * s.im[i]) / den;
    m.im[i] = (y.re[i] * s.im[i] - y.im[i] * s.re[i]) / den;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Graph

const Shape* ShapeTrace::find(const std::string& name) const {
  for (const auto& [n, s] : rows) {
    if (n == name) return &s;
  }
  return nullptr;
}

namespace {

Shape combined(Shape s) {
  s[0] *= 2;
  return s;
}

template <typename T>
ag::CVar complex_layer(ag::Tape<T>& tape, ag::CVar x, const ComplexLayerParams<T>& l,
                       const nn::ConvSpec& spec, const std::string& name) {
  ag::CVar y = ag::complex_conv(tape, x, l.conv, spec, name);
  if (!l.alpha_re.empty()) {
    y = ag::complex_prelu(tape, y, l.alpha_re, l.alpha_im, name + ".act");
  }
  return y;
}

}  // namespace

template <typename T>
GraphOutputs build_graph(ag::Tape<T>& tape, const NetworkParams<T>& p,
                         const ModelConfig& cfg, ag::CVar y, ag::CVar x,
                         ShapeTrace* trace) {
  const Shape& ys = tape.shape(y.re);
  if (ys.size() != 2 || ys[1] != cfg.bins() || tape.shape(x.re) != ys) {
    throw ShapeError("model input: expected (T, " + std::to_string(cfg.bins()) +
                     ") spectra, got " + to_string(ys) + " and " +
                     to_string(tape.shape(x.re)));
  }
  const std::size_t frames = ys[0], bins = ys[1];
  auto note = [&](const char* name, const Shape& s) {
    if (trace) trace->add(name, s);
  };

  ag::CVar y3 = ag::reshape(tape, y, {1, frames, bins}, "input.y");
  ag::CVar x3 = ag::reshape(tape, x, {1, frames, bins}, "input.x");
  ag::CVar in = ag::concat0(tape, std::vector<ag::CVar>{y3, x3}, "input");
  note("input", combined(tape.shape(in.re)));

  ag::CVar e1 = complex_layer(tape, in, p.enc1, cfg.enc1(), "c-conv2d_1");
  note("c-conv2d_1", combined(tape.shape(e1.re)));
  ag::CVar e2 = complex_layer(tape, e1, p.enc2, cfg.enc2(), "c-conv2d_2");
  note("c-conv2d_2", combined(tape.shape(e2.re)));

  nn::FtLstmTrace ft;
  ag::CVar f{ag::ft_branch(tape, e2.re, p.ft_re, "f-t-lstm.re", &ft),
             ag::ft_branch(tape, e2.im, p.ft_im, "f-t-lstm.im")};
  note("reshape_1", Shape{ft.h_reshape[0], ft.h_reshape[1], 2 * ft.h_reshape[2]});
  note("F-LSTM", ft.u);
  note("reshape_2", ft.v_reshape);
  note("T-LSTM", ft.z);

  ag::CVar d2 = complex_layer(tape, f, p.dec2, cfg.dec2(), "c-deconv2d_2");
  note("c-deconv2d_2", combined(tape.shape(d2.re)));
  ag::CVar d1 = complex_layer(tape, d2, p.dec1, cfg.dec1(), "c-deconv2d_1");
  note("c-deconv2d_1", combined(tape.shape(d1.re)));

  GraphOutputs out;
  out.decoder = d1;
  ag::CVar coef = ag::complex_conv(tape, d1, p.df, cfg.deep_filter(), "deepfilter.coef");
  ag::CVar target = cfg.df_target == DeepFilterTarget::kDecoder ? d1 : y3;
  out.filtered = ag::deep_filter(tape, coef, target, "deepfilter");
  note("Deepfilter", combined(tape.shape(out.filtered.re)));

  ag::CVar flat = ag::reshape(tape, out.filtered, {frames, bins}, "deepfilter.flat");
  out.mask = ag::complex_lstm(tape, flat, p.clstm, "c-lstm");
  note("c-LSTM", Shape{2, frames, bins});

  out.estimate = ag::apply_mask(tape, y, out.mask, cfg.mask_limit, "mask", &out.clamped);
  return out;
}

// ---------------------------------------------------------------------------
// Offline model

namespace {

// The mask as applied, i.e. after the magnitude clamp.
MaskSpec clamped_mask(const ag::Tape<float>& tape, ag::CVar mask, double limit) {
  MaskSpec m{tape.value(mask.re).cast<double>(), tape.value(mask.im).cast<double>()};
  for (std::size_t i = 0; i < m.re.size(); ++i) {
    const double r = std::hypot(m.re[i], m.im[i]);
    if (r > limit) {
      m.re[i] *= limit / r;
      m.im[i] *= limit / r;
    }
  }
  return m;
}

}  // namespace

AecModel::AecModel(ModelConfig cfg, const WeightStore& w)
    : cfg_(std::move(cfg)),
      params_(from_store<float>(cfg_, w)),
      kernels_(cfg_.stft) {}

MaskSpec AecModel::mask(const ComplexSpec& y, const ComplexSpec& x,
                        ShapeTrace* trace, std::size_t* clamped) const {
  ag::Tape<float> tape(false);
  ag::CVar yv{tape.constant(y.re.cast<float>(), "y.re"), tape.constant(y.im.cast<float>(), "y.im")};
  ag::CVar xv{tape.constant(x.re.cast<float>(), "x.re"), tape.constant(x.im.cast<float>(), "x.im")};
  GraphOutputs g = build_graph(tape, params_, cfg_, yv, xv, trace);
  MaskSpec m = clamped_mask(tape, g.mask, cfg_.mask_limit);
  if (clamped) *clamped = g.clamped;
  return m;
}

AecModel::Output AecModel::forward(const AudioBuffer& y, const AudioBuffer& x,
                                   ShapeTrace* trace) const {
  require_processing_rate(y);
  require_processing_rate(x);
  const std::size_t n = std::max(y.size(), x.size());
  Output out;
  out.s_hat = AudioBuffer::zeros(n, y.sample_rate);
  if (n == 0) return out;

  std::vector<float> yf(n, 0.0f), xf(n, 0.0f);
  std::copy(y.samples.begin(), y.samples.end(), yf.begin());
  std::copy(x.samples.begin(), x.samples.end(), xf.begin());

  ag::Tape<float> tape(false);
  Tensor<float> re, im;
  kernels_.analyze(yf.data(), n, re, im);
  ag::CVar yv{tape.constant(std::move(re), "y.re"), tape.constant(std::move(im), "y.im")};
  kernels_.analyze(xf.data(), n, re, im);
  ag::CVar xv{tape.constant(std::move(re), "x.re"), tape.constant(std::move(im), "x.im")};

  GraphOutputs g = build_graph(tape, params_, cfg_, yv, xv, trace);
  out.clamped = g.clamped;
  out.mask = clamped_mask(tape, g.mask, cfg_.mask_limit);
  std::vector<float> sig =
      kernels_.synthesize(tape.value(g.estimate.re), tape.value(g.estimate.im));
  for (std::size_t i = 0; i < n; ++i) out.s_hat.samples[i] = sig[i];
  return out;
}

#define DCAEC_INSTANTIATE_MODEL(T)                                             \
  template struct NetworkParams<T>;                                           \
  template WeightStore to_store(const ModelConfig&, const NetworkParams<T>&); \
  template NetworkParams<T> from_store(const ModelConfig&, const WeightStore&); \
  template GraphOutputs build_graph(ag::Tape<T>&, const NetworkParams<T>&,    \
                                    const ModelConfig&, ag::CVar, ag::CVar,   \
                                    ShapeTrace*);

DCAEC_INSTANTIATE_MODEL(float)
DCAEC_INSTANTIATE_MODEL(double)

}  // namespace dcaec
