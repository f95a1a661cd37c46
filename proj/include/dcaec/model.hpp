// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// The full network: complex encoder (2 layers), one F-T-LSTM block with
// separate real/imaginary branches, complex decoder (2 layers), 3x3 deep
// filter with one frame of lookahead and a 2-layer complex LSTM that emits
// the complex mask. Input channels are (Y, X); the mask multiplies Y.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dcaec/autograd.hpp"
#include "dcaec/dsp.hpp"
#include "dcaec/nn.hpp"

namespace dcaec {

/// What the deep-filter taps are applied to.
enum class DeepFilterTarget { kDecoder, kMixture };

struct ModelConfig {
  StftConfig stft = StftConfig::paper();
  std::size_t enc1_channels = 32;  // complex channels
  std::size_t enc2_channels = 96;
  std::size_t ft_hidden = 128;
  std::size_t clstm_hidden = 128;
  std::size_t clstm_layers = 2;
  nn::Activation activation = nn::Activation::kPrelu;
  DeepFilterTarget df_target = DeepFilterTarget::kDecoder;
  double mask_limit = 100.0;
  std::uint64_t seed = 0;

  static ModelConfig paper();
  /// Few channels and a 32-point transform; for tests and gradient checks.
  static ModelConfig small();

  std::size_t bins() const { return stft.bins(); }
  std::size_t encoded_bins() const;

  nn::ConvSpec enc1() const;
  nn::ConvSpec enc2() const;
  nn::ConvSpec dec2() const;
  nn::ConvSpec dec1() const;
  nn::ConvSpec deep_filter() const;

  void validate() const;
  /// key=value lines, stable order.
  std::string serialize() const;
  static ModelConfig parse(const std::string& text);
  /// FNV-1a of serialize().
  std::uint64_t hash() const;
};

template <typename T>
struct ComplexLayerParams {
  nn::ComplexConvParams<T> conv;
  Tensor<T> alpha_re;  // empty when the layer is linear
  Tensor<T> alpha_im;
};

/// All trainable tensors, laid out for the kernels.
template <typename T>
struct NetworkParams {
  ComplexLayerParams<T> enc1, enc2, dec2, dec1;
  nn::ComplexConvParams<T> df;
  nn::FtLstmParams<T> ft_re, ft_im;
  nn::ComplexLstmParams<T> clstm;

  /// Zero tensors of the right shapes.
  static NetworkParams zeros(const ModelConfig& cfg);

  /// Calls f(name, tensor) for every tensor, in a fixed order.
  template <typename F>
  void visit(F&& f);
  template <typename F>
  void visit(F&& f) const {
    const_cast<NetworkParams*>(this)->visit(
        [&](const std::string& n, Tensor<T>& t) { f(n, std::as_const(t)); });
  }
};

/// Named float tensors plus string metadata. Names are unique; tensors are
/// kept sorted by name.
struct WeightStore {
  std::map<std::string, Tensor<float>> tensors;
  std::map<std::string, std::string> metadata;

  bool contains(const std::string& name) const { return tensors.count(name) > 0; }
  const Tensor<float>& at(const std::string& name) const;
};

std::size_t count_params(const WeightStore& w);

/// Uniform(-k, k) with k = 1/sqrt(fan_in); LSTM forget-gate biases get +1
/// and PReLU slopes start at 0.25. Deterministic in cfg.seed.
WeightStore init_weights(const ModelConfig& cfg);

template <typename T>
WeightStore to_store(const ModelConfig& cfg, const NetworkParams<T>& p);
/// Validates names, shapes and the config metadata.
template <typename T>
NetworkParams<T> from_store(const ModelConfig& cfg, const WeightStore& w);

/// Per-layer parameter counts in visit order, grouped by top-level layer.
std::vector<std::pair<std::string, std::size_t>> param_breakdown(const WeightStore& w);

// ---------------------------------------------------------------------------
// Masks

/// Complex mask, (T, F).
struct MaskSpec {
  Tensor<double> re;
  Tensor<double> im;
};

/// Y * M (complex product), shapes must agree.
ComplexSpec apply_mask(const ComplexSpec& y, const MaskSpec& m);
/// Y_mag M_mag exp(j(Y_phase + M_phase)).
ComplexSpec apply_mask_polar(const ComplexSpec& y, const MaskSpec& m);
/// (Y* S) / (|Y|^2 + eps). The reconstruction error of Y times this mask
/// is eps / (|Y|^2 + eps), so eps must sit well under 1e-12 for bins near
/// |Y| = 1e-6 to come back to 1e-6. It only keeps Y = 0 finite.
MaskSpec ideal_crm(const ComplexSpec& y, const ComplexSpec& s,
                   double eps = 1e-20);

// ---------------------------------------------------------------------------
// Graph

/// Activation shapes in the published convention: complex channel counts
/// are reported with real and imaginary parts combined.
struct ShapeTrace {
  std::vector<std::pair<std::string, Shape>> rows;
  void add(std::string name, Shape shape) { rows.emplace_back(std::move(name), std::move(shape)); }
  const Shape* find(const std::string& name) const;
};

struct GraphOutputs {
  ag::CVar decoder;   // (1, T, F)
  ag::CVar filtered;  // (1, T, F)
  ag::CVar mask;      // (T, F)
  ag::CVar estimate;  // Y * clamp(mask), (T, F)
  std::size_t clamped = 0;
};

/// Runs the network on spectra y and x, both (T, F) tape nodes.
template <typename T>
GraphOutputs build_graph(ag::Tape<T>& tape, const NetworkParams<T>& p,
                         const ModelConfig& cfg, ag::CVar y, ag::CVar x,
                         ShapeTrace* trace = nullptr);

/// Offline inference in float.
class AecModel {
 public:
  AecModel(ModelConfig cfg, const WeightStore& w);

  struct Output {
    AudioBuffer s_hat;
    MaskSpec mask;
    std::size_t clamped = 0;
  };

  /// The shorter input is zero-padded; output has the padded length.
  Output forward(const AudioBuffer& y, const AudioBuffer& x,
                 ShapeTrace* trace = nullptr) const;

  /// Mask from (T, F) spectra.
  MaskSpec mask(const ComplexSpec& y, const ComplexSpec& x,
                ShapeTrace* trace = nullptr, std::size_t* clamped = nullptr) const;

  const ModelConfig& config() const noexcept { return cfg_; }
  const NetworkParams<float>& params() const noexcept { return params_; }
  const SpectralKernels<float>& kernels() const noexcept { return kernels_; }

 private:
  ModelConfig cfg_;
  NetworkParams<float> params_;
  SpectralKernels<float> kernels_;
};

// ---------------------------------------------------------------------------

template <typename T>
template <typename F>
void NetworkParams<T>::visit(F&& f) {
  auto layer = [&](const std::string& n, ComplexLayerParams<T>& l) {
    f(n + ".k_re", l.conv.k_re);
    f(n + ".k_im", l.conv.k_im);
    f(n + ".b_re", l.conv.b_re);
    f(n + ".b_im", l.conv.b_im);
    if (!l.alpha_re.empty()) {
      f(n + ".alpha_re", l.alpha_re);
      f(n + ".alpha_im", l.alpha_im);
    }
  };
  auto lstm = [&](const std::string& n, nn::LstmParams<T>& l) {
    f(n + ".w_ih", l.w_ih);
    f(n + ".w_hh", l.w_hh);
    f(n + ".b", l.b);
  };
  auto dense = [&](const std::string& n, nn::DenseParams<T>& d) {
    f(n + ".w", d.w);
    f(n + ".b", d.b);
  };
  auto ft = [&](const std::string& n, nn::FtLstmParams<T>& b) {
    lstm(n + ".f_lstm.fwd", b.f_lstm.fwd);
    lstm(n + ".f_lstm.bwd", b.f_lstm.bwd);
    dense(n + ".f_proj", b.f_proj);
    lstm(n + ".t_lstm.fwd", b.t_lstm.fwd);
    dense(n + ".t_proj", b.t_proj);
  };
  layer("enc1", enc1);
  layer("enc2", enc2);
  ft("ft.re", ft_re);
  ft("ft.im", ft_im);
  layer("dec2", dec2);
  layer("dec1", dec1);
  f("df.k_re", df.k_re);
  f("df.k_im", df.k_im);
  f("df.b_re", df.b_re);
  f("df.b_im", df.b_im);
  for (std::size_t l = 0; l < clstm.layers.size(); ++l) {
    const std::string n = "clstm.l" + std::to_string(l);
    lstm(n + ".real", clstm.layers[l].real.fwd);
    lstm(n + ".imag", clstm.layers[l].imag.fwd);
  }
  dense("clstm.proj_re", clstm.proj_re);
  dense("clstm.proj_im", clstm.proj_im);
}

}  // namespace dcaec
