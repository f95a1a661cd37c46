// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Reverse-mode tape over the coarse network ops. Each op records its value,
// the ids of its inputs and a closure that pushes the output gradient back
// into its inputs (and into bound parameters). Complex-valued ops record two
// nodes; the real-part node owns the closure and reads both output grads.
//
// Parameters live outside the tape. `bind` registers a tensor by address,
// and ops that receive parameter structs accumulate into whichever of those
// tensors are bound. Unbound tensors are treated as constants.

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcaec/dsp.hpp"
#include "dcaec/metrics.hpp"
#include "dcaec/nn.hpp"
#include "dcaec/tensor.hpp"

namespace dcaec::ag {

using Var = std::size_t;
inline constexpr Var kNoVar = std::numeric_limits<Var>::max();

struct CVar {
  Var re = kNoVar;
  Var im = kNoVar;
};

template <typename T>
class Tape {
 public:
  using Scalar = T;
  using Backward = std::function<void(Tape&)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const noexcept { return grad_enabled_; }

  /// Constant input.
  Var constant(Tensor<T> value, std::string op = "input");
  /// Leaf whose gradient is collected under `name`.
  Var variable(const std::string& name, Tensor<T> value);

  /// Registers an external parameter tensor; ops accumulate into it.
  void bind(const std::string& name, const Tensor<T>& storage);
  bool is_bound(const Tensor<T>& storage) const;
  /// Adds `g` to the gradient of a bound tensor; no-op when unbound.
  void accumulate_param(const Tensor<T>& storage, const Tensor<T>& g);

  /// Records a node. Values are checked for NaN/Inf under the op name.
  Var record(std::string op, Tensor<T> value, std::vector<Var> inputs,
             Backward backward = {});

  const Tensor<T>& value(Var v) const { return nodes_.at(v).value; }
  const Shape& shape(Var v) const { return nodes_.at(v).value.shape(); }
  const std::string& op(Var v) const { return nodes_.at(v).op; }
  /// Gradient of v; zeros when nothing reached it.
  const Tensor<T>& grad(Var v);
  void accumulate(Var v, const Tensor<T>& g);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure once, in
  /// reverse record order.
  void backward(Var loss);

  /// Gradients by name for every variable and bound parameter. Parameters
  /// the loss never reached get zeros.
  std::map<std::string, Tensor<T>> gradients();

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Number of closures run by the last backward().
  std::size_t backward_visits() const noexcept { return visits_; }
  /// Number of nodes that carry a closure.
  std::size_t op_count() const;

  /// When enabled, ops with kinks (PReLU sign, mask clamp) record which
  /// side each element fell on. Finite differences across a change in this
  /// record do not approximate the gradient.
  void track_branches(bool on) { track_branches_ = on; }
  bool tracking_branches() const noexcept { return track_branches_; }
  void note_branch(bool side) {
    if (track_branches_) branches_.push_back(side);
  }
  const std::vector<bool>& branches() const noexcept { return branches_; }

 private:
  struct Node {
    std::string op;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<Var> inputs;
    Backward backward;
  };
  struct Bound {
    std::string name;
    const Tensor<T>* storage;
    Tensor<T> grad;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::map<std::string, Var> variables_;
  std::vector<Bound> bound_;
  std::unordered_map<const Tensor<T>*, std::size_t> bound_index_;
  std::size_t visits_ = 0;
  bool track_branches_ = false;
  std::vector<bool> branches_;
};

// ---------------------------------------------------------------------------
// Ops. `name` labels the node for NaN reporting.

template <typename T>
Var add(Tape<T>& tape, Var a, Var b, const std::string& name = "add");

template <typename T>
Var reshape(Tape<T>& tape, Var a, Shape shape, const std::string& name = "reshape");

template <typename T>
CVar reshape(Tape<T>& tape, CVar a, const Shape& shape,
             const std::string& name = "reshape");

/// Concatenates along axis 0; all inputs share their trailing extents.
template <typename T>
Var concat0(Tape<T>& tape, const std::vector<Var>& parts,
            const std::string& name = "concat");

template <typename T>
CVar concat0(Tape<T>& tape, const std::vector<CVar>& parts,
             const std::string& name = "concat");

/// sum(a^2), scalar.
template <typename T>
Var sum_squares(Tape<T>& tape, Var a, const std::string& name = "sum_squares");

/// <a, w> against a constant tensor, scalar.
template <typename T>
Var dot(Tape<T>& tape, Var a, const Tensor<T>& w, const std::string& name = "dot");

template <typename T>
CVar complex_conv(Tape<T>& tape, CVar x, const nn::ComplexConvParams<T>& p,
                  const nn::ConvSpec& spec, const std::string& name);

/// Per-part PReLU.
template <typename T>
CVar complex_prelu(Tape<T>& tape, CVar x, const Tensor<T>& alpha_re,
                   const Tensor<T>& alpha_im, const std::string& name);

template <typename T>
Var ft_branch(Tape<T>& tape, Var h, const nn::FtLstmParams<T>& p,
              const std::string& name, nn::FtLstmTrace* trace = nullptr);

template <typename T>
CVar complex_lstm(Tape<T>& tape, CVar x, const nn::ComplexLstmParams<T>& p,
                  const std::string& name);

template <typename T>
CVar deep_filter(Tape<T>& tape, CVar coef, CVar target, const std::string& name);

/// Y * clamp(M): the mask magnitude is limited to `limit`. `clamped`
/// receives the number of clamped bins.
template <typename T>
CVar apply_mask(Tape<T>& tape, CVar y, CVar mask, double limit,
                const std::string& name, std::size_t* clamped = nullptr);

/// Overlap-add synthesis of (T, F) spectra, trimmed or zero-extended to n.
template <typename T>
Var istft(Tape<T>& tape, CVar spec, const SpectralKernels<T>& kernels,
          std::size_t n, const std::string& name = "istft");

/// -Seg-SiSNR against a constant reference; zero when every chunk is silent.
template <typename T>
Var neg_seg_sisnr(Tape<T>& tape, Var s_hat, const std::vector<T>& reference,
                  const ChunkPlan& plan, SiSnrMode mode,
                  const std::string& name = "loss");

}  // namespace dcaec::ag
