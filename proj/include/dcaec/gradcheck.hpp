// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Central-difference checks of the tape gradients. Each case builds a small
// graph ending in a scalar, runs backward once, then perturbs a sample of
// entries of every target tensor by multiples of +-step and re-evaluates
// the loss.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcaec/autograd.hpp"

namespace dcaec {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Central stencil order, 2 or 4. The 4-point stencil keeps truncation
  /// error below the tolerance for the composed network at step 1e-3.
  int order = 4;
  /// Entries probed per tensor (all of them when the tensor is smaller).
  std::size_t max_entries = 24;
};

struct GradcheckResult {
  std::string name;
  double max_rel_error = 0;
  std::size_t checked = 0;
  /// Probes dropped because the perturbation crossed a kink.
  std::size_t skipped = 0;
  bool passed = false;
};

/// A tensor the check perturbs. Parameters are bound to the tape by
/// address; inputs must be turned into `tape.variable(name, *tensor)` by
/// the builder.
struct GradTarget {
  std::string name;
  Tensor<double>* tensor;
  bool param;
};

using GraphBuilder = std::function<ag::Var(ag::Tape<double>&)>;

/// Probes whose perturbed evaluations take a different side of any kink
/// than the unperturbed graph are skipped and counted.
/// Relative error per entry is |a - fd| / max(|a|, |fd|, floor), floor being
/// 1e-2 of the largest finite-difference magnitude seen in that tensor.
GradcheckResult check_gradients(const std::string& name,
                                const std::vector<GradTarget>& targets,
                                const GraphBuilder& build,
                                const GradcheckOptions& opts);

/// Every differentiable op plus a composed network loss.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts = {});

}  // namespace dcaec
