// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/tensor.hpp"

#include <cmath>

namespace dcaec {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

template <typename T>
Tensor<T> permute3(const Tensor<T>& in, std::array<int, 3> perm) {
  if (in.rank() != 3) throw ShapeError("permute3 needs a rank-3 tensor");
  const Shape& s = in.shape();
  Tensor<T> out({s[perm[0]], s[perm[1]], s[perm[2]]});
  const std::array<std::size_t, 3> in_stride{s[1] * s[2], s[2], 1};
  const std::size_t so0 = in_stride[perm[0]], so1 = in_stride[perm[1]],
                    so2 = in_stride[perm[2]];
  const std::size_t n0 = out.dim(0), n1 = out.dim(1), n2 = out.dim(2);
  const T* src = in.data();
  T* dst = out.data();
#pragma omp parallel for schedule(static)
  for (std::size_t a = 0; a < n0; ++a) {
    for (std::size_t b = 0; b < n1; ++b) {
      const T* base = src + a * so0 + b * so1;
      T* row = dst + (a * n1 + b) * n2;
      for (std::size_t c = 0; c < n2; ++c) row[c] = base[c * so2];
    }
  }
  return out;
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template Tensor<float> permute3(const Tensor<float>&, std::array<int, 3>);
template Tensor<double> permute3(const Tensor<double>&, std::array<int, 3>);
template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);

}  // namespace dcaec
