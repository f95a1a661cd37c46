// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dcaec {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Thrown when tensor extents disagree with what a kernel expects.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad user input: unreadable files, wrong sample rate, malformed weights.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf detected in a computation; the message names the layer.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major real tensor.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... Idx>
  T& operator()(Idx... idx) noexcept {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const noexcept {
    return data_[offset(idx...)];
  }

  void reshape(Shape shape) {
    if (numel(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " +
                       to_string(shape));
    }
    shape_ = std::move(shape);
  }
  Tensor reshaped(Shape shape) const {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool same_shape(const Tensor& other) const noexcept {
    return shape_ == other.shape_;
  }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& other) {
    require_same_shape(other, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }
  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

 private:
  template <typename... Idx>
  std::size_t offset(Idx... idx) const noexcept {
    const std::array<std::size_t, sizeof...(Idx)> ix{
        static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t a = 0; a < ix.size(); ++a) off = off * shape_[a] + ix[a];
    return off;
  }
  void require_same_shape(const Tensor& other, const char* op) const {
    if (shape_ != other.shape_) {
      throw ShapeError(std::string("shape mismatch in ") + op + ": " +
                       to_string(shape_) + " vs " + to_string(other.shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Complex tensor stored as separate real and imaginary planes.
template <typename T>
struct ComplexPair {
  Tensor<T> re;
  Tensor<T> im;

  ComplexPair() = default;
  explicit ComplexPair(const Shape& shape) : re(shape), im(shape) {}
  ComplexPair(Tensor<T> r, Tensor<T> i) : re(std::move(r)), im(std::move(i)) {
    validate();
  }

  const Shape& shape() const noexcept { return re.shape(); }
  void validate() const {
    if (!re.same_shape(im)) {
      throw ShapeError("complex pair parts differ: " + to_string(re.shape()) +
                       " vs " + to_string(im.shape()));
    }
  }
  template <typename U>
  ComplexPair<U> cast() const {
    return ComplexPair<U>(re.template cast<U>(), im.template cast<U>());
  }
};

/// Reorders a rank-3 tensor; out.dim(i) = in.dim(perm[i]).
template <typename T>
Tensor<T> permute3(const Tensor<T>& in, std::array<int, 3> perm);

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expected,
                   const std::string& what) {
  if (t.shape() != expected) {
    throw ShapeError(what + ": expected " + to_string(expected) + ", got " +
                     to_string(t.shape()));
  }
}

template <typename T>
bool all_finite(const Tensor<T>& t);

}  // namespace dcaec
