// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Dense NCHW / NCL tensors. Both types own their storage and are plain
// values: copying a tensor copies its data.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ela/error.hpp"

namespace ela {

struct Shape4 {
  std::size_t n = 1, c = 1, h = 1, w = 1;

  std::size_t size() const { return n * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

struct Shape3 {
  std::size_t n = 1, c = 1, l = 1;

  std::size_t size() const { return n * c * l; }
  bool operator==(const Shape3&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(l) + ")";
  }
};

template <typename T = double>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T(0)) : shape_(shape) {
    if (shape.n == 0 || shape.c == 0 || shape.h == 0 || shape.w == 0)
      throw ShapeError("Tensor4: all dimensions must be >= 1, got " +
                       shape.str());
    data_.assign(shape.size(), fill);
  }
  Tensor4(Shape4 shape, std::vector<T> data) : Tensor4(shape) {
    if (data.size() != shape.size())
      throw ShapeError("Tensor4: data length does not match " + shape.str());
    data_ = std::move(data);
  }

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return shape_.h * shape_.w; }

  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h,
                      std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  std::span<T> plane(std::size_t n, std::size_t c) {
    return std::span<T>(data_).subspan((n * shape_.c + c) * plane_size(),
                                       plane_size());
  }
  std::span<const T> plane(std::size_t n, std::size_t c) const {
    return std::span<const T>(data_).subspan(
        (n * shape_.c + c) * plane_size(), plane_size());
  }
  std::span<T> sample(std::size_t n) {
    return std::span<T>(data_).subspan(n * shape_.c * plane_size(),
                                       shape_.c * plane_size());
  }
  std::span<const T> sample(std::size_t n) const {
    return std::span<const T>(data_).subspan(n * shape_.c * plane_size(),
                                             shape_.c * plane_size());
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_{};
  std::vector<T> data_ = std::vector<T>(1, T(0));
};

template <typename T = double>
class Tensor3 {
 public:
  using value_type = T;

  Tensor3() = default;
  explicit Tensor3(Shape3 shape, T fill = T(0)) : shape_(shape) {
    if (shape.n == 0 || shape.c == 0 || shape.l == 0)
      throw ShapeError("Tensor3: all dimensions must be >= 1, got " +
                       shape.str());
    data_.assign(shape.size(), fill);
  }
  Tensor3(Shape3 shape, std::vector<T> data) : Tensor3(shape) {
    if (data.size() != shape.size())
      throw ShapeError("Tensor3: data length does not match " + shape.str());
    data_ = std::move(data);
  }

  const Shape3& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t n, std::size_t c, std::size_t l) {
    return data_[(n * shape_.c + c) * shape_.l + l];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t l) const {
    return data_[(n * shape_.c + c) * shape_.l + l];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  std::span<T> row(std::size_t n, std::size_t c) {
    return std::span<T>(data_).subspan((n * shape_.c + c) * shape_.l,
                                       shape_.l);
  }
  std::span<const T> row(std::size_t n, std::size_t c) const {
    return std::span<const T>(data_).subspan((n * shape_.c + c) * shape_.l,
                                             shape_.l);
  }
  std::span<T> sample(std::size_t n) {
    return std::span<T>(data_).subspan(n * shape_.c * shape_.l,
                                       shape_.c * shape_.l);
  }
  std::span<const T> sample(std::size_t n) const {
    return std::span<const T>(data_).subspan(n * shape_.c * shape_.l,
                                             shape_.c * shape_.l);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool operator==(const Tensor3&) const = default;

 private:
  Shape3 shape_{};
  std::vector<T> data_ = std::vector<T>(1, T(0));
};

// Views an NCHW tensor as (N, C, H*W). Copies the data.
template <typename T>
Tensor3<T> flatten_spatial(const Tensor4<T>& x) {
  const auto& s = x.shape();
  return Tensor3<T>({s.n, s.c, s.h * s.w}, x.vec());
}

template <typename T>
Tensor4<T> unflatten_spatial(const Tensor3<T>& x, std::size_t h,
                             std::size_t w) {
  const auto& s = x.shape();
  if (s.l != h * w)
    throw ShapeError("unflatten_spatial: length " + std::to_string(s.l) +
                     " != " + std::to_string(h) + "x" + std::to_string(w));
  return Tensor4<T>({s.n, s.c, h, w}, x.vec());
}

template <typename T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(),
                     [](T a) { return std::isfinite(a); });
}

}  // namespace ela
