// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "simd_tables.hpp"

namespace ela::simd::detail {
namespace {

template <typename T>
T sum(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T dot3(const T* a, const T* b, const T* c, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i] * c[i];
  return acc;
}

template <typename T>
T sum_sq_dev(const T* x, T mean, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

template <typename T>
void add(T* y, const T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

template <typename T>
void axpy(T* y, T a, const T* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void axpy_prod(T* y, T a, const T* b, const T* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * (b[i] * c[i]);
}

template <typename T>
void scale_mul(T* y, const T* x, T a, const T* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * a * b[i];
}

template <typename T>
constexpr KernelTable<T> make_table() {
  return {Level::scalar, &sum<T>,  &dot<T>,       &dot3<T>,
          &sum_sq_dev<T>, &add<T>, &axpy<T>, &axpy_prod<T>,
          &scale_mul<T>};
}

}  // namespace

const KernelTable<float> kScalarF32 = make_table<float>();
const KernelTable<double> kScalarF64 = make_table<double>();

}  // namespace ela::simd::detail
