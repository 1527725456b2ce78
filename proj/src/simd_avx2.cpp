// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// AVX2 variants of the primitives in simd_scalar.cpp. Built with -mavx2 and
// only called after a runtime CPU check. No FMA: every product is rounded
// before it is added, exactly like the scalar reference.

#include <immintrin.h>

#include "simd_tables.hpp"

namespace ela::simd::detail {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double a) { return _mm256_set1_pd(a); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static double hsum(reg v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
  }
};

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float a) { return _mm256_set1_ps(a); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static float hsum(reg v) {
    const __m128 lo = _mm256_castps256_ps128(v);
    const __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x1));
    return _mm_cvtss_f32(s);
  }
};

template <typename T>
T sum(const T* x, std::size_t n) {
  using V = Vec<T>;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) acc = V::add(acc, V::load(x + i));
  T s = V::hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  using V = Vec<T>;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    acc = V::add(acc, V::mul(V::load(a + i), V::load(b + i)));
  T s = V::hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T dot3(const T* a, const T* b, const T* c, std::size_t n) {
  using V = Vec<T>;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    acc = V::add(acc, V::mul(V::mul(V::load(a + i), V::load(b + i)),
                             V::load(c + i)));
  T s = V::hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i] * c[i];
  return s;
}

template <typename T>
T sum_sq_dev(const T* x, T mean, std::size_t n) {
  using V = Vec<T>;
  const auto m = V::set1(mean);
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    const auto d = V::sub(V::load(x + i), m);
    acc = V::add(acc, V::mul(d, d));
  }
  T s = V::hsum(acc);
  for (; i < n; ++i) {
    const T d = x[i] - mean;
    s += d * d;
  }
  return s;
}

template <typename T>
void add(T* y, const T* x, std::size_t n) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    V::store(y + i, V::add(V::load(y + i), V::load(x + i)));
  for (; i < n; ++i) y[i] += x[i];
}

template <typename T>
void axpy(T* y, T a, const T* x, std::size_t n) {
  using V = Vec<T>;
  const auto va = V::set1(a);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    V::store(y + i, V::add(V::load(y + i), V::mul(va, V::load(x + i))));
  for (; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void axpy_prod(T* y, T a, const T* b, const T* c, std::size_t n) {
  using V = Vec<T>;
  const auto va = V::set1(a);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) {
    const auto bc = V::mul(V::load(b + i), V::load(c + i));
    V::store(y + i, V::add(V::load(y + i), V::mul(va, bc)));
  }
  for (; i < n; ++i) y[i] += a * (b[i] * c[i]);
}

template <typename T>
void scale_mul(T* y, const T* x, T a, const T* b, std::size_t n) {
  using V = Vec<T>;
  const auto va = V::set1(a);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width)
    V::store(y + i, V::mul(V::mul(V::load(x + i), va), V::load(b + i)));
  for (; i < n; ++i) y[i] = x[i] * a * b[i];
}

template <typename T>
constexpr KernelTable<T> make_table() {
  return {Level::avx2,    &sum<T>, &dot<T>,       &dot3<T>,
          &sum_sq_dev<T>, &add<T>, &axpy<T>, &axpy_prod<T>,
          &scale_mul<T>};
}

}  // namespace

const KernelTable<float> kAvx2F32 = make_table<float>();
const KernelTable<double> kAvx2F64 = make_table<double>();

}  // namespace ela::simd::detail
