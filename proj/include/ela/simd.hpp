// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Inner-loop primitives behind every tensor kernel. Each primitive has a
// scalar reference implementation and, where the target supports it, an
// AVX2 implementation. The active table is picked once at startup from the
// CPU features and the ELA_SIMD environment variable (scalar | avx2).
//
// Element-wise primitives (add, axpy, axpy_prod, scale_mul) are bit-identical
// across levels: the vector code performs the same multiplies and adds in
// the same order and never fuses them. Reductions (sum, dot, dot3,
// sum_sq_dev) use lane-wise partial sums in the vector code and therefore
// agree with the scalar reference only to rounding.

#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace ela::simd {

enum class Level { scalar, avx2 };

template <typename T>
struct KernelTable {
  Level level;
  T (*sum)(const T* x, std::size_t n);
  T (*dot)(const T* a, const T* b, std::size_t n);
  // sum of a[i] * b[i] * c[i]
  T (*dot3)(const T* a, const T* b, const T* c, std::size_t n);
  // sum of (x[i] - mean)^2
  T (*sum_sq_dev)(const T* x, T mean, std::size_t n);
  // y += x
  void (*add)(T* y, const T* x, std::size_t n);
  // y += a * x
  void (*axpy)(T* y, T a, const T* x, std::size_t n);
  // y += a * (b * c)
  void (*axpy_prod)(T* y, T a, const T* b, const T* c, std::size_t n);
  // y = (x * a) * b
  void (*scale_mul)(T* y, const T* x, T a, const T* b, std::size_t n);
};

// Active table for the process.
template <typename T>
const KernelTable<T>& kernels();

// Table for a specific level, or nullptr when this build or CPU lacks it.
template <typename T>
const KernelTable<T>* kernels_for(Level level);

bool supported(Level level);
Level active_level();
// Throws ConfigError if the level is unsupported.
void set_active_level(Level level);

std::string_view level_name(Level level);
std::optional<Level> parse_level(std::string_view name);

}  // namespace ela::simd
