// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ela/simd.hpp"

namespace ela::simd::detail {

extern const KernelTable<float> kScalarF32;
extern const KernelTable<double> kScalarF64;

#if ELA_HAVE_AVX2
extern const KernelTable<float> kAvx2F32;
extern const KernelTable<double> kAvx2F64;
#endif

}  // namespace ela::simd::detail
