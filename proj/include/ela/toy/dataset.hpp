// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic location-classification data: one Gaussian blob per image, and
// the label is the quadrant holding the blob center.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ela/tensor.hpp"

namespace ela::toy {

struct BlobCenter {
  std::size_t row = 0;
  std::size_t col = 0;
};

struct ToyDataConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  double noise_std = 0.02;
  double blob_sigma = 2.0;
  double blob_peak = 1.0;
};

struct ToyBatch {
  Tensor4<double> images;  // (N, 1, H, W), values in [0, 1]
  std::vector<int> labels;
  std::vector<BlobCenter> centers;
};

inline constexpr int kNumQuadrants = 4;

// 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right.
int quadrant_of(BlobCenter c, std::size_t height, std::size_t width);

// Each sample: label uniform over quadrants, integer center uniform inside
// the quadrant, background N(0, noise_std) plus the blob, clamped to [0, 1].
ToyBatch make_toy_batch(std::size_t n, std::uint64_t seed, const ToyDataConfig& cfg = {});

// Renders one image with the blob at `center` (noise drawn from `seed`).
Tensor4<double> render_blob(BlobCenter center, std::uint64_t seed, const ToyDataConfig& cfg = {});

}  // namespace ela::toy
