// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ela/tensor.hpp"
#include "ela/toy/mini_cnn.hpp"

namespace ela::toy {

struct Heatmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major, in [0, 1]

  // (row, col) of the first maximum.
  std::pair<std::size_t, std::size_t> argmax() const;
};

// Half-pixel-centered bilinear resize with edge clamping.
std::vector<double> bilinear_resize(std::span<const double> src, std::size_t h, std::size_t w,
                                    std::size_t out_h, std::size_t out_w);

// cam = relu(sum_c mean_hw(grad_c) * act_c) for sample n, upsampled and
// min-max normalized; a constant map becomes all zeros.
Heatmap gradcam_from_maps(const Tensor4<double>& act, const Tensor4<double>& grad, std::size_t n,
                          std::size_t out_h, std::size_t out_w);

// x must hold one sample. Runs forward and backward of the class score and
// reads the post-attention activation of the last block of target_stage.
// Parameter gradients are cleared afterwards.
Heatmap gradcam(MiniCnn& model, const Tensor4<double>& x, std::size_t class_index,
                std::size_t target_stage);

}  // namespace ela::toy
