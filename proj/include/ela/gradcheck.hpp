// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference checks of analytic gradients, in double.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ela/attention_config.hpp"
#include "ela/tensor.hpp"

namespace ela {

// Gradients smaller than this are compared in absolute terms.
inline constexpr double kGradCheckFloor = 1e-4;
inline constexpr double kGradCheckStep = 1e-5;

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = kGradCheckFloor);

struct GradGroup {
  std::string name;
  std::size_t count = 0;
  double max_rel = 0;
  double max_abs = 0;
};

struct GradCheckReport {
  std::vector<GradGroup> groups;

  double max_rel() const;
  bool passed(double tol) const { return max_rel() < tol; }
};

// Perturbs each entry of `values` by +-step, evaluates `loss` and compares
// the central difference against `analytic`. Restores `values`.
GradGroup check_entries(const std::string& name, std::span<double> values,
                        std::span<const double> analytic, const std::function<double()>& loss,
                        double step = kGradCheckStep);

// Same check for a linear functional sum_j weights[j] * y[j] of a vector
// output; the numeric derivative differences y before projecting it.
GradGroup check_entries(const std::string& name, std::span<double> values,
                        std::span<const double> analytic,
                        const std::function<void(std::vector<double>&)>& outputs,
                        std::span<const double> weights, double step = kGradCheckStep);

struct AttentionGradCheckOptions {
  Shape4 shape{2, 16, 5, 7};
  std::uint64_t seed = 1;
  double step = kGradCheckStep;
  bool corrupt_backward = false;  // negative control
};

// Full-module check of dL/dx and every parameter for L = sum(r * y), with r
// a fixed random projection. CA-BN runs in train mode.
GradCheckReport gradcheck_attention(const AttentionConfig& cfg,
                                    const AttentionGradCheckOptions& opts = {});

}  // namespace ela
