// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ela/attention.hpp"

namespace ela {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::max_rel() const {
  double m = 0;
  for (const auto& g : groups) m = std::max(m, g.max_rel);
  return m;
}

GradGroup check_entries(const std::string& name, std::span<double> values,
                        std::span<const double> analytic, const std::function<double()>& loss,
                        double step) {
  if (values.size() != analytic.size())
    throw ShapeError("check_entries: analytic gradient size mismatch for " + name);
  GradGroup g{name, values.size(), 0, 0};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + step;
    const double lp = loss();
    values[i] = orig - step;
    const double lm = loss();
    values[i] = orig;
    const double numeric = (lp - lm) / (2 * step);
    g.max_rel = std::max(g.max_rel, relative_error(analytic[i], numeric));
    g.max_abs = std::max(g.max_abs, std::abs(analytic[i] - numeric));
  }
  return g;
}

GradGroup check_entries(const std::string& name, std::span<double> values,
                        std::span<const double> analytic,
                        const std::function<void(std::vector<double>&)>& outputs,
                        std::span<const double> weights, double step) {
  if (values.size() != analytic.size())
    throw ShapeError("check_entries: analytic gradient size mismatch for " + name);
  GradGroup g{name, values.size(), 0, 0};
  std::vector<double> yp, ym;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + step;
    outputs(yp);
    values[i] = orig - step;
    outputs(ym);
    values[i] = orig;
    if (yp.size() != weights.size() || ym.size() != weights.size())
      throw ShapeError("check_entries: output/weight size mismatch for " + name);
    // Differences first: a sum of two O(1) losses loses the small digits.
    double d = 0;
    for (std::size_t j = 0; j < weights.size(); ++j) d += weights[j] * (yp[j] - ym[j]);
    const double numeric = d / (2 * step);
    g.max_rel = std::max(g.max_rel, relative_error(analytic[i], numeric));
    g.max_abs = std::max(g.max_abs, std::abs(analytic[i] - numeric));
  }
  return g;
}

GradCheckReport gradcheck_attention(const AttentionConfig& cfg,
                                    const AttentionGradCheckOptions& opts) {
  const Shape4 shape = opts.shape;
  validate(cfg, shape.c);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Attention<double> block(cfg, shape.c, opts.seed + 1);
  // Non-trivial affine parameters so the check does not sit at gamma=1, beta=0.
  for (auto& p : block.params().entries())
    if (p.role != ParamRole::conv_weight)
      for (double& v : p.value) v += 0.2 * normal(rng);
  block.set_mode(Mode::train);
  block.corrupt_backward_for_testing(opts.corrupt_backward);

  Tensor4<double> x(shape);
  for (double& v : x.vec()) v = normal(rng);
  Tensor4<double> proj(shape);
  for (double& v : proj.vec()) v = normal(rng);

  auto outputs = [&](std::vector<double>& out) { out = block.forward(x, false).vec(); };

  block.params().zero_grad();
  block.forward(x, true);
  const Tensor4<double> dx = block.backward(proj);

  GradCheckReport report;
  report.groups.push_back(check_entries("input", x.data(), dx.data(), outputs, proj.data(), opts.step));
  for (auto& p : block.params().entries()) {
    const std::vector<double> analytic = p.grad;
    report.groups.push_back(check_entries(p.name, p.value, analytic, outputs, proj.data(), opts.step));
  }
  return report;
}

}  // namespace ela
