// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/toy/gradcam.hpp"

#include <algorithm>
#include <cmath>

namespace ela::toy {

std::pair<std::size_t, std::size_t> Heatmap::argmax() const {
  if (values.empty()) throw StateError("Heatmap: empty");
  const auto it = std::max_element(values.begin(), values.end());
  const auto i = static_cast<std::size_t>(it - values.begin());
  return {i / width, i % width};
}

std::vector<double> bilinear_resize(std::span<const double> src, std::size_t h, std::size_t w,
                                    std::size_t out_h, std::size_t out_w) {
  if (h == 0 || w == 0 || out_h == 0 || out_w == 0 || src.size() != h * w)
    throw ShapeError("bilinear_resize: bad sizes");
  std::vector<double> out(out_h * out_w);
  auto coord = [](std::size_t d, std::size_t in, std::size_t outn, std::size_t& i0, std::size_t& i1,
                  double& f) {
    double s = (static_cast<double>(d) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, in - 1);
    f = s - static_cast<double>(i0);
  };
  for (std::size_t r = 0; r < out_h; ++r) {
    std::size_t r0, r1;
    double fr;
    coord(r, h, out_h, r0, r1, fr);
    for (std::size_t c = 0; c < out_w; ++c) {
      std::size_t c0, c1;
      double fc;
      coord(c, w, out_w, c0, c1, fc);
      const double top = src[r0 * w + c0] * (1 - fc) + src[r0 * w + c1] * fc;
      const double bot = src[r1 * w + c0] * (1 - fc) + src[r1 * w + c1] * fc;
      out[r * out_w + c] = top * (1 - fr) + bot * fr;
    }
  }
  return out;
}

Heatmap gradcam_from_maps(const Tensor4<double>& act, const Tensor4<double>& grad, std::size_t n,
                          std::size_t out_h, std::size_t out_w) {
  const auto& s = act.shape();
  if (grad.shape() != s) throw ShapeError("gradcam: activation/gradient shape mismatch");
  if (n >= s.n) throw ShapeError("gradcam: sample index out of range");
  const std::size_t hw = s.h * s.w;
  std::vector<double> cam(hw, 0.0);
  for (std::size_t c = 0; c < s.c; ++c) {
    const auto g = grad.plane(n, c);
    double alpha = 0;
    for (double v : g) alpha += v;
    alpha /= static_cast<double>(hw);
    const auto a = act.plane(n, c);
    for (std::size_t i = 0; i < hw; ++i) cam[i] += alpha * a[i];
  }
  for (double& v : cam) v = std::max(v, 0.0);
  Heatmap hm{out_h, out_w, bilinear_resize(cam, s.h, s.w, out_h, out_w)};
  const auto [lo, hi] = std::minmax_element(hm.values.begin(), hm.values.end());
  const double mn = *lo, range = *hi - *lo;
  // Relative test so a map that is constant up to rounding also maps to zero.
  if (!(range > 1e-12 * std::max(1.0, std::abs(*hi)))) {
    std::fill(hm.values.begin(), hm.values.end(), 0.0);
    return hm;
  }
  for (double& v : hm.values) v = std::clamp((v - mn) / range, 0.0, 1.0);
  return hm;
}

Heatmap gradcam(MiniCnn& model, const Tensor4<double>& x, std::size_t class_index,
                std::size_t target_stage) {
  if (x.shape().n != 1) throw ShapeError("gradcam: expects a single sample");
  if (class_index >= model.config().classes)
    throw ConfigError("gradcam: class index " + std::to_string(class_index) + " out of range");
  if (target_stage >= model.num_stages())
    throw ConfigError("gradcam: no stage " + std::to_string(target_stage));
  const Logits lg = model.forward(x);
  Logits d(lg.shape());
  d(0, class_index, 0) = 1.0;
  model.zero_grad();
  model.backward(d);
  model.zero_grad();
  return gradcam_from_maps(model.stage_activation(target_stage), model.stage_activation_grad(target_stage), 0,
                           x.shape().h, x.shape().w);
}

}  // namespace ela::toy
