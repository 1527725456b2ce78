// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/toy/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ela::toy {
namespace {

void draw_image(std::span<double> out, BlobCenter center, std::mt19937_64& rng,
                const ToyDataConfig& cfg) {
  std::normal_distribution<double> noise(0.0, cfg.noise_std);
  const double inv = 1.0 / (2.0 * cfg.blob_sigma * cfg.blob_sigma);
  for (std::size_t r = 0; r < cfg.height; ++r)
    for (std::size_t c = 0; c < cfg.width; ++c) {
      const double dr = static_cast<double>(r) - static_cast<double>(center.row);
      const double dc = static_cast<double>(c) - static_cast<double>(center.col);
      const double v = cfg.blob_peak * std::exp(-(dr * dr + dc * dc) * inv) + noise(rng);
      out[r * cfg.width + c] = std::clamp(v, 0.0, 1.0);
    }
}

}  // namespace

int quadrant_of(BlobCenter c, std::size_t height, std::size_t width) {
  const int bottom = c.row >= height / 2 ? 1 : 0;
  const int right = c.col >= width / 2 ? 1 : 0;
  return bottom * 2 + right;
}

ToyBatch make_toy_batch(std::size_t n, std::uint64_t seed, const ToyDataConfig& cfg) {
  if (n == 0) throw ShapeError("make_toy_batch: n must be >= 1");
  if (cfg.height < 2 || cfg.width < 2) throw ShapeError("make_toy_batch: image too small");
  std::mt19937_64 rng(seed);
  ToyBatch b{Tensor4<double>({n, 1, cfg.height, cfg.width}), {}, {}};
  const std::size_t hh = cfg.height / 2, hw = cfg.width / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(std::uniform_int_distribution<int>(0, 3)(rng));
    const std::size_t r0 = label >= 2 ? hh : 0, r1 = label >= 2 ? cfg.height : hh;
    const std::size_t c0 = label % 2 ? hw : 0, c1 = label % 2 ? cfg.width : hw;
    BlobCenter center{std::uniform_int_distribution<std::size_t>(r0, r1 - 1)(rng),
                      std::uniform_int_distribution<std::size_t>(c0, c1 - 1)(rng)};
    draw_image(b.images.sample(i), center, rng, cfg);
    b.labels.push_back(label);
    b.centers.push_back(center);
  }
  return b;
}

Tensor4<double> render_blob(BlobCenter center, std::uint64_t seed, const ToyDataConfig& cfg) {
  std::mt19937_64 rng(seed);
  Tensor4<double> img({1, 1, cfg.height, cfg.width});
  draw_image(img.data(), center, rng, cfg);
  return img;
}

}  // namespace ela::toy
