// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable building blocks for the attention modules. Every forward
// kernel is a pure function of its inputs and has a matching backward that
// returns the vector-Jacobian product. Loops run in a fixed order, so results
// are deterministic for a given SIMD level.

#pragma once

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <span>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "ela/error.hpp"
#include "ela/simd.hpp"
#include "ela/tensor.hpp"

namespace ela {

enum class Mode { train, eval };

// Non-deduced span parameter so callers can pass std::vector directly.
template <typename T>
using cspan = std::type_identity_t<std::span<const T>>;

// ---------------------------------------------------------------------------
// Strip and global pooling
// ---------------------------------------------------------------------------

// Which spatial axis a strip pool averages away.
enum class PoolAxis {
  width,   // z^h: one value per row, shape (N, C, H)
  height,  // z^w: one value per column, shape (N, C, W)
};

// z^h[n,c,h] = mean_w x[n,c,h,w]. The average runs over the width so that
// every row gets its own descriptor.
template <typename T>
Tensor3<T> strip_pool_h(const Tensor4<T>& x) {
  const auto& s = x.shape();
  const auto& k = simd::kernels<T>();
  Tensor3<T> z({s.n, s.c, s.h});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* plane = x.plane(n, c).data();
      for (std::size_t h = 0; h < s.h; ++h)
        z(n, c, h) = k.sum(plane + h * s.w, s.w) / static_cast<T>(s.w);
    }
  return z;
}

// z^w[n,c,w] = mean_h x[n,c,h,w].
template <typename T>
Tensor3<T> strip_pool_w(const Tensor4<T>& x) {
  const auto& s = x.shape();
  const auto& k = simd::kernels<T>();
  Tensor3<T> z({s.n, s.c, s.w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* plane = x.plane(n, c).data();
      T* out = z.row(n, c).data();
      for (std::size_t h = 0; h < s.h; ++h) k.add(out, plane + h * s.w, s.w);
      for (std::size_t w = 0; w < s.w; ++w) out[w] /= static_cast<T>(s.h);
    }
  return z;
}

template <typename T>
Tensor4<T> strip_pool_backward(const Tensor3<T>& dz, const Shape4& orig,
                               PoolAxis axis) {
  const auto& d = dz.shape();
  const std::size_t expect_l = axis == PoolAxis::width ? orig.h : orig.w;
  if (d.n != orig.n || d.c != orig.c || d.l != expect_l)
    throw ShapeError("strip_pool_backward: gradient " + d.str() +
                     " does not match pooled shape of " + orig.str());
  Tensor4<T> dx(orig);
  const T inv = T(1) / static_cast<T>(axis == PoolAxis::width ? orig.w
                                                               : orig.h);
  for (std::size_t n = 0; n < orig.n; ++n)
    for (std::size_t c = 0; c < orig.c; ++c) {
      const T* g = dz.row(n, c).data();
      T* plane = dx.plane(n, c).data();
      for (std::size_t h = 0; h < orig.h; ++h)
        for (std::size_t w = 0; w < orig.w; ++w)
          plane[h * orig.w + w] =
              (axis == PoolAxis::width ? g[h] : g[w]) * inv;
    }
  return dx;
}

template <typename T>
Tensor4<T> transpose_hw(const Tensor4<T>& x) {
  const auto& s = x.shape();
  Tensor4<T> y({s.n, s.c, s.w, s.h});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w) y(n, c, w, h) = x(n, c, h, w);
  return y;
}

// Mean over H*W, shape (N, C, 1).
template <typename T>
Tensor3<T> global_avg_pool(const Tensor4<T>& x) {
  const auto& s = x.shape();
  const auto& k = simd::kernels<T>();
  Tensor3<T> z({s.n, s.c, 1});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      z(n, c, 0) = k.sum(x.plane(n, c).data(), x.plane_size()) /
                   static_cast<T>(x.plane_size());
  return z;
}

template <typename T>
Tensor4<T> global_avg_pool_backward(const Tensor3<T>& dz, const Shape4& orig) {
  if (dz.shape() != Shape3{orig.n, orig.c, 1})
    throw ShapeError("global_avg_pool_backward: gradient " + dz.shape().str() +
                     " does not match " + orig.str());
  Tensor4<T> dx(orig);
  const T inv = T(1) / static_cast<T>(orig.h * orig.w);
  for (std::size_t n = 0; n < orig.n; ++n)
    for (std::size_t c = 0; c < orig.c; ++c)
      for (T& v : dx.plane(n, c)) v = dz(n, c, 0) * inv;
  return dx;
}

// ---------------------------------------------------------------------------
// Grouped 1D convolution (cross-correlation, zero same-padding)
// ---------------------------------------------------------------------------

struct Conv1dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 1;
  std::size_t groups = 1;

  std::size_t in_per_group() const { return in_channels / groups; }
  std::size_t out_per_group() const { return out_channels / groups; }
  std::size_t weight_size() const {
    return out_channels * in_per_group() * kernel_size;
  }
  // Fails on zero sizes, even kernels, or groups that do not divide both
  // channel counts.
  void validate() const {
    if (in_channels == 0 || out_channels == 0 || kernel_size == 0 ||
        groups == 0)
      throw ConfigError("conv1d: sizes must be >= 1");
    if (kernel_size % 2 == 0)
      throw ConfigError("conv1d: kernel_size must be odd, got " +
                        std::to_string(kernel_size));
    if (in_channels % groups != 0 || out_channels % groups != 0)
      throw ConfigError("conv1d: groups=" + std::to_string(groups) +
                        " does not divide channels (in=" +
                        std::to_string(in_channels) +
                        ", out=" + std::to_string(out_channels) + ")");
  }
};

template <typename T>
struct Conv1dGrads {
  Tensor3<T> dx;
  std::vector<T> dweight;
  std::vector<T> dbias;
};

namespace detail {

// Range of output positions l for which l + t - pad lies inside [0, len).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t len,
                                                       std::size_t t,
                                                       std::size_t pad) {
  const std::size_t lo = t < pad ? pad - t : 0;
  const std::size_t hi = t > pad ? (t - pad < len ? len - (t - pad) : 0) : len;
  return {lo, hi < lo ? lo : hi};
}

}  // namespace detail

// weight layout: (out_channels, in_channels / groups, kernel_size).
// bias is optional (empty span = no bias). Output length equals input length.
template <typename T>
Tensor3<T> conv1d_grouped(const Tensor3<T>& x, cspan<T> weight,
                          const Conv1dSpec& spec,
                          cspan<T> bias = {}) {
  spec.validate();
  const auto& s = x.shape();
  if (s.c != spec.in_channels)
    throw ShapeError("conv1d: input has " + std::to_string(s.c) +
                     " channels, expected " + std::to_string(spec.in_channels));
  if (weight.size() != spec.weight_size())
    throw ShapeError("conv1d: weight size " + std::to_string(weight.size()) +
                     " != " + std::to_string(spec.weight_size()));
  if (!bias.empty() && bias.size() != spec.out_channels)
    throw ShapeError("conv1d: bias size mismatch");

  const auto& k = simd::kernels<T>();
  const std::size_t cin = spec.in_per_group();
  const std::size_t cout = spec.out_per_group();
  const std::size_t ks = spec.kernel_size;
  const std::size_t pad = ks / 2;
  const std::size_t len = s.l;
  Tensor3<T> y({s.n, spec.out_channels, len});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
      T* out = y.row(n, o).data();
      if (!bias.empty())
        for (std::size_t l = 0; l < len; ++l) out[l] = bias[o];
      const std::size_t g = o / cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* in = x.row(n, g * cin + ci).data();
        const T* wrow = weight.data() + (o * cin + ci) * ks;
        for (std::size_t t = 0; t < ks; ++t) {
          const auto [lo, hi] = detail::valid_range(len, t, pad);
          if (hi > lo) k.axpy(out + lo, wrow[t], in + lo + t - pad, hi - lo);
        }
      }
    }
  return y;
}

template <typename T>
Conv1dGrads<T> conv1d_grouped_backward(const Tensor3<T>& dy,
                                       const Tensor3<T>& x,
                                       cspan<T> weight,
                                       const Conv1dSpec& spec,
                                       bool with_bias) {
  spec.validate();
  const auto& s = x.shape();
  if (dy.shape() != Shape3{s.n, spec.out_channels, s.l} ||
      s.c != spec.in_channels || weight.size() != spec.weight_size())
    throw ShapeError("conv1d_backward: shapes inconsistent with forward");

  const auto& k = simd::kernels<T>();
  const std::size_t cin = spec.in_per_group();
  const std::size_t cout = spec.out_per_group();
  const std::size_t ks = spec.kernel_size;
  const std::size_t pad = ks / 2;
  const std::size_t len = s.l;
  Conv1dGrads<T> g{Tensor3<T>(s), std::vector<T>(weight.size(), T(0)),
                   std::vector<T>(with_bias ? spec.out_channels : 0, T(0))};
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
      const T* grad = dy.row(n, o).data();
      if (with_bias) g.dbias[o] += k.sum(grad, len);
      const std::size_t grp = o / cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const std::size_t c = grp * cin + ci;
        const T* in = x.row(n, c).data();
        T* din = g.dx.row(n, c).data();
        const T* wrow = weight.data() + (o * cin + ci) * ks;
        T* dwrow = g.dweight.data() + (o * cin + ci) * ks;
        for (std::size_t t = 0; t < ks; ++t) {
          const auto [lo, hi] = detail::valid_range(len, t, pad);
          if (hi <= lo) continue;
          dwrow[t] += k.dot(grad + lo, in + lo + t - pad, hi - lo);
          k.axpy(din + lo + t - pad, wrow[t], grad + lo, hi - lo);
        }
      }
    }
  return g;
}

// ---------------------------------------------------------------------------
// 1x1 convolution: per-position channel mixing
// ---------------------------------------------------------------------------

template <typename T>
struct Conv1x1Grads {
  Tensor3<T> dx;
  std::vector<T> dweight;
  std::vector<T> dbias;
};

// weight layout: (out_channels, in_channels), row-major.
template <typename T>
Tensor3<T> conv1x1(const Tensor3<T>& x, cspan<T> weight,
                   std::size_t out_channels, cspan<T> bias = {}) {
  const auto& s = x.shape();
  if (out_channels == 0 || weight.size() != out_channels * s.c)
    throw ShapeError("conv1x1: weight has " + std::to_string(weight.size()) +
                     " entries, expected " + std::to_string(out_channels) +
                     "x" + std::to_string(s.c));
  if (!bias.empty() && bias.size() != out_channels)
    throw ShapeError("conv1x1: bias size mismatch");
  const auto& k = simd::kernels<T>();
  Tensor3<T> y({s.n, out_channels, s.l});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < out_channels; ++o) {
      T* out = y.row(n, o).data();
      if (!bias.empty())
        for (std::size_t l = 0; l < s.l; ++l) out[l] = bias[o];
      for (std::size_t i = 0; i < s.c; ++i)
        k.axpy(out, weight[o * s.c + i], x.row(n, i).data(), s.l);
    }
  return y;
}

template <typename T>
Tensor4<T> conv1x1(const Tensor4<T>& x, cspan<T> weight,
                   std::size_t out_channels, cspan<T> bias = {}) {
  return unflatten_spatial(
      conv1x1(flatten_spatial(x), weight, out_channels, bias), x.shape().h,
      x.shape().w);
}

template <typename T>
Conv1x1Grads<T> conv1x1_backward(const Tensor3<T>& dy, const Tensor3<T>& x,
                                 cspan<T> weight, bool with_bias) {
  const auto& s = x.shape();
  const std::size_t out_channels = dy.shape().c;
  if (dy.shape().n != s.n || dy.shape().l != s.l ||
      weight.size() != out_channels * s.c)
    throw ShapeError("conv1x1_backward: shapes inconsistent with forward");
  const auto& k = simd::kernels<T>();
  Conv1x1Grads<T> g{Tensor3<T>(s), std::vector<T>(weight.size(), T(0)),
                    std::vector<T>(with_bias ? out_channels : 0, T(0))};
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < out_channels; ++o) {
      const T* grad = dy.row(n, o).data();
      if (with_bias) g.dbias[o] += k.sum(grad, s.l);
      for (std::size_t i = 0; i < s.c; ++i) {
        g.dweight[o * s.c + i] += k.dot(grad, x.row(n, i).data(), s.l);
        k.axpy(g.dx.row(n, i).data(), weight[o * s.c + i], grad, s.l);
      }
    }
  return g;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

template <typename T>
struct NormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);
  Mode mode = Mode::train;
  // False until a train-mode pass has produced running statistics.
  bool initialized = false;

  NormState() = default;
  explicit NormState(std::size_t channels)
      : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

// Normalized input and inverse std saved by the forward pass.
template <typename T>
struct NormCache {
  Tensor3<T> xhat;
  std::vector<T> rstd;  // per channel (BN) or per (sample, group) (GN)
  Mode mode = Mode::train;
  std::size_t groups = 0;
};

template <typename T>
struct NormGrads {
  Tensor3<T> dx;
  std::vector<T> dgamma;
  std::vector<T> dbeta;
};

namespace detail {

inline void check_affine(std::size_t c, std::size_t gamma, std::size_t beta, const char* who) {
  if (gamma != c || beta != c)
    throw ShapeError(std::string(who) + ": gamma/beta must have " +
                     std::to_string(c) + " entries");
}

}  // namespace detail

// Per-channel normalization over (N, L). Train mode uses batch statistics
// and updates the running estimates (unbiased variance); eval mode uses the
// running estimates only.
template <typename T>
Tensor3<T> batch_norm(const Tensor3<T>& x, NormState<T>& state,
                      cspan<T> gamma, cspan<T> beta,
                      NormCache<T>* cache = nullptr) {
  const auto& s = x.shape();
  detail::check_affine(s.c, gamma.size(), beta.size(), "batch_norm");
  if (state.running_mean.size() != s.c || state.running_var.size() != s.c)
    throw ShapeError("batch_norm: state has wrong channel count");
  if (!(state.eps > T(0))) throw ConfigError("batch_norm: eps must be > 0");
  const auto& k = simd::kernels<T>();
  const std::size_t count = s.n * s.l;

  std::vector<T> mean(s.c), rstd(s.c);
  if (state.mode == Mode::train) {
    if (count < 2)
      throw ShapeError("batch_norm: train mode needs N*L >= 2");
    for (std::size_t c = 0; c < s.c; ++c) {
      T sum = 0;
      for (std::size_t n = 0; n < s.n; ++n) sum += k.sum(x.row(n, c).data(), s.l);
      const T m = sum / static_cast<T>(count);
      T ss = 0;
      for (std::size_t n = 0; n < s.n; ++n)
        ss += k.sum_sq_dev(x.row(n, c).data(), m, s.l);
      const T var = ss / static_cast<T>(count);
      mean[c] = m;
      rstd[c] = T(1) / std::sqrt(var + state.eps);
      const T unbiased = ss / static_cast<T>(count - 1);
      state.running_mean[c] =
          (T(1) - state.momentum) * state.running_mean[c] + state.momentum * m;
      state.running_var[c] = (T(1) - state.momentum) * state.running_var[c] +
                             state.momentum * unbiased;
    }
    state.initialized = true;
  } else {
    if (!state.initialized)
      throw StateError("batch_norm: eval mode before running statistics exist");
    for (std::size_t c = 0; c < s.c; ++c) {
      mean[c] = state.running_mean[c];
      rstd[c] = T(1) / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  Tensor3<T> y(s);
  Tensor3<T> xhat(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* in = x.row(n, c).data();
      T* xh = xhat.row(n, c).data();
      T* out = y.row(n, c).data();
      for (std::size_t l = 0; l < s.l; ++l) {
        xh[l] = (in[l] - mean[c]) * rstd[c];
        out[l] = gamma[c] * xh[l] + beta[c];
      }
    }
  if (cache) *cache = NormCache<T>{std::move(xhat), std::move(rstd), state.mode, 0};
  return y;
}

namespace detail {

// dx for x_hat = (x - mean(x)) * rstd over a set of m elements:
// dx = rstd * (g - mean(g) - x_hat * mean(g * x_hat)), g = dy * gamma.
template <typename T>
void norm_input_grad(std::span<const T> g, std::span<const T> xhat, T rstd,
                     std::span<T> dx, T mean_g, T mean_gx) {
  for (std::size_t i = 0; i < g.size(); ++i)
    dx[i] = rstd * (g[i] - mean_g - xhat[i] * mean_gx);
}

}  // namespace detail

template <typename T>
NormGrads<T> batch_norm_backward(const Tensor3<T>& dy, const NormCache<T>& cache,
                                 cspan<T> gamma) {
  const auto& s = cache.xhat.shape();
  if (dy.shape() != s || gamma.size() != s.c || cache.rstd.size() != s.c)
    throw ShapeError("batch_norm_backward: shapes inconsistent with forward");
  const auto& k = simd::kernels<T>();
  NormGrads<T> g{Tensor3<T>(s), std::vector<T>(s.c, T(0)),
                 std::vector<T>(s.c, T(0))};
  const T count = static_cast<T>(s.n * s.l);
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t n = 0; n < s.n; ++n) {
      g.dbeta[c] += k.sum(dy.row(n, c).data(), s.l);
      g.dgamma[c] += k.dot(dy.row(n, c).data(), cache.xhat.row(n, c).data(), s.l);
    }
    if (cache.mode == Mode::eval) {
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* d = dy.row(n, c).data();
        T* dx = g.dx.row(n, c).data();
        for (std::size_t l = 0; l < s.l; ++l) dx[l] = d[l] * gamma[c] * cache.rstd[c];
      }
      continue;
    }
    // sum(dy * gamma) and sum(dy * gamma * xhat) are dbeta and dgamma scaled.
    const T mean_g = gamma[c] * g.dbeta[c] / count;
    const T mean_gx = gamma[c] * g.dgamma[c] / count;
    std::vector<T> gv(s.l);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* d = dy.row(n, c).data();
      for (std::size_t l = 0; l < s.l; ++l) gv[l] = d[l] * gamma[c];
      detail::norm_input_grad<T>(gv, cache.xhat.row(n, c), cache.rstd[c],
                                 g.dx.row(n, c), mean_g, mean_gx);
    }
  }
  return g;
}

// Per-sample normalization over contiguous channel groups of size C/groups
// times L, followed by a per-channel affine map.
template <typename T>
Tensor3<T> group_norm(const Tensor3<T>& x, std::size_t num_groups,
                      cspan<T> gamma, cspan<T> beta,
                      std::type_identity_t<T> eps = T(1e-5),
                      NormCache<T>* cache = nullptr) {
  const auto& s = x.shape();
  if (num_groups == 0 || s.c % num_groups != 0)
    throw ConfigError("group_norm: num_groups=" + std::to_string(num_groups) +
                      " does not divide C=" + std::to_string(s.c));
  if (!(eps > T(0))) throw ConfigError("group_norm: eps must be > 0");
  detail::check_affine(s.c, gamma.size(), beta.size(), "group_norm");
  const auto& k = simd::kernels<T>();
  const std::size_t cpg = s.c / num_groups;
  const std::size_t m = cpg * s.l;

  Tensor3<T> y(s), xhat(s);
  std::vector<T> rstd(s.n * num_groups);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t g = 0; g < num_groups; ++g) {
      const T* in = x.row(n, g * cpg).data();
      const T mean = k.sum(in, m) / static_cast<T>(m);
      const T var = k.sum_sq_dev(in, mean, m) / static_cast<T>(m);
      const T r = T(1) / std::sqrt(var + eps);
      rstd[n * num_groups + g] = r;
      T* xh = xhat.row(n, g * cpg).data();
      T* out = y.row(n, g * cpg).data();
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = g * cpg + i / s.l;
        xh[i] = (in[i] - mean) * r;
        out[i] = gamma[c] * xh[i] + beta[c];
      }
    }
  if (cache)
    *cache = NormCache<T>{std::move(xhat), std::move(rstd), Mode::train, num_groups};
  return y;
}

template <typename T>
NormGrads<T> group_norm_backward(const Tensor3<T>& dy, const NormCache<T>& cache,
                                 cspan<T> gamma) {
  const auto& s = cache.xhat.shape();
  const std::size_t groups = cache.groups;
  if (dy.shape() != s || gamma.size() != s.c || groups == 0 ||
      cache.rstd.size() != s.n * groups)
    throw ShapeError("group_norm_backward: shapes inconsistent with forward");
  const auto& k = simd::kernels<T>();
  NormGrads<T> g{Tensor3<T>(s), std::vector<T>(s.c, T(0)),
                 std::vector<T>(s.c, T(0))};
  const std::size_t cpg = s.c / groups;
  const std::size_t m = cpg * s.l;
  std::vector<T> gv(m);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t grp = 0; grp < groups; ++grp) {
      const std::size_t c0 = grp * cpg;
      const T* d = dy.row(n, c0).data();
      const T* xh = cache.xhat.row(n, c0).data();
      for (std::size_t ci = 0; ci < cpg; ++ci) {
        g.dbeta[c0 + ci] += k.sum(d + ci * s.l, s.l);
        g.dgamma[c0 + ci] += k.dot(d + ci * s.l, xh + ci * s.l, s.l);
      }
      for (std::size_t i = 0; i < m; ++i) gv[i] = d[i] * gamma[c0 + i / s.l];
      const T mean_g = k.sum(gv.data(), m) / static_cast<T>(m);
      const T mean_gx = k.dot(gv.data(), xh, m) / static_cast<T>(m);
      detail::norm_input_grad<T>(
          gv, std::span<const T>(xh, m), cache.rstd[n * groups + grp],
          std::span<T>(g.dx.row(n, c0).data(), m), mean_g, mean_gx);
    }
  return g;
}

// ---------------------------------------------------------------------------
// Activations (element-wise; work on any tensor type)
// ---------------------------------------------------------------------------

template <std::floating_point T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <std::floating_point T>
T hard_swish(T x) {
  const T r6 = std::min(std::max(x + T(3), T(0)), T(6));
  return x * r6 / T(6);
}

template <std::floating_point T>
T hard_swish_grad(T x) {
  if (x <= T(-3)) return T(0);
  if (x >= T(3)) return T(1);
  return (T(2) * x + T(3)) / T(6);
}

template <typename Tn>
  requires requires(Tn t) { t.vec(); }
Tn sigmoid(const Tn& x) {
  Tn y = x;
  for (auto& v : y.vec()) v = sigmoid(v);
  return y;
}

// dx = dy * y * (1 - y), with y the forward output.
template <typename Tn>
Tn sigmoid_backward(const Tn& dy, const Tn& y) {
  if (dy.shape() != y.shape()) throw ShapeError("sigmoid_backward: shape mismatch");
  Tn dx = dy;
  auto& d = dx.vec();
  const auto& yv = y.vec();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= yv[i] * (1 - yv[i]);
  return dx;
}

template <typename Tn>
  requires requires(Tn t) { t.vec(); }
Tn hard_swish(const Tn& x) {
  Tn y = x;
  for (auto& v : y.vec()) v = hard_swish(v);
  return y;
}

template <typename Tn>
Tn hard_swish_backward(const Tn& dy, const Tn& x) {
  if (dy.shape() != x.shape()) throw ShapeError("hard_swish_backward: shape mismatch");
  Tn dx = dy;
  auto& d = dx.vec();
  const auto& xv = x.vec();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= hard_swish_grad(xv[i]);
  return dx;
}

template <typename Tn>
Tn relu(const Tn& x) {
  Tn y = x;
  for (auto& v : y.vec()) v = v > 0 ? v : 0;
  return y;
}

template <typename Tn>
Tn relu_backward(const Tn& dy, const Tn& x) {
  if (dy.shape() != x.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tn dx = dy;
  auto& d = dx.vec();
  const auto& xv = x.vec();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!(xv[i] > 0)) d[i] = 0;
  return dx;
}

// ---------------------------------------------------------------------------
// Directional gating and channel gating
// ---------------------------------------------------------------------------

// y[n,c,i,j] = x[n,c,i,j] * ah[n,c,i] * aw[n,c,j], evaluated left to right.
template <typename T>
Tensor4<T> broadcast_mul_hw(const Tensor4<T>& x, const Tensor3<T>& ah,
                            const Tensor3<T>& aw) {
  const auto& s = x.shape();
  if (ah.shape() != Shape3{s.n, s.c, s.h} || aw.shape() != Shape3{s.n, s.c, s.w})
    throw ShapeError("broadcast_mul_hw: maps " + ah.shape().str() + " / " +
                     aw.shape().str() + " do not match input " + s.str());
  const auto& k = simd::kernels<T>();
  Tensor4<T> y(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* in = x.plane(n, c).data();
      T* out = y.plane(n, c).data();
      const T* a_w = aw.row(n, c).data();
      for (std::size_t i = 0; i < s.h; ++i)
        k.scale_mul(out + i * s.w, in + i * s.w, ah(n, c, i), a_w, s.w);
    }
  return y;
}

template <typename T>
struct BroadcastMulGrads {
  Tensor4<T> dx;
  Tensor3<T> dah;
  Tensor3<T> daw;
};

template <typename T>
BroadcastMulGrads<T> broadcast_mul_hw_backward(const Tensor4<T>& dy,
                                               const Tensor4<T>& x,
                                               const Tensor3<T>& ah,
                                               const Tensor3<T>& aw) {
  const auto& s = x.shape();
  if (dy.shape() != s || ah.shape() != Shape3{s.n, s.c, s.h} ||
      aw.shape() != Shape3{s.n, s.c, s.w})
    throw ShapeError("broadcast_mul_hw_backward: shape mismatch");
  const auto& k = simd::kernels<T>();
  BroadcastMulGrads<T> g{Tensor4<T>(s), Tensor3<T>(ah.shape()),
                         Tensor3<T>(aw.shape())};
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* d = dy.plane(n, c).data();
      const T* in = x.plane(n, c).data();
      T* dx = g.dx.plane(n, c).data();
      const T* a_w = aw.row(n, c).data();
      T* daw = g.daw.row(n, c).data();
      for (std::size_t i = 0; i < s.h; ++i) {
        const std::size_t off = i * s.w;
        k.scale_mul(dx + off, d + off, ah(n, c, i), a_w, s.w);
        g.dah(n, c, i) = k.dot3(d + off, in + off, a_w, s.w);
        k.axpy_prod(daw, ah(n, c, i), d + off, in + off, s.w);
      }
    }
  return g;
}

// y[n,c,:,:] = x[n,c,:,:] * gate[n,c,0]
template <typename T>
Tensor4<T> channel_scale(const Tensor4<T>& x, const Tensor3<T>& gate) {
  const auto& s = x.shape();
  if (gate.shape() != Shape3{s.n, s.c, 1})
    throw ShapeError("channel_scale: gate " + gate.shape().str() +
                     " does not match input " + s.str());
  Tensor4<T> y(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto in = x.plane(n, c);
      auto out = y.plane(n, c);
      const T a = gate(n, c, 0);
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * a;
    }
  return y;
}

template <typename T>
std::pair<Tensor4<T>, Tensor3<T>> channel_scale_backward(const Tensor4<T>& dy,
                                                         const Tensor4<T>& x,
                                                         const Tensor3<T>& gate) {
  const auto& s = x.shape();
  if (dy.shape() != s || gate.shape() != Shape3{s.n, s.c, 1})
    throw ShapeError("channel_scale_backward: shape mismatch");
  const auto& k = simd::kernels<T>();
  Tensor4<T> dx(s);
  Tensor3<T> dgate(gate.shape());
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto d = dy.plane(n, c);
      auto out = dx.plane(n, c);
      const T a = gate(n, c, 0);
      for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i] * a;
      dgate(n, c, 0) = k.dot(d.data(), x.plane(n, c).data(), d.size());
    }
  return {std::move(dx), std::move(dgate)};
}

// ---------------------------------------------------------------------------
// Spatial concatenation
// ---------------------------------------------------------------------------

template <typename T>
Tensor3<T> concat_spatial(const Tensor3<T>& a, const Tensor3<T>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.n != sb.n || sa.c != sb.c)
    throw ShapeError("concat_spatial: " + sa.str() + " vs " + sb.str());
  Tensor3<T> y({sa.n, sa.c, sa.l + sb.l});
  for (std::size_t n = 0; n < sa.n; ++n)
    for (std::size_t c = 0; c < sa.c; ++c) {
      auto out = y.row(n, c);
      std::copy_n(a.row(n, c).begin(), sa.l, out.begin());
      std::copy_n(b.row(n, c).begin(), sb.l, out.begin() + sa.l);
    }
  return y;
}

// Splits along L at `first` (first part has length `first`).
template <typename T>
std::pair<Tensor3<T>, Tensor3<T>> split_spatial(const Tensor3<T>& z,
                                                std::size_t first) {
  const auto& s = z.shape();
  if (first == 0 || first >= s.l)
    throw ShapeError("split_spatial: split index " + std::to_string(first) +
                     " out of range for length " + std::to_string(s.l));
  Tensor3<T> a({s.n, s.c, first}), b({s.n, s.c, s.l - first});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto in = z.row(n, c);
      std::copy_n(in.begin(), first, a.row(n, c).begin());
      std::copy_n(in.begin() + first, s.l - first, b.row(n, c).begin());
    }
  return {std::move(a), std::move(b)};
}

}  // namespace ela
