// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Attention blocks composed from the tensor-core kernels. Every block maps
// an (N, C, H, W) tensor to a tensor of the same shape by multiplicative
// gating:
//
//   ELA  y = x * sigmoid(GN(conv1d_h(pool_h x))) * sigmoid(GN(conv1d_w(pool_w x)))
//   CA   y = x * sigmoid(F_h f^h) * sigmoid(F_w f^w),
//        [f^h; f^w] = delta(Norm(F_1 [pool_h x; pool_w x]))
//   SE   y = x * sigmoid(W2 relu(W1 gap x))
//   ECA  y = x * sigmoid(conv1d_k over channels(gap x))
//
// Each family has a forward that optionally fills a cache and a backward
// that consumes it, accumulates parameter gradients into the ParamStore and
// returns dL/dx.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>

#include "ela/attention_config.hpp"
#include "ela/kernels.hpp"
#include "ela/param_store.hpp"
#include "ela/tensor.hpp"

namespace ela {

template <typename T>
struct AttentionMaps {
  Tensor3<T> ah;  // (N, C, H)
  Tensor3<T> aw;  // (N, C, W)
};

template <typename T>
struct GatedOutput {
  Tensor4<T> y;
  AttentionMaps<T> maps;
};

// ---------------------------------------------------------------------------
// Parameter initialization
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void fill_he_normal(Param<T>& p, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (T& v : p.value) v = static_cast<T>(dist(rng));
}

template <typename T>
void add_affine(ParamStore<T>& ps, const std::string& prefix, std::size_t c) {
  ps.add(prefix + ".gamma", {c}, ParamRole::norm_gamma, T(1));
  ps.add(prefix + ".beta", {c}, ParamRole::norm_beta, T(0));
}

}  // namespace detail

// Conv weights ~ N(0, 2 / fan_in), biases 0, norm gamma 1 and beta 0.
// Deterministic for a fixed seed.
template <typename T>
ParamStore<T> init_params(const AttentionConfig& cfg, std::size_t channels,
                          std::uint64_t seed) {
  validate(cfg, channels);
  std::mt19937_64 rng(seed);
  ParamStore<T> ps;
  const std::size_t c = channels;
  struct Init {
    ParamStore<T>& ps;
    std::mt19937_64& rng;
    std::size_t c;

    void operator()(const ElaConfig& e) const {
      const std::size_t g = e.conv_groups(c);
      for (const char* name : {"conv_h.weight", "conv_w.weight"}) {
        auto& p = ps.add(name, {c, c / g, e.kernel_size}, ParamRole::conv_weight);
        detail::fill_he_normal(p, (c / g) * e.kernel_size, rng);
      }
      detail::add_affine(ps, "gn_h", c);
      detail::add_affine(ps, "gn_w", c);
    }
    void operator()(const CaConfig& a) const {
      const std::size_t mip = a.mip(c);
      detail::fill_he_normal(ps.add("conv1.weight", {mip, c}, ParamRole::conv_weight), c, rng);
      detail::add_affine(ps, "norm1", mip);
      for (const char* dir : {"conv_h", "conv_w"}) {
        const std::string base(dir);
        detail::fill_he_normal(ps.add(base + ".weight", {c, mip}, ParamRole::conv_weight), mip,
                               rng);
        ps.add(base + ".bias", {c}, ParamRole::conv_bias);
      }
    }
    void operator()(const SeConfig& s) const {
      const std::size_t mip = s.mip(c);
      detail::fill_he_normal(ps.add("fc1.weight", {mip, c}, ParamRole::conv_weight), c, rng);
      detail::fill_he_normal(ps.add("fc2.weight", {c, mip}, ParamRole::conv_weight), mip, rng);
    }
    void operator()(const EcaConfig& e) const {
      detail::fill_he_normal(ps.add("conv.weight", {1, 1, e.kernel_size}, ParamRole::conv_weight),
                             e.kernel_size, rng);
    }
  };
  std::visit(Init{ps, rng, c}, cfg);
  return ps;
}

// Checks that `ps` carries every entry the config needs with the right shape.
template <typename T>
void check_params(const AttentionConfig& cfg, std::size_t channels, const ParamStore<T>& ps) {
  const ParamStore<T> ref = init_params<T>(cfg, channels, 0);
  for (const auto& p : ref.entries()) {
    const auto& q = ps.at(p.name);
    if (q.shape != p.shape)
      throw ShapeError("ParamStore: parameter " + p.name + " has the wrong shape");
  }
}

// ---------------------------------------------------------------------------
// ELA
// ---------------------------------------------------------------------------

template <typename T>
struct ElaCache {
  Tensor4<T> x;
  Tensor3<T> zh, zw;  // strip pools
  NormCache<T> nh, nw;
  Tensor3<T> ah, aw;  // sigmoid outputs
};

template <typename T>
GatedOutput<T> ela_forward(const Tensor4<T>& x, const ElaConfig& cfg, const ParamStore<T>& ps,
                           ElaCache<T>* cache = nullptr) {
  const auto& s = x.shape();
  const std::size_t groups = cfg.conv_groups(s.c);
  const std::size_t ng = cfg.norm_groups(s.c);
  cfg.validate(s.c);
  const Conv1dSpec spec{s.c, s.c, cfg.kernel_size, groups};

  auto direction = [&](const Tensor3<T>& z, const char* conv, const char* gn, NormCache<T>* nc) {
    const Tensor3<T> f = conv1d_grouped<T>(z, ps.value(conv), spec);
    const std::string p(gn);
    return sigmoid(group_norm<T>(f, ng, ps.value(p + ".gamma"), ps.value(p + ".beta"), T(1e-5), nc));
  };

  Tensor3<T> zh = strip_pool_h(x);
  Tensor3<T> zw = strip_pool_w(x);
  NormCache<T> nh, nw;
  Tensor3<T> ah = direction(zh, "conv_h.weight", "gn_h", &nh);
  Tensor3<T> aw = direction(zw, "conv_w.weight", "gn_w", &nw);
  Tensor4<T> y = broadcast_mul_hw(x, ah, aw);
  if (cache) *cache = ElaCache<T>{x, std::move(zh), std::move(zw), std::move(nh), std::move(nw), ah, aw};
  return {std::move(y), {std::move(ah), std::move(aw)}};
}

template <typename T>
Tensor4<T> ela_backward(const Tensor4<T>& dy, const ElaCache<T>* cache, const ElaConfig& cfg,
                        ParamStore<T>& ps) {
  if (!cache) throw StateError("ela_backward: forward was run without keeping intermediates");
  const auto& s = cache->x.shape();
  if (dy.shape() != s) throw ShapeError("ela_backward: gradient shape mismatch");
  const Conv1dSpec spec{s.c, s.c, cfg.kernel_size, cfg.conv_groups(s.c)};

  auto bm = broadcast_mul_hw_backward(dy, cache->x, cache->ah, cache->aw);
  Tensor4<T> dx = std::move(bm.dx);

  auto direction = [&](const Tensor3<T>& da, const Tensor3<T>& a, const NormCache<T>& nc,
                       const Tensor3<T>& z, const std::string& conv, const std::string& gn,
                       PoolAxis axis) {
    const Tensor3<T> dn = sigmoid_backward(da, a);
    auto ng = group_norm_backward<T>(dn, nc, ps.value(gn + ".gamma"));
    ps.accumulate(gn + ".gamma", ng.dgamma);
    ps.accumulate(gn + ".beta", ng.dbeta);
    auto cg = conv1d_grouped_backward<T>(ng.dx, z, ps.value(conv), spec, false);
    ps.accumulate(conv, cg.dweight);
    const Tensor4<T> dpool = strip_pool_backward(cg.dx, s, axis);
    simd::kernels<T>().add(dx.data().data(), dpool.data().data(), dx.size());
  };
  direction(bm.dah, cache->ah, cache->nh, cache->zh, "conv_h.weight", "gn_h", PoolAxis::width);
  direction(bm.daw, cache->aw, cache->nw, cache->zw, "conv_w.weight", "gn_w", PoolAxis::height);
  return dx;
}

// ---------------------------------------------------------------------------
// Coordinate attention (BN or GN flavor)
// ---------------------------------------------------------------------------

template <typename T>
struct CaCache {
  Tensor4<T> x;
  Tensor3<T> z;       // [z^h; z^w], (N, C, H+W)
  Tensor3<T> normed;  // normalization output, (N, mip, H+W)
  NormCache<T> nc;
  Tensor3<T> fh, fw;  // split activations, (N, mip, H) and (N, mip, W)
  Tensor3<T> gh, gw;  // sigmoid gates, (N, C, H) and (N, C, W)
};

// `bn` must be non-null for the BN flavor; its mode selects batch or running
// statistics.
template <typename T>
GatedOutput<T> ca_forward(const Tensor4<T>& x, const CaConfig& cfg, const ParamStore<T>& ps,
                          NormState<T>* bn, CaCache<T>* cache = nullptr) {
  const auto& s = x.shape();
  cfg.validate(s.c);
  const std::size_t mip = cfg.mip(s.c);

  Tensor3<T> z = concat_spatial(strip_pool_h(x), strip_pool_w(x));
  const Tensor3<T> f1 = conv1x1<T>(z, ps.value("conv1.weight"), mip);
  NormCache<T> nc;
  Tensor3<T> normed;
  if (cfg.norm == NormFlavor::batch) {
    if (!bn) throw StateError("ca_forward: BN flavor needs a NormState");
    normed = batch_norm<T>(f1, *bn, ps.value("norm1.gamma"), ps.value("norm1.beta"), &nc);
  } else {
    normed = group_norm<T>(f1, cfg.norm_groups(s.c), ps.value("norm1.gamma"),
                           ps.value("norm1.beta"), T(1e-5), &nc);
  }
  const Tensor3<T> act = cfg.delta == GateActivation::hard_swish ? hard_swish(normed) : relu(normed);
  auto [fh, fw] = split_spatial(act, s.h);
  Tensor3<T> gh = sigmoid(conv1x1<T>(fh, ps.value("conv_h.weight"), s.c, ps.value("conv_h.bias")));
  Tensor3<T> gw = sigmoid(conv1x1<T>(fw, ps.value("conv_w.weight"), s.c, ps.value("conv_w.bias")));
  Tensor4<T> y = broadcast_mul_hw(x, gh, gw);
  if (cache)
    *cache = CaCache<T>{x, std::move(z), std::move(normed), std::move(nc), std::move(fh), std::move(fw),
                        gh, gw};
  return {std::move(y), {std::move(gh), std::move(gw)}};
}

template <typename T>
Tensor4<T> ca_backward(const Tensor4<T>& dy, const CaCache<T>* cache, const CaConfig& cfg,
                       ParamStore<T>& ps) {
  if (!cache) throw StateError("ca_backward: forward was run without keeping intermediates");
  const auto& s = cache->x.shape();
  if (dy.shape() != s) throw ShapeError("ca_backward: gradient shape mismatch");

  auto bm = broadcast_mul_hw_backward(dy, cache->x, cache->gh, cache->gw);
  auto expand = [&](const Tensor3<T>& dg, const Tensor3<T>& g, const Tensor3<T>& f,
                    const std::string& conv) {
    const Tensor3<T> dt = sigmoid_backward(dg, g);
    auto cg = conv1x1_backward<T>(dt, f, ps.value(conv + ".weight"), true);
    ps.accumulate(conv + ".weight", cg.dweight);
    ps.accumulate(conv + ".bias", cg.dbias);
    return std::move(cg.dx);
  };
  const Tensor3<T> dfh = expand(bm.dah, cache->gh, cache->fh, "conv_h");
  const Tensor3<T> dfw = expand(bm.daw, cache->gw, cache->fw, "conv_w");
  const Tensor3<T> dact = concat_spatial(dfh, dfw);
  const Tensor3<T> dnormed = cfg.delta == GateActivation::hard_swish
                                 ? hard_swish_backward(dact, cache->normed)
                                 : relu_backward(dact, cache->normed);
  auto ng = cfg.norm == NormFlavor::batch
                ? batch_norm_backward<T>(dnormed, cache->nc, ps.value("norm1.gamma"))
                : group_norm_backward<T>(dnormed, cache->nc, ps.value("norm1.gamma"));
  ps.accumulate("norm1.gamma", ng.dgamma);
  ps.accumulate("norm1.beta", ng.dbeta);
  auto c1 = conv1x1_backward<T>(ng.dx, cache->z, ps.value("conv1.weight"), false);
  ps.accumulate("conv1.weight", c1.dweight);
  auto [dzh, dzw] = split_spatial(c1.dx, s.h);

  Tensor4<T> dx = std::move(bm.dx);
  const auto& k = simd::kernels<T>();
  const Tensor4<T> ph = strip_pool_backward(dzh, s, PoolAxis::width);
  const Tensor4<T> pw = strip_pool_backward(dzw, s, PoolAxis::height);
  k.add(dx.data().data(), ph.data().data(), dx.size());
  k.add(dx.data().data(), pw.data().data(), dx.size());
  return dx;
}

// ---------------------------------------------------------------------------
// Channel-only gating: SE and ECA
// ---------------------------------------------------------------------------

template <typename T>
struct SeCache {
  Tensor4<T> x;
  Tensor3<T> pooled;  // (N, C, 1)
  Tensor3<T> hidden;  // pre-rectifier bottleneck, (N, mip, 1)
  Tensor3<T> act;     // post-rectifier, (N, mip, 1)
  Tensor3<T> gate;    // (N, C, 1)
};

template <typename T>
Tensor4<T> se_forward(const Tensor4<T>& x, const SeConfig& cfg, const ParamStore<T>& ps,
                      SeCache<T>* cache = nullptr) {
  const auto& s = x.shape();
  const std::size_t mip = cfg.mip(s.c);
  Tensor3<T> pooled = global_avg_pool(x);
  Tensor3<T> hidden = conv1x1<T>(pooled, ps.value("fc1.weight"), mip);
  Tensor3<T> act = relu(hidden);
  Tensor3<T> gate = sigmoid(conv1x1<T>(act, ps.value("fc2.weight"), s.c));
  Tensor4<T> y = channel_scale(x, gate);
  if (cache)
    *cache = SeCache<T>{x, std::move(pooled), std::move(hidden), std::move(act), std::move(gate)};
  return y;
}

template <typename T>
Tensor4<T> se_backward(const Tensor4<T>& dy, const SeCache<T>* cache, ParamStore<T>& ps) {
  if (!cache) throw StateError("se_backward: forward was run without keeping intermediates");
  const auto& s = cache->x.shape();
  if (dy.shape() != s) throw ShapeError("se_backward: gradient shape mismatch");
  auto [dx, dgate] = channel_scale_backward(dy, cache->x, cache->gate);
  const Tensor3<T> dh2 = sigmoid_backward(dgate, cache->gate);
  auto g2 = conv1x1_backward<T>(dh2, cache->act, ps.value("fc2.weight"), false);
  ps.accumulate("fc2.weight", g2.dweight);
  const Tensor3<T> dh1 = relu_backward(g2.dx, cache->hidden);
  auto g1 = conv1x1_backward<T>(dh1, cache->pooled, ps.value("fc1.weight"), false);
  ps.accumulate("fc1.weight", g1.dweight);
  const Tensor4<T> dp = global_avg_pool_backward(g1.dx, s);
  simd::kernels<T>().add(dx.data().data(), dp.data().data(), dx.size());
  return dx;
}

template <typename T>
struct EcaCache {
  Tensor4<T> x;
  Tensor3<T> seq;   // pooled values as a one-channel sequence, (N, 1, C)
  Tensor3<T> gate;  // (N, C, 1)
};

template <typename T>
Tensor4<T> eca_forward(const Tensor4<T>& x, const EcaConfig& cfg, const ParamStore<T>& ps,
                       EcaCache<T>* cache = nullptr) {
  const auto& s = x.shape();
  cfg.validate(s.c);
  Tensor3<T> seq({s.n, 1, s.c}, global_avg_pool(x).vec());
  const Tensor3<T> conv = conv1d_grouped<T>(seq, ps.value("conv.weight"), {1, 1, cfg.kernel_size, 1});
  Tensor3<T> gate = sigmoid(Tensor3<T>({s.n, s.c, 1}, conv.vec()));
  Tensor4<T> y = channel_scale(x, gate);
  if (cache) *cache = EcaCache<T>{x, std::move(seq), std::move(gate)};
  return y;
}

template <typename T>
Tensor4<T> eca_backward(const Tensor4<T>& dy, const EcaCache<T>* cache, const EcaConfig& cfg,
                        ParamStore<T>& ps) {
  if (!cache) throw StateError("eca_backward: forward was run without keeping intermediates");
  const auto& s = cache->x.shape();
  if (dy.shape() != s) throw ShapeError("eca_backward: gradient shape mismatch");
  auto [dx, dgate] = channel_scale_backward(dy, cache->x, cache->gate);
  const Tensor3<T> dconv = sigmoid_backward(dgate, cache->gate);
  auto cg = conv1d_grouped_backward<T>(Tensor3<T>({s.n, 1, s.c}, dconv.vec()), cache->seq,
                                       ps.value("conv.weight"), {1, 1, cfg.kernel_size, 1}, false);
  ps.accumulate("conv.weight", cg.dweight);
  const Tensor4<T> dp = global_avg_pool_backward(Tensor3<T>({s.n, s.c, 1}, cg.dx.vec()), s);
  simd::kernels<T>().add(dx.data().data(), dp.data().data(), dx.size());
  return dx;
}

// ---------------------------------------------------------------------------
// Type-erased block
// ---------------------------------------------------------------------------

// Owns the parameters, BN running statistics (CA-BN only) and the forward
// cache of one attention block.
template <typename T>
class Attention {
 public:
  Attention(AttentionConfig cfg, std::size_t channels, std::uint64_t seed)
      : Attention(cfg, channels, init_params<T>(cfg, channels, seed)) {}

  Attention(AttentionConfig cfg, std::size_t channels, ParamStore<T> params)
      : cfg_(std::move(cfg)), channels_(channels), params_(std::move(params)) {
    validate(cfg_, channels_);
    check_params(cfg_, channels_, params_);
    if (const auto* ca = std::get_if<CaConfig>(&cfg_); ca && ca->norm == NormFlavor::batch)
      bn_.emplace(ca->mip(channels_));
  }

  Tensor4<T> forward(const Tensor4<T>& x, bool keep_intermediates = true) {
    if (x.shape().c != channels_)
      throw ShapeError("attention: input has " + std::to_string(x.shape().c) +
                       " channels, block was built for " + std::to_string(channels_));
    maps_.reset();
    cache_ = std::monostate{};
    return std::visit([&](const auto& c) { return run_forward(c, x, keep_intermediates); }, cfg_);
  }

  // Accumulates parameter gradients and returns dL/dx.
  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx = std::visit([&](const auto& c) { return run_backward(c, dy); }, cfg_);
    if (corrupt_backward_) {
      for (T& v : dx.vec()) v *= T(1.001);
    }
    return dx;
  }

  void set_mode(Mode m) {
    mode_ = m;
    if (bn_) bn_->mode = m;
  }
  Mode mode() const { return mode_; }

  const AttentionConfig& config() const { return cfg_; }
  std::size_t channels() const { return channels_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  NormState<T>* norm_state() { return bn_ ? &*bn_ : nullptr; }
  const NormState<T>* norm_state() const { return bn_ ? &*bn_ : nullptr; }
  // Directional maps from the last forward (ELA and CA only).
  const std::optional<AttentionMaps<T>>& maps() const { return maps_; }

  // Negative control for gradient checks: scales dL/dx by 1.001.
  void corrupt_backward_for_testing(bool on) { corrupt_backward_ = on; }

 private:
  Tensor4<T> run_forward(const ElaConfig& c, const Tensor4<T>& x, bool keep) {
    ElaCache<T> cache;
    auto out = ela_forward(x, c, params_, keep ? &cache : nullptr);
    if (keep) cache_ = std::move(cache);
    maps_ = std::move(out.maps);
    return std::move(out.y);
  }
  Tensor4<T> run_forward(const CaConfig& c, const Tensor4<T>& x, bool keep) {
    CaCache<T> cache;
    auto out = ca_forward(x, c, params_, norm_state(), keep ? &cache : nullptr);
    if (keep) cache_ = std::move(cache);
    maps_ = std::move(out.maps);
    return std::move(out.y);
  }
  Tensor4<T> run_forward(const SeConfig& c, const Tensor4<T>& x, bool keep) {
    SeCache<T> cache;
    auto y = se_forward(x, c, params_, keep ? &cache : nullptr);
    if (keep) cache_ = std::move(cache);
    return y;
  }
  Tensor4<T> run_forward(const EcaConfig& c, const Tensor4<T>& x, bool keep) {
    EcaCache<T> cache;
    auto y = eca_forward(x, c, params_, keep ? &cache : nullptr);
    if (keep) cache_ = std::move(cache);
    return y;
  }

  Tensor4<T> run_backward(const ElaConfig& c, const Tensor4<T>& dy) {
    return ela_backward(dy, std::get_if<ElaCache<T>>(&cache_), c, params_);
  }
  Tensor4<T> run_backward(const CaConfig& c, const Tensor4<T>& dy) {
    return ca_backward(dy, std::get_if<CaCache<T>>(&cache_), c, params_);
  }
  Tensor4<T> run_backward(const SeConfig&, const Tensor4<T>& dy) {
    return se_backward(dy, std::get_if<SeCache<T>>(&cache_), params_);
  }
  Tensor4<T> run_backward(const EcaConfig& c, const Tensor4<T>& dy) {
    return eca_backward(dy, std::get_if<EcaCache<T>>(&cache_), c, params_);
  }

  AttentionConfig cfg_;
  std::size_t channels_;
  ParamStore<T> params_;
  std::optional<NormState<T>> bn_;
  Mode mode_ = Mode::train;
  std::variant<std::monostate, ElaCache<T>, CaCache<T>, SeCache<T>, EcaCache<T>> cache_;
  std::optional<AttentionMaps<T>> maps_;
  bool corrupt_backward_ = false;
};

}  // namespace ela
