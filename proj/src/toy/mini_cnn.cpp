// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/toy/mini_cnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ela/parallel.hpp"
#include "ela/simd.hpp"

namespace ela::toy {
namespace {

// cols[(i*9 + ky*3 + kx), r*W + c] = x[i, r+ky-1, c+kx-1] (zero outside).
void im2col3x3(std::span<const double> x, std::size_t c, std::size_t h, std::size_t w,
               std::vector<double>& cols) {
  const std::size_t hw = h * w;
  cols.assign(c * 9 * hw, 0.0);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* dst = cols.data() + ((i * 9) + ky * 3 + kx) * hw;
        const double* src = x.data() + i * hw;
        const std::size_t r0 = ky == 0 ? 1 : 0, r1 = ky == 2 ? h - 1 : h;
        const std::size_t c0 = kx == 0 ? 1 : 0, c1 = kx == 2 ? w - 1 : w;
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t col = c0; col < c1; ++col)
            dst[r * w + col] = src[(r + ky - 1) * w + col + kx - 1];
      }
}

void col2im3x3(const std::vector<double>& cols, std::size_t c, std::size_t h, std::size_t w,
               std::span<double> dx) {
  const std::size_t hw = h * w;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* src = cols.data() + ((i * 9) + ky * 3 + kx) * hw;
        double* dst = dx.data() + i * hw;
        const std::size_t r0 = ky == 0 ? 1 : 0, r1 = ky == 2 ? h - 1 : h;
        const std::size_t c0 = kx == 0 ? 1 : 0, c1 = kx == 2 ? w - 1 : w;
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t col = c0; col < c1; ++col)
            dst[(r + ky - 1) * w + col + kx - 1] += src[r * w + col];
      }
}

void he_normal(std::vector<double>& v, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& x : v) x = dist(rng);
}

}  // namespace

Tensor4<double> conv3x3(const Tensor4<double>& x, std::span<const double> weight,
                        std::span<const double> bias, std::size_t out_c) {
  const auto& s = x.shape();
  const std::size_t k9 = s.c * 9;
  if (weight.size() != out_c * k9 || bias.size() != out_c)
    throw ShapeError("conv3x3: weight/bias size mismatch");
  const auto& k = simd::kernels<double>();
  const std::size_t hw = s.h * s.w;
  Tensor4<double> y({s.n, out_c, s.h, s.w});
  parallel_for(s.n, [&](std::size_t n) {
    std::vector<double> cols;
    im2col3x3(x.sample(n), s.c, s.h, s.w, cols);
    for (std::size_t o = 0; o < out_c; ++o) {
      double* out = y.plane(n, o).data();
      std::fill(out, out + hw, bias[o]);
      for (std::size_t j = 0; j < k9; ++j) k.axpy(out, weight[o * k9 + j], cols.data() + j * hw, hw);
    }
  });
  return y;
}

Conv3x3Grads conv3x3_backward(const Tensor4<double>& dy, const Tensor4<double>& x,
                              std::span<const double> weight) {
  const auto& s = x.shape();
  const std::size_t out_c = dy.shape().c;
  const std::size_t k9 = s.c * 9;
  const std::size_t hw = s.h * s.w;
  if (dy.shape() != Shape4{s.n, out_c, s.h, s.w} || weight.size() != out_c * k9)
    throw ShapeError("conv3x3_backward: shapes inconsistent with forward");
  const auto& k = simd::kernels<double>();
  Conv3x3Grads g{Tensor4<double>(s), std::vector<double>(weight.size(), 0.0),
                 std::vector<double>(out_c, 0.0)};
  // Per-sample partials, reduced in sample order below, so the result does
  // not depend on the thread count.
  std::vector<std::vector<double>> dw(s.n), db(s.n);
  parallel_for(s.n, [&](std::size_t n) {
    std::vector<double> cols, dcols(k9 * hw, 0.0);
    im2col3x3(x.sample(n), s.c, s.h, s.w, cols);
    dw[n].assign(weight.size(), 0.0);
    db[n].assign(out_c, 0.0);
    for (std::size_t o = 0; o < out_c; ++o) {
      const double* d = dy.plane(n, o).data();
      db[n][o] = k.sum(d, hw);
      for (std::size_t j = 0; j < k9; ++j) {
        dw[n][o * k9 + j] = k.dot(d, cols.data() + j * hw, hw);
        k.axpy(dcols.data() + j * hw, weight[o * k9 + j], d, hw);
      }
    }
    col2im3x3(dcols, s.c, s.h, s.w, g.dx.sample(n));
  });
  for (std::size_t n = 0; n < s.n; ++n) {
    k.add(g.dweight.data(), dw[n].data(), g.dweight.size());
    k.add(g.dbias.data(), db[n].data(), out_c);
  }
  return g;
}

Tensor4<double> avg_pool2(const Tensor4<double>& x) {
  const auto& s = x.shape();
  if (s.h % 2 || s.w % 2) throw ShapeError("avg_pool2: spatial size must be even, got " + s.str());
  Tensor4<double> y({s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t r = 0; r < s.h / 2; ++r)
        for (std::size_t q = 0; q < s.w / 2; ++q)
          y(n, c, r, q) = 0.25 * (x(n, c, 2 * r, 2 * q) + x(n, c, 2 * r, 2 * q + 1) +
                                  x(n, c, 2 * r + 1, 2 * q) + x(n, c, 2 * r + 1, 2 * q + 1));
  return y;
}

Tensor4<double> avg_pool2_backward(const Tensor4<double>& dy, const Shape4& orig) {
  if (dy.shape() != Shape4{orig.n, orig.c, orig.h / 2, orig.w / 2})
    throw ShapeError("avg_pool2_backward: shape mismatch");
  Tensor4<double> dx(orig);
  for (std::size_t n = 0; n < orig.n; ++n)
    for (std::size_t c = 0; c < orig.c; ++c)
      for (std::size_t r = 0; r < orig.h; ++r)
        for (std::size_t q = 0; q < orig.w; ++q) dx(n, c, r, q) = 0.25 * dy(n, c, r / 2, q / 2);
  return dx;
}

CrossEntropy cross_entropy(const Logits& logits, std::span<const int> labels) {
  const auto& s = logits.shape();
  if (labels.size() != s.n || s.l != 1) throw ShapeError("cross_entropy: label count mismatch");
  CrossEntropy ce{0.0, Logits(s), 0};
  for (std::size_t n = 0; n < s.n; ++n) {
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= s.c) throw ShapeError("cross_entropy: bad label");
    double mx = logits(n, 0, 0);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < s.c; ++k)
      if (logits(n, k, 0) > mx) mx = logits(n, k, 0), arg = k;
    double z = 0;
    for (std::size_t k = 0; k < s.c; ++k) z += std::exp(logits(n, k, 0) - mx);
    const double lse = mx + std::log(z);
    ce.loss += lse - logits(n, static_cast<std::size_t>(y), 0);
    for (std::size_t k = 0; k < s.c; ++k)
      ce.dlogits(n, k, 0) = (std::exp(logits(n, k, 0) - lse) - (k == static_cast<std::size_t>(y) ? 1.0 : 0.0)) /
                            static_cast<double>(s.n);
    if (arg == static_cast<std::size_t>(y)) ++ce.correct;
  }
  ce.loss /= static_cast<double>(s.n);
  return ce;
}

void MiniCnnConfig::validate() const {
  if (channels.empty() || blocks_per_stage == 0 || in_channels == 0 || classes < 2)
    throw ConfigError("MiniCnn: need >= 1 stage, >= 1 block, >= 2 classes");
  std::size_t h = height, w = width;
  for (std::size_t c : channels) {
    if (c == 0) throw ConfigError("MiniCnn: zero-width stage");
    if (h % 2 || w % 2 || h < 2 || w < 2)
      throw ConfigError("MiniCnn: spatial size must stay even through every pooling step");
    if (attention) ela::validate(*attention, c);
    h /= 2;
    w /= 2;
  }
}

nlohmann::json MiniCnnConfig::to_json() const {
  return {{"channels", channels},
          {"blocks_per_stage", blocks_per_stage},
          {"attention", attention ? nlohmann::json(module_name(*attention)) : nlohmann::json(nullptr)},
          {"in_channels", in_channels},
          {"height", height},
          {"width", width},
          {"classes", classes}};
}

MiniCnnConfig MiniCnnConfig::from_json(const nlohmann::json& j) {
  MiniCnnConfig c;
  c.channels = j.at("channels").get<std::vector<std::size_t>>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<std::size_t>();
  if (!j.at("attention").is_null()) c.attention = parse_module(j.at("attention").get<std::string>());
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.height = j.at("height").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.classes = j.at("classes").get<std::size_t>();
  return c;
}

MiniCnn::MiniCnn(MiniCnnConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in_c = cfg_.in_channels;
  std::size_t h = cfg_.height, w = cfg_.width;
  for (std::size_t out_c : cfg_.channels) {
    Stage st;
    for (std::size_t b = 0; b < cfg_.blocks_per_stage; ++b) {
      Block blk{in_c, out_c, std::vector<double>(out_c * in_c * 9), std::vector<double>(out_c, 0.0),
                std::vector<double>(out_c * in_c * 9, 0.0), std::vector<double>(out_c, 0.0),
                std::nullopt, {}, {}, {}};
      he_normal(blk.weight, in_c * 9, rng);
      if (cfg_.attention) blk.attn.emplace(*cfg_.attention, out_c, rng());
      st.blocks.push_back(std::move(blk));
      in_c = out_c;
    }
    st.pre_pool = {1, out_c, h, w};
    h /= 2;
    w /= 2;
    stages_.push_back(std::move(st));
  }
  const std::size_t feat = in_c * h * w;
  head_w_.resize(cfg_.classes * feat);
  he_normal(head_w_, feat, rng);
  head_b_.assign(cfg_.classes, 0.0);
  head_dw_.assign(head_w_.size(), 0.0);
  head_db_.assign(cfg_.classes, 0.0);
}

Logits MiniCnn::forward(const Tensor4<double>& x) {
  const auto& s = x.shape();
  if (s.c != cfg_.in_channels || s.h != cfg_.height || s.w != cfg_.width)
    throw ShapeError("MiniCnn: input " + s.str() + " does not match the model");
  Tensor4<double> cur = x;
  for (auto& st : stages_) {
    for (auto& blk : st.blocks) {
      blk.input = cur;
      Tensor4<double> conv = conv3x3(cur, blk.weight, blk.bias, blk.out_c);
      blk.gated = blk.attn ? blk.attn->forward(conv, true) : std::move(conv);
      cur = relu(blk.gated);
    }
    st.pre_pool = cur.shape();
    cur = avg_pool2(cur);
  }
  if (!all_finite<double>(cur.data())) throw DivergenceError("MiniCnn: non-finite activations");
  features_ = cur;
  const std::size_t feat = cur.size() / s.n;
  const auto& k = simd::kernels<double>();
  Logits logits({s.n, cfg_.classes, 1});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < cfg_.classes; ++c)
      logits(n, c, 0) = head_b_[c] + k.dot(head_w_.data() + c * feat, cur.sample(n).data(), feat);
  have_forward_ = true;
  return logits;
}

void MiniCnn::backward(const Logits& dlogits) {
  if (!have_forward_) throw StateError("MiniCnn: backward before forward");
  const std::size_t n_batch = features_.shape().n;
  if (dlogits.shape() != Shape3{n_batch, cfg_.classes, 1})
    throw ShapeError("MiniCnn: logits gradient shape mismatch");
  const auto& k = simd::kernels<double>();
  const std::size_t feat = features_.size() / n_batch;
  Tensor4<double> grad(features_.shape());
  for (std::size_t n = 0; n < n_batch; ++n)
    for (std::size_t c = 0; c < cfg_.classes; ++c) {
      const double d = dlogits(n, c, 0);
      head_db_[c] += d;
      k.axpy(head_dw_.data() + c * feat, d, features_.sample(n).data(), feat);
      k.axpy(grad.sample(n).data(), d, head_w_.data() + c * feat, feat);
    }
  for (std::size_t si = stages_.size(); si-- > 0;) {
    auto& st = stages_[si];
    grad = avg_pool2_backward(grad, st.pre_pool);
    for (std::size_t bi = st.blocks.size(); bi-- > 0;) {
      auto& blk = st.blocks[bi];
      blk.gated_grad = relu_backward(grad, blk.gated);
      Tensor4<double> dconv = blk.attn ? blk.attn->backward(blk.gated_grad) : blk.gated_grad;
      auto cg = conv3x3_backward(dconv, blk.input, blk.weight);
      k.add(blk.dweight.data(), cg.dweight.data(), blk.dweight.size());
      k.add(blk.dbias.data(), cg.dbias.data(), blk.dbias.size());
      grad = std::move(cg.dx);
    }
  }
}

void MiniCnn::set_mode(Mode m) {
  for (auto& st : stages_)
    for (auto& blk : st.blocks)
      if (blk.attn) blk.attn->set_mode(m);
}

void MiniCnn::zero_grad() {
  for_each_param([](Param<double>& p) { std::fill(p.grad.begin(), p.grad.end(), 0.0); });
}

void MiniCnn::for_each_param(const std::function<void(Param<double>&)>& fn) {
  // Conv and head buffers are wrapped in a temporary Param so callers see
  // one uniform interface; values and grads are copied back afterwards.
  auto visit_raw = [&](const std::string& name, std::vector<double>& value,
                       std::vector<double>& grad, ParamRole role) {
    Param<double> p{name, {value.size()}, role, std::move(value), std::move(grad)};
    fn(p);
    value = std::move(p.value);
    grad = std::move(p.grad);
  };
  for (std::size_t s = 0; s < stages_.size(); ++s)
    for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b) {
      auto& blk = stages_[s].blocks[b];
      const std::string prefix = "stage" + std::to_string(s) + ".block" + std::to_string(b) + ".";
      visit_raw(prefix + "conv.weight", blk.weight, blk.dweight, ParamRole::conv_weight);
      visit_raw(prefix + "conv.bias", blk.bias, blk.dbias, ParamRole::conv_bias);
      if (blk.attn)
        for (auto& p : blk.attn->params().entries()) {
          const std::string local = p.name;
          p.name = prefix + "attn." + local;
          fn(p);
          p.name = local;
        }
    }
  visit_raw("head.weight", head_w_, head_dw_, ParamRole::conv_weight);
  visit_raw("head.bias", head_b_, head_db_, ParamRole::conv_bias);
}

std::size_t MiniCnn::param_count() const {
  std::size_t n = head_w_.size() + head_b_.size();
  for (const auto& st : stages_)
    for (const auto& blk : st.blocks) {
      n += blk.weight.size() + blk.bias.size();
      if (blk.attn) n += blk.attn->params().total_size();
    }
  return n;
}

ParamStore<double> MiniCnn::export_params() const {
  ParamStore<double> out;
  auto put = [&](const std::string& name, std::vector<std::size_t> shape, ParamRole role,
                 const std::vector<double>& v) { out.add(name, std::move(shape), role).value = v; };
  for (std::size_t s = 0; s < stages_.size(); ++s)
    for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b) {
      const auto& blk = stages_[s].blocks[b];
      const std::string prefix = "stage" + std::to_string(s) + ".block" + std::to_string(b) + ".";
      put(prefix + "conv.weight", {blk.out_c, blk.in_c, 3, 3}, ParamRole::conv_weight, blk.weight);
      put(prefix + "conv.bias", {blk.out_c}, ParamRole::conv_bias, blk.bias);
      if (blk.attn)
        for (const auto& p : blk.attn->params().entries())
          put(prefix + "attn." + p.name, p.shape, p.role, p.value);
    }
  put("head.weight", {cfg_.classes, head_w_.size() / cfg_.classes}, ParamRole::conv_weight, head_w_);
  put("head.bias", {cfg_.classes}, ParamRole::conv_bias, head_b_);
  return out;
}

void MiniCnn::import_params(const ParamStore<double>& ps) {
  auto get = [&](const std::string& name, std::vector<double>& dst) {
    const auto& p = ps.at(name);
    if (p.value.size() != dst.size()) throw ShapeError("MiniCnn: parameter " + name + " has the wrong size");
    dst = p.value;
  };
  for (std::size_t s = 0; s < stages_.size(); ++s)
    for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b) {
      auto& blk = stages_[s].blocks[b];
      const std::string prefix = "stage" + std::to_string(s) + ".block" + std::to_string(b) + ".";
      get(prefix + "conv.weight", blk.weight);
      get(prefix + "conv.bias", blk.bias);
      if (blk.attn)
        for (auto& p : blk.attn->params().entries()) get(prefix + "attn." + p.name, p.value);
    }
  get("head.weight", head_w_);
  get("head.bias", head_b_);
}

const Tensor4<double>& MiniCnn::stage_activation(std::size_t stage) const {
  if (stage >= stages_.size()) throw ConfigError("MiniCnn: no stage " + std::to_string(stage));
  if (!have_forward_) throw StateError("MiniCnn: no forward pass recorded");
  return stages_[stage].blocks.back().gated;
}

const Tensor4<double>& MiniCnn::stage_activation_grad(std::size_t stage) const {
  if (stage >= stages_.size()) throw ConfigError("MiniCnn: no stage " + std::to_string(stage));
  const auto& g = stages_[stage].blocks.back().gated_grad;
  if (g.shape() != stages_[stage].blocks.back().gated.shape())
    throw StateError("MiniCnn: no backward pass recorded");
  return g;
}

Attention<double>* MiniCnn::attention(std::size_t stage, std::size_t block) {
  if (stage >= stages_.size() || block >= stages_[stage].blocks.size()) return nullptr;
  auto& a = stages_[stage].blocks[block].attn;
  return a ? &*a : nullptr;
}

}  // namespace ela::toy
