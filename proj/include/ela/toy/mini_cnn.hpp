// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Small trainable CNN with a pluggable attention slot:
//
//   for each stage s:  [conv3x3 -> attention -> relu] x blocks, avgpool 2x2
//   head:              flatten -> linear -> logits
//
// The head keeps the spatial layout of the last feature map, so absolute
// position survives to the classifier.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"

#include "ela/attention.hpp"
#include "ela/param_store.hpp"
#include "ela/tensor.hpp"

namespace ela::toy {

struct MiniCnnConfig {
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t blocks_per_stage = 1;
  std::optional<AttentionConfig> attention;
  std::size_t in_channels = 1;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t classes = 4;

  // Throws ConfigError on empty stages, odd spatial sizes at a pooling step
  // or channel counts the attention config cannot use.
  void validate() const;
  nlohmann::json to_json() const;
  static MiniCnnConfig from_json(const nlohmann::json& j);
};

// Logits are stored as (N, classes, 1).
using Logits = Tensor3<double>;

class MiniCnn {
 public:
  MiniCnn(MiniCnnConfig cfg, std::uint64_t seed);

  Logits forward(const Tensor4<double>& x);
  // Accumulates parameter gradients for dL/dlogits. Requires a prior forward.
  void backward(const Logits& dlogits);

  void set_mode(Mode m);
  void zero_grad();
  void for_each_param(const std::function<void(Param<double>&)>& fn);
  std::size_t param_count() const;

  // All parameters under stable names (stage0.block0.conv.weight, ...).
  ParamStore<double> export_params() const;
  void import_params(const ParamStore<double>& ps);

  const MiniCnnConfig& config() const { return cfg_; }
  std::size_t num_stages() const { return cfg_.channels.size(); }
  // Post-attention (pre-rectifier) activation of the last block of `stage`
  // from the last forward, and its gradient from the last backward.
  const Tensor4<double>& stage_activation(std::size_t stage) const;
  const Tensor4<double>& stage_activation_grad(std::size_t stage) const;
  Attention<double>* attention(std::size_t stage, std::size_t block);

 private:
  struct Block {
    std::size_t in_c, out_c;
    std::vector<double> weight, bias;  // (out_c, in_c, 3, 3), (out_c)
    std::vector<double> dweight, dbias;
    std::optional<Attention<double>> attn;
    Tensor4<double> input, gated, gated_grad;
  };
  struct Stage {
    std::vector<Block> blocks;
    Shape4 pre_pool;
  };

  Block& block(std::size_t s, std::size_t b) { return stages_[s].blocks[b]; }

  MiniCnnConfig cfg_;
  std::vector<Stage> stages_;
  std::vector<double> head_w_, head_b_, head_dw_, head_db_;
  Tensor4<double> features_;  // input to the head
  bool have_forward_ = false;
};

// 3x3 same convolution with bias; exposed for tests.
Tensor4<double> conv3x3(const Tensor4<double>& x, std::span<const double> weight,
                        std::span<const double> bias, std::size_t out_c);
struct Conv3x3Grads {
  Tensor4<double> dx;
  std::vector<double> dweight, dbias;
};
Conv3x3Grads conv3x3_backward(const Tensor4<double>& dy, const Tensor4<double>& x,
                              std::span<const double> weight);

Tensor4<double> avg_pool2(const Tensor4<double>& x);
Tensor4<double> avg_pool2_backward(const Tensor4<double>& dy, const Shape4& orig);

// Mean cross-entropy over the batch and its gradient w.r.t. the logits.
// Uses max-subtracted log-sum-exp.
struct CrossEntropy {
  double loss = 0;
  Logits dlogits;
  std::size_t correct = 0;
};
CrossEntropy cross_entropy(const Logits& logits, std::span<const int> labels);

}  // namespace ela::toy
