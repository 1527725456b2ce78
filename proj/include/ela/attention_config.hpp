// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Hyperparameters for the four attention families and the rules that
// resolve them against a concrete channel count.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>

namespace ela {

enum class ConvGroupsRule {
  depthwise,        // groups = C
  channels_over_8,  // groups = C / 8
};

struct ElaConfig {
  std::size_t kernel_size = 7;
  ConvGroupsRule groups_rule = ConvGroupsRule::depthwise;
  std::size_t gn_groups = 16;
  std::string variant = "B";  // T, B, S, L or custom

  static ElaConfig tiny() { return {5, ConvGroupsRule::depthwise, 32, "T"}; }
  static ElaConfig base() { return {7, ConvGroupsRule::depthwise, 16, "B"}; }
  static ElaConfig small() { return {5, ConvGroupsRule::channels_over_8, 16, "S"}; }
  static ElaConfig large() { return {7, ConvGroupsRule::channels_over_8, 16, "L"}; }

  // Groups of both 1D convolutions. channels_over_8 resolves to max(1, C/8)
  // and must divide C exactly.
  std::size_t conv_groups(std::size_t channels) const;
  // GroupNorm groups: min(gn_groups, C); must divide C.
  std::size_t norm_groups(std::size_t channels) const;
  void validate(std::size_t channels) const;
};

enum class NormFlavor { batch, group };
enum class GateActivation { hard_swish, relu };

struct CaConfig {
  std::size_t reduction = 32;
  NormFlavor norm = NormFlavor::batch;
  GateActivation delta = GateActivation::hard_swish;
  // GroupNorm groups for the GN flavor; 0 picks the largest divisor of the
  // bottleneck width that is <= 8.
  std::size_t gn_groups = 0;

  // Bottleneck width max(8, round(C / r)).
  std::size_t mip(std::size_t channels) const;
  std::size_t norm_groups(std::size_t channels) const;
  void validate(std::size_t channels) const;
};

struct SeConfig {
  std::size_t reduction = 32;

  // Bottleneck width max(8, round(C / r)).
  std::size_t mip(std::size_t channels) const;
  void validate(std::size_t channels) const;
};

struct EcaConfig {
  std::size_t kernel_size = 3;

  void validate(std::size_t channels) const;
};

using AttentionConfig = std::variant<SeConfig, EcaConfig, CaConfig, ElaConfig>;

// Throws ConfigError when `cfg` cannot be instantiated at `channels`.
void validate(const AttentionConfig& cfg, std::size_t channels);

// Accepted names: se, eca, ca, ca-gn, ela-t, ela-b, ela-s, ela-l, plus
// se-r<R>, eca-k<K>, ca-r<R>, ca-gn-r<R> and ela-k<K>-g|g8-ng<N>.
AttentionConfig parse_module(std::string_view name);
std::string module_name(const AttentionConfig& cfg);

}  // namespace ela
