// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/attention_config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include "ela/error.hpp"

namespace ela {
namespace {

std::size_t bottleneck(std::size_t channels, std::size_t reduction) {
  const auto r = static_cast<std::size_t>(
      std::lround(static_cast<double>(channels) / static_cast<double>(reduction)));
  return std::max<std::size_t>(8, r);
}

void require_channels(std::size_t channels) {
  if (channels == 0) throw ConfigError("attention: channel count must be >= 1");
}

}  // namespace

std::size_t ElaConfig::conv_groups(std::size_t channels) const {
  require_channels(channels);
  if (groups_rule == ConvGroupsRule::depthwise) return channels;
  if (channels < 8) return 1;
  const std::size_t g = channels / 8;
  if (channels % 8 != 0)
    throw ConfigError("ELA-" + variant + ": groups rule C/8 needs C divisible by 8, got C=" +
                      std::to_string(channels));
  return g;
}

std::size_t ElaConfig::norm_groups(std::size_t channels) const {
  require_channels(channels);
  if (gn_groups == 0) throw ConfigError("ELA: gn_groups must be >= 1");
  const std::size_t g = std::min(gn_groups, channels);
  if (channels % g != 0)
    throw ConfigError("ELA-" + variant + ": " + std::to_string(g) +
                      " GroupNorm groups do not divide C=" + std::to_string(channels));
  return g;
}

void ElaConfig::validate(std::size_t channels) const {
  if (kernel_size == 0 || kernel_size % 2 == 0)
    throw ConfigError("ELA: kernel_size must be odd, got " + std::to_string(kernel_size));
  conv_groups(channels);
  norm_groups(channels);
}

std::size_t CaConfig::mip(std::size_t channels) const {
  require_channels(channels);
  if (reduction == 0) throw ConfigError("CA: reduction must be >= 1");
  return bottleneck(channels, reduction);
}

std::size_t CaConfig::norm_groups(std::size_t channels) const {
  const std::size_t m = mip(channels);
  if (gn_groups == 0) {
    std::size_t g = std::min<std::size_t>(8, m);
    while (m % g != 0) --g;
    return g;
  }
  if (m % gn_groups != 0)
    throw ConfigError("CA-GN: " + std::to_string(gn_groups) +
                      " groups do not divide bottleneck width " + std::to_string(m));
  return gn_groups;
}

void CaConfig::validate(std::size_t channels) const {
  mip(channels);
  if (norm == NormFlavor::group) norm_groups(channels);
}

std::size_t SeConfig::mip(std::size_t channels) const {
  require_channels(channels);
  if (reduction == 0) throw ConfigError("SE: reduction must be >= 1");
  return bottleneck(channels, reduction);
}

void SeConfig::validate(std::size_t channels) const { mip(channels); }

void EcaConfig::validate(std::size_t channels) const {
  require_channels(channels);
  if (kernel_size == 0 || kernel_size % 2 == 0)
    throw ConfigError("ECA: kernel_size must be odd, got " + std::to_string(kernel_size));
}

void validate(const AttentionConfig& cfg, std::size_t channels) {
  std::visit([&](const auto& c) { c.validate(channels); }, cfg);
}

AttentionConfig parse_module(std::string_view name_view) {
  const std::string name(name_view);
  if (name == "ela-t") return ElaConfig::tiny();
  if (name == "ela-b") return ElaConfig::base();
  if (name == "ela-s") return ElaConfig::small();
  if (name == "ela-l") return ElaConfig::large();
  if (name == "se") return SeConfig{};
  if (name == "eca") return EcaConfig{};
  if (name == "ca") return CaConfig{};
  if (name == "ca-gn") return CaConfig{32, NormFlavor::group};

  std::smatch m;
  static const std::regex ela_re(R"(ela-k(\d+)-g(8?)-ng(\d+))");
  static const std::regex se_re(R"(se-r(\d+))");
  static const std::regex eca_re(R"(eca-k(\d+))");
  static const std::regex ca_re(R"(ca(-gn)?-r(\d+))");
  auto num = [&](const std::string& s) {
    if (s.size() > 6) throw ConfigError("hyperparameter too large in module name '" + name + "'");
    const auto v = static_cast<std::size_t>(std::stoul(s));
    if (v == 0) throw ConfigError("zero hyperparameter in module name '" + name + "'");
    return v;
  };
  if (std::regex_match(name, m, ela_re)) {
    ElaConfig c{num(m[1]),
                m[2].length() ? ConvGroupsRule::channels_over_8 : ConvGroupsRule::depthwise,
                num(m[3]), "custom"};
    if (c.kernel_size % 2 == 0) throw ConfigError("ELA: kernel_size must be odd in '" + name + "'");
    return c;
  }
  if (std::regex_match(name, m, se_re)) return SeConfig{num(m[1])};
  if (std::regex_match(name, m, eca_re)) return EcaConfig{num(m[1])};
  if (std::regex_match(name, m, ca_re))
    return CaConfig{num(m[2]), m[1].length() ? NormFlavor::group : NormFlavor::batch};
  throw ConfigError("unknown attention module '" + name + "'");
}

std::string module_name(const AttentionConfig& cfg) {
  struct Namer {
    std::string operator()(const SeConfig& c) const {
      return c.reduction == 32 ? "se" : "se-r" + std::to_string(c.reduction);
    }
    std::string operator()(const EcaConfig& c) const {
      return c.kernel_size == 3 ? "eca" : "eca-k" + std::to_string(c.kernel_size);
    }
    std::string operator()(const CaConfig& c) const {
      std::string base = c.norm == NormFlavor::group ? "ca-gn" : "ca";
      return c.reduction == 32 ? base : base + "-r" + std::to_string(c.reduction);
    }
    std::string operator()(const ElaConfig& c) const {
      if (c.variant.size() == 1 && std::string("TBSL").find(c.variant) != std::string::npos) {
        std::string s = "ela-";
        s += static_cast<char>(std::tolower(c.variant[0]));
        return s;
      }
      return "ela-k" + std::to_string(c.kernel_size) +
             (c.groups_rule == ConvGroupsRule::channels_over_8 ? "-g8" : "-g") +
             "-ng" + std::to_string(c.gn_groups);
    }
  };
  return std::visit(Namer{}, cfg);
}

}  // namespace ela
