// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Parameter and FLOP accounting for attention blocks and network placements.
//
// FLOP formula sheet (unit: multiply-accumulate = 1; a division or an
// exponential also counts 1). C channels, H x W site, L a 1D length.
//
//   strip pool over W         C*H*W      every input element is one MAC x*(1/W)
//   strip pool over H         C*H*W
//   global average pool       C*H*W
//   conv1d (grouped, k)       Cout * L * (Cin/groups) * k
//   conv1x1                   Cout * Cin * L  (+ Cout * L with bias)
//   group norm                4*C*L + 2*G    (sum, sum of squares, normalize,
//                                             affine; variance and rsqrt per group)
//   batch norm (inference)    2*C*L          (normalize, affine)
//   sigmoid                   2 per element  (exp, division)
//   hard-swish                2 per element
//   rectifier                 1 per element
//   directional gate product  2*C*H*W        (two multiplies per output)
//   channel gate product      C*H*W

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ela/attention_config.hpp"

namespace ela::accounting {

// Closed-form learnable parameter count (BN running statistics excluded).
std::uint64_t param_count(const AttentionConfig& cfg, std::size_t channels);

// Oracle: sizes summed over init_params' ParamStore.
std::uint64_t enumerate_params(const AttentionConfig& cfg, std::size_t channels);

struct FlopTerm {
  std::string op;
  std::uint64_t flops;
};

std::vector<FlopTerm> flop_breakdown(const AttentionConfig& cfg, std::size_t channels,
                                     std::size_t height, std::size_t width);
std::uint64_t flop_count(const AttentionConfig& cfg, std::size_t channels, std::size_t height,
                         std::size_t width);

// Per-op formulas from the sheet above.
namespace formula {
inline std::uint64_t strip_pool(std::uint64_t c, std::uint64_t h, std::uint64_t w) { return c * h * w; }
inline std::uint64_t global_pool(std::uint64_t c, std::uint64_t h, std::uint64_t w) { return c * h * w; }
inline std::uint64_t conv1d(std::uint64_t cout, std::uint64_t cin_per_group, std::uint64_t k,
                            std::uint64_t len) {
  return cout * len * cin_per_group * k;
}
inline std::uint64_t conv1x1(std::uint64_t cout, std::uint64_t cin, std::uint64_t len, bool bias) {
  return cout * cin * len + (bias ? cout * len : 0);
}
inline std::uint64_t group_norm(std::uint64_t c, std::uint64_t len, std::uint64_t groups) {
  return 4 * c * len + 2 * groups;
}
inline std::uint64_t batch_norm(std::uint64_t c, std::uint64_t len) { return 2 * c * len; }
inline std::uint64_t sigmoid(std::uint64_t n) { return 2 * n; }
inline std::uint64_t hard_swish(std::uint64_t n) { return 2 * n; }
inline std::uint64_t relu(std::uint64_t n) { return n; }
inline std::uint64_t gate_product_hw(std::uint64_t c, std::uint64_t h, std::uint64_t w) {
  return 2 * c * h * w;
}
inline std::uint64_t gate_product_channel(std::uint64_t c, std::uint64_t h, std::uint64_t w) {
  return c * h * w;
}
}  // namespace formula

struct Site {
  std::string name;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  AttentionConfig module;
};

// Published totals (millions of parameters) a placement is reconciled with.
struct PublishedTotals {
  std::string source;
  double baseline_params_m = 0;
  double with_module_params_m = 0;
};

struct PlacementSpec {
  std::string network = "unnamed";
  std::vector<Site> sites;
  std::optional<std::uint64_t> baseline_params;
  std::optional<PublishedTotals> published;
  std::vector<std::string> assumptions;  // carried into the report
};

struct SiteReport {
  std::string site;
  std::string module;
  std::size_t channels = 0, height = 0, width = 0;
  std::uint64_t params = 0;
  std::uint64_t enumerated_params = 0;
  std::uint64_t flops = 0;
};

struct Reconciliation {
  std::string source;
  double published_delta_m = 0;
  double reproduced_delta_m = 0;
  double ratio = 0;  // max(a, b) / min(a, b)
  double band = 2.0;
  bool within_band = false;
};

struct AuditReport {
  std::string network;
  std::vector<SiteReport> sites;
  std::uint64_t total_params = 0;  // sum over sites
  std::uint64_t total_flops = 0;
  std::optional<std::uint64_t> baseline_params;
  std::uint64_t delta_params = 0;  // network with modules minus baseline
  std::uint64_t delta_flops = 0;
  bool enumeration_matches = true;
  std::optional<Reconciliation> reconciliation;
  std::vector<std::string> assumptions;
};

// Throws ParseError (with 1-based line number) or ConfigError.
PlacementSpec parse_placement(std::string_view json_text);

AuditReport audit_network(const PlacementSpec& spec);

// CSV: header site,module,params,flops; one row per site; then TOTAL, an
// optional BASELINE and DELTA.
std::string report_csv(const AuditReport& report);
nlohmann::json report_json(const AuditReport& report);

// One block per ResNet-18 BasicBlock (8 sites, C = 64..512 at 56..7 px).
PlacementSpec resnet18_placement(const AttentionConfig& module);

}  // namespace ela::accounting
