// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/accounting.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "ela/attention.hpp"

namespace ela::accounting {

std::uint64_t param_count(const AttentionConfig& cfg, std::size_t channels) {
  validate(cfg, channels);
  const std::uint64_t c = channels;
  struct Count {
    std::uint64_t c;
    std::uint64_t operator()(const ElaConfig& e) const {
      const std::uint64_t g = e.conv_groups(c);
      // two grouped convs (no bias) + two GN affine pairs
      return 2 * c * (c / g) * e.kernel_size + 4 * c;
    }
    std::uint64_t operator()(const CaConfig& a) const {
      const std::uint64_t mip = a.mip(c);
      // F_1 (no bias) + norm affine + F_h, F_w with bias
      return mip * c + 2 * mip + 2 * (c * mip + c);
    }
    std::uint64_t operator()(const SeConfig& s) const { return 2 * s.mip(c) * c; }
    std::uint64_t operator()(const EcaConfig& e) const { return e.kernel_size; }
  };
  return std::visit(Count{c}, cfg);
}

std::uint64_t enumerate_params(const AttentionConfig& cfg, std::size_t channels) {
  return init_params<double>(cfg, channels, 0).total_size();
}

std::vector<FlopTerm> flop_breakdown(const AttentionConfig& cfg, std::size_t channels,
                                     std::size_t height, std::size_t width) {
  validate(cfg, channels);
  if (height == 0 || width == 0) throw ConfigError("flop_count: spatial size must be >= 1");
  const std::uint64_t c = channels, h = height, w = width;
  struct Terms {
    std::uint64_t c, h, w;
    std::vector<FlopTerm> operator()(const ElaConfig& e) const {
      const std::uint64_t g = e.conv_groups(c), ng = e.norm_groups(c), k = e.kernel_size;
      return {{"strip_pool_h", formula::strip_pool(c, h, w)},
              {"strip_pool_w", formula::strip_pool(c, h, w)},
              {"conv1d_h", formula::conv1d(c, c / g, k, h)},
              {"conv1d_w", formula::conv1d(c, c / g, k, w)},
              {"group_norm_h", formula::group_norm(c, h, ng)},
              {"group_norm_w", formula::group_norm(c, w, ng)},
              {"sigmoid_h", formula::sigmoid(c * h)},
              {"sigmoid_w", formula::sigmoid(c * w)},
              {"gate_product", formula::gate_product_hw(c, h, w)}};
    }
    std::vector<FlopTerm> operator()(const CaConfig& a) const {
      const std::uint64_t mip = a.mip(c), len = h + w;
      const std::uint64_t norm = a.norm == NormFlavor::batch
                                     ? formula::batch_norm(mip, len)
                                     : formula::group_norm(mip, len, a.norm_groups(c));
      const std::uint64_t delta = a.delta == GateActivation::hard_swish
                                      ? formula::hard_swish(mip * len)
                                      : formula::relu(mip * len);
      return {{"strip_pool_h", formula::strip_pool(c, h, w)},
              {"strip_pool_w", formula::strip_pool(c, h, w)},
              {"conv1", formula::conv1x1(mip, c, len, false)},
              {a.norm == NormFlavor::batch ? "batch_norm" : "group_norm", norm},
              {"delta", delta},
              {"conv_h", formula::conv1x1(c, mip, h, true)},
              {"conv_w", formula::conv1x1(c, mip, w, true)},
              {"sigmoid", formula::sigmoid(c * len)},
              {"gate_product", formula::gate_product_hw(c, h, w)}};
    }
    std::vector<FlopTerm> operator()(const SeConfig& s) const {
      const std::uint64_t mip = s.mip(c);
      return {{"global_pool", formula::global_pool(c, h, w)},
              {"fc1", formula::conv1x1(mip, c, 1, false)},
              {"relu", formula::relu(mip)},
              {"fc2", formula::conv1x1(c, mip, 1, false)},
              {"sigmoid", formula::sigmoid(c)},
              {"gate_product", formula::gate_product_channel(c, h, w)}};
    }
    std::vector<FlopTerm> operator()(const EcaConfig& e) const {
      return {{"global_pool", formula::global_pool(c, h, w)},
              {"conv1d", formula::conv1d(1, 1, e.kernel_size, c)},
              {"sigmoid", formula::sigmoid(c)},
              {"gate_product", formula::gate_product_channel(c, h, w)}};
    }
  };
  return std::visit(Terms{c, h, w}, cfg);
}

std::uint64_t flop_count(const AttentionConfig& cfg, std::size_t channels, std::size_t height,
                         std::size_t width) {
  std::uint64_t total = 0;
  for (const auto& t : flop_breakdown(cfg, channels, height, width)) total += t.flops;
  return total;
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  const std::size_t end = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + end, '\n'));
}

std::vector<std::string> base_assumptions() {
  return {
      "params: learnable weights only; BN running statistics are not counted",
      "ELA: two independent grouped 1D convs (F_h, F_w) without bias",
      "ELA: GroupNorm with per-channel affine (gamma, beta) for each direction",
      "ELA: GroupNorm groups = min(num_group, C)",
      "CA: F_1 1x1 conv without bias; F_h and F_w 1x1 convs with bias",
      "CA: norm layer affine (gamma, beta) on the bottleneck channels",
      "CA/SE: bottleneck width mip = max(8, round(C / r))",
      "SE: both 1x1 transforms without bias",
      "ECA: single k-tap 1D conv over channels without bias",
      "FLOPs: multiply-accumulate = 1; divisions and exponentials count 1",
  };
}

}  // namespace

PlacementSpec parse_placement(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t line = line_of(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("placement: line " + std::to_string(line) + ": " + e.what(), line);
  }
  if (!j.is_object()) throw ParseError("placement: top level must be an object", 1);

  PlacementSpec spec;
  try {
    spec.network = j.value("network", std::string("unnamed"));
    std::optional<AttentionConfig> default_module;
    if (j.contains("module")) default_module = parse_module(j.at("module").get<std::string>());
    if (j.contains("baseline_params"))
      spec.baseline_params = j.at("baseline_params").get<std::uint64_t>();
    if (j.contains("published_totals")) {
      const auto& p = j.at("published_totals");
      spec.published = PublishedTotals{p.value("source", std::string()),
                                  p.at("baseline_params_m").get<double>(),
                                  p.at("with_module_params_m").get<double>()};
    }
    if (j.contains("assumptions"))
      spec.assumptions = j.at("assumptions").get<std::vector<std::string>>();
    std::set<std::string> names;
    for (const auto& s : j.value("sites", nlohmann::json::array())) {
      Site site;
      site.name = s.at("name").get<std::string>();
      site.channels = s.at("channels").get<std::size_t>();
      site.height = s.at("height").get<std::size_t>();
      site.width = s.at("width").get<std::size_t>();
      if (s.contains("module")) {
        site.module = parse_module(s.at("module").get<std::string>());
      } else if (default_module) {
        site.module = *default_module;
      } else {
        throw ConfigError("placement: site " + site.name + " has no module");
      }
      if (site.channels == 0 || site.height == 0 || site.width == 0)
        throw ConfigError("placement: site " + site.name + " has a zero dimension");
      if (!names.insert(site.name).second)
        throw ConfigError("placement: duplicate site name " + site.name);
      validate(site.module, site.channels);
      spec.sites.push_back(std::move(site));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("placement: ") + e.what(), 0);
  }
  return spec;
}

AuditReport audit_network(const PlacementSpec& spec) {
  AuditReport r;
  r.network = spec.network;
  r.baseline_params = spec.baseline_params;
  r.assumptions = base_assumptions();
  r.assumptions.insert(r.assumptions.end(), spec.assumptions.begin(), spec.assumptions.end());
  for (const auto& site : spec.sites) {
    SiteReport s;
    s.site = site.name;
    s.module = module_name(site.module);
    s.channels = site.channels;
    s.height = site.height;
    s.width = site.width;
    s.params = param_count(site.module, site.channels);
    s.enumerated_params = enumerate_params(site.module, site.channels);
    s.flops = flop_count(site.module, site.channels, site.height, site.width);
    if (s.params != s.enumerated_params) r.enumeration_matches = false;
    r.total_params += s.params;
    r.total_flops += s.flops;
    r.sites.push_back(std::move(s));
  }
  r.delta_params = r.total_params;
  r.delta_flops = r.total_flops;
  if (spec.published) {
    Reconciliation rec;
    rec.source = spec.published->source;
    rec.published_delta_m = spec.published->with_module_params_m - spec.published->baseline_params_m;
    rec.reproduced_delta_m = static_cast<double>(r.delta_params) / 1e6;
    const double lo = std::min(rec.published_delta_m, rec.reproduced_delta_m);
    const double hi = std::max(rec.published_delta_m, rec.reproduced_delta_m);
    rec.ratio = lo > 0 ? hi / lo : (hi > 0 ? INFINITY : 1.0);
    rec.within_band = rec.ratio <= rec.band;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "reconciliation (%s): reproduced delta %.6f M vs published %.6f M, ratio x%.3f "
                  "(%s the x%.1f band); insertion sites, bias and affine usage are not published",
                  rec.source.c_str(), rec.reproduced_delta_m, rec.published_delta_m, rec.ratio,
                  rec.within_band ? "within" : "OUTSIDE", rec.band);
    r.assumptions.emplace_back(buf);
    r.reconciliation = rec;
  }
  return r;
}

std::string report_csv(const AuditReport& r) {
  std::ostringstream out;
  out << "site,module,params,flops\n";
  std::set<std::string> modules;
  for (const auto& s : r.sites) {
    out << s.site << ',' << s.module << ',' << s.params << ',' << s.flops << '\n';
    modules.insert(s.module);
  }
  const std::string label = modules.size() == 1 ? *modules.begin() : (modules.empty() ? "none" : "mixed");
  out << "TOTAL," << label << ',' << r.total_params << ',' << r.total_flops << '\n';
  if (r.baseline_params) out << "BASELINE,none," << *r.baseline_params << ",\n";
  out << "DELTA," << label << ',' << r.delta_params << ',' << r.delta_flops << '\n';
  return out.str();
}

nlohmann::json report_json(const AuditReport& r) {
  nlohmann::json j;
  j["network"] = r.network;
  auto& sites = j["sites"] = nlohmann::json::array();
  for (const auto& s : r.sites)
    sites.push_back({{"site", s.site},
                     {"module", s.module},
                     {"channels", s.channels},
                     {"height", s.height},
                     {"width", s.width},
                     {"params", s.params},
                     {"enumerated_params", s.enumerated_params},
                     {"flops", s.flops}});
  j["total"] = {{"params", r.total_params}, {"flops", r.total_flops}};
  j["delta"] = {{"params", r.delta_params}, {"flops", r.delta_flops}};
  if (r.baseline_params) {
    j["baseline"] = {{"params", *r.baseline_params}};
    j["network_params"] = *r.baseline_params + r.delta_params;
  }
  j["enumeration_matches"] = r.enumeration_matches;
  if (r.reconciliation) {
    const auto& rec = *r.reconciliation;
    j["reconciliation"] = {{"source", rec.source},
                           {"published_delta_m", rec.published_delta_m},
                           {"reproduced_delta_m", rec.reproduced_delta_m},
                           {"ratio", rec.ratio},
                           {"band", rec.band},
                           {"within_band", rec.within_band}};
  }
  j["assumptions"] = r.assumptions;
  return j;
}

PlacementSpec resnet18_placement(const AttentionConfig& module) {
  PlacementSpec spec;
  spec.network = "resnet18";
  const struct {
    const char* stage;
    std::size_t c, hw;
  } stages[] = {{"layer1", 64, 56}, {"layer2", 128, 28}, {"layer3", 256, 14}, {"layer4", 512, 7}};
  for (const auto& st : stages)
    for (int b = 0; b < 2; ++b)
      spec.sites.push_back(
          {std::string(st.stage) + "." + std::to_string(b), st.c, st.hw, st.hw, module});
  spec.assumptions.push_back(
      "placement: one module per BasicBlock, after the second conv and before the residual add");
  return spec;
}

}  // namespace ela::accounting
