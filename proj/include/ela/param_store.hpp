// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ela/error.hpp"

namespace ela {

enum class ParamRole { conv_weight, conv_bias, norm_gamma, norm_beta };

inline std::string_view role_name(ParamRole r) {
  switch (r) {
    case ParamRole::conv_weight: return "conv_weight";
    case ParamRole::conv_bias: return "conv_bias";
    case ParamRole::norm_gamma: return "norm_gamma";
    case ParamRole::norm_beta: return "norm_beta";
  }
  return "unknown";
}

inline std::optional<ParamRole> parse_role(std::string_view s) {
  for (auto r : {ParamRole::conv_weight, ParamRole::conv_bias,
                 ParamRole::norm_gamma, ParamRole::norm_beta})
    if (role_name(r) == s) return r;
  return std::nullopt;
}

template <typename T>
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  ParamRole role = ParamRole::conv_weight;
  std::vector<T> value;
  std::vector<T> grad;

  std::size_t size() const { return value.size(); }
  bool operator==(const Param&) const = default;
};

inline std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Named learnable tensors with matching gradient buffers. Enumeration order
// is insertion order.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(std::string name, std::vector<std::size_t> shape,
                ParamRole role, T fill = T(0)) {
    if (contains(name)) throw ConfigError("ParamStore: duplicate name " + name);
    const std::size_t n = shape_size(shape);
    if (n == 0) throw ShapeError("ParamStore: empty parameter " + name);
    params_.push_back(Param<T>{std::move(name), std::move(shape), role,
                               std::vector<T>(n, fill), std::vector<T>(n, T(0))});
    return params_.back();
  }

  bool contains(std::string_view name) const { return find(name) != nullptr; }

  Param<T>& at(std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw ConfigError("ParamStore: missing parameter " + std::string(name));
  }
  const Param<T>& at(std::string_view name) const {
    if (auto* p = find(name)) return *p;
    throw ConfigError("ParamStore: missing parameter " + std::string(name));
  }

  std::span<const T> value(std::string_view name) const { return at(name).value; }

  void accumulate(std::string_view name, std::span<const T> g) {
    auto& p = at(name);
    if (g.size() != p.grad.size())
      throw ShapeError("ParamStore: gradient size mismatch for " + p.name);
    for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
  }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  std::vector<Param<T>>& entries() { return params_; }
  const std::vector<Param<T>>& entries() const { return params_; }
  std::size_t count() const { return params_.size(); }

  // Moves every entry of `other` into this store under `prefix`.
  void merge(ParamStore&& other, std::string_view prefix) {
    for (auto& p : other.params_) {
      std::string name = std::string(prefix) + p.name;
      if (contains(name)) throw ConfigError("ParamStore: duplicate name " + name);
      p.name = std::move(name);
      params_.push_back(std::move(p));
    }
    other.params_.clear();
  }

  bool operator==(const ParamStore&) const = default;

 private:
  Param<T>* find(std::string_view name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  const Param<T>* find(std::string_view name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::vector<Param<T>> params_;
};

}  // namespace ela
