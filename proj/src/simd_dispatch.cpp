// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string>

#include "ela/error.hpp"
#include "simd_tables.hpp"

namespace ela::simd {
namespace {

bool cpu_has_avx2() {
#if ELA_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Level initial_level() {
  Level best = cpu_has_avx2() ? Level::avx2 : Level::scalar;
  if (const char* env = std::getenv("ELA_SIMD")) {
    if (auto req = parse_level(env); req && (*req == Level::scalar || best == *req))
      return *req;
  }
  return best;
}

std::atomic<Level>& active() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

}  // namespace

bool supported(Level level) {
  return level == Level::scalar || (level == Level::avx2 && cpu_has_avx2());
}

Level active_level() { return active().load(std::memory_order_relaxed); }

void set_active_level(Level level) {
  if (!supported(level))
    throw ConfigError("SIMD level '" + std::string(level_name(level)) +
                      "' is not supported on this CPU/build");
  active().store(level, std::memory_order_relaxed);
}

std::string_view level_name(Level level) {
  switch (level) {
    case Level::scalar:
      return "scalar";
    case Level::avx2:
      return "avx2";
  }
  return "unknown";
}

std::optional<Level> parse_level(std::string_view name) {
  if (name == "scalar") return Level::scalar;
  if (name == "avx2") return Level::avx2;
  return std::nullopt;
}

template <>
const KernelTable<float>* kernels_for<float>(Level level) {
  if (level == Level::scalar) return &detail::kScalarF32;
#if ELA_HAVE_AVX2
  if (level == Level::avx2 && cpu_has_avx2()) return &detail::kAvx2F32;
#endif
  return nullptr;
}

template <>
const KernelTable<double>* kernels_for<double>(Level level) {
  if (level == Level::scalar) return &detail::kScalarF64;
#if ELA_HAVE_AVX2
  if (level == Level::avx2 && cpu_has_avx2()) return &detail::kAvx2F64;
#endif
  return nullptr;
}

template <>
const KernelTable<float>& kernels<float>() {
  return *kernels_for<float>(active_level());
}

template <>
const KernelTable<double>& kernels<double>() {
  return *kernels_for<double>(active_level());
}

}  // namespace ela::simd
