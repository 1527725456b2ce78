// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ela::io {

// Writes `bytes` to `<path>.tmp` and renames it over `path`, so readers never
// observe a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Binary portable graymap (P5, maxval 255).
std::string encode_pgm(std::size_t width, std::size_t height, std::span<const std::uint8_t> pixels);

// Maps values in [0, 1] to 0..255 with rounding; values outside are clamped.
std::vector<std::uint8_t> to_gray8(std::span<const double> values);

}  // namespace ela::io
